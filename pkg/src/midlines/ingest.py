"""Annotation parsing (DOTA and ICDAR layouts), tiling, and the GT JSON form.

Parsers never throw on a bad line; they skip it and report why in the
returned warning list. Structural failure of a whole file does raise.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import AllLinesMalformed, EmptyFile, UnknownClass
from .geometry import OrientedBox, Point2, is_convex

DOTA_CLASS_NAMES = (
    "plane", "baseball-diamond", "bridge", "ground-track-field", "small-vehicle",
    "large-vehicle", "ship", "tennis-court", "basketball-court", "storage-tank",
    "soccer-ball-field", "roundabout", "harbor", "swimming-pool", "helicopter",
)
ICDAR_CLASS_NAMES = ("text",)

_DOTA_HEADERS = ("imagesource", "gsd")

log = logging.getLogger(__name__)


@dataclass
class AnnotatedImage:
    image_id: str
    width: int
    height: int
    objects: list[OrientedBox] = field(default_factory=list)
    class_names: tuple[str, ...] = DOTA_CLASS_NAMES


@dataclass(frozen=True)
class TileSpec:
    """Sliding-window layout: fixed window, fractional overlap."""

    window: int = 800
    overlap: float = 0.25

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError(f"overlap must be in [0, 1), got {self.overlap}")

    @property
    def step(self) -> float:
        return self.window * (1.0 - self.overlap)


def _clamped_box(
    coords: Sequence[float],
    width: int | None,
    height: int | None,
    class_id: int,
    difficult: bool,
) -> OrientedBox:
    points = []
    for i in range(4):
        x, y = coords[2 * i], coords[2 * i + 1]
        if width is not None:
            x = min(max(x, 0.0), float(width))
        if height is not None:
            y = min(max(y, 0.0), float(height))
        points.append(Point2(x, y))
    return OrientedBox(tuple(points), class_id=class_id, difficult=difficult)


def _extent(objects: Sequence[OrientedBox]) -> tuple[int, int]:
    max_x = max((p.x for box in objects for p in box.corners), default=1.0)
    max_y = max((p.y for box in objects for p in box.corners), default=1.0)
    return max(1, math.ceil(max_x)), max(1, math.ceil(max_y))


def parse_dota(
    text: str,
    image_id: str = "",
    width: int | None = None,
    height: int | None = None,
    strict: bool = False,
) -> tuple[AnnotatedImage, list[str]]:
    """Parse DOTA label text: x1 y1 x2 y2 x3 y3 x4 y4 category difficult.

    Header lines (imagesource, gsd) are skipped silently. Without explicit
    image dimensions the extent of the parsed corners is used.
    """
    warnings: list[str] = []
    objects: list[OrientedBox] = []
    content_lines = 0
    malformed = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip().lstrip("﻿")
        if not line:
            continue
        if line.lower().startswith(_DOTA_HEADERS):
            continue
        content_lines += 1
        tokens = line.split()
        if len(tokens) != 10:
            warnings.append(f"line {lineno}: expected 10 fields, got {len(tokens)}")
            malformed += 1
            continue
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError:
            warnings.append(f"line {lineno}: unparseable coordinates")
            malformed += 1
            continue
        category = tokens[8]
        if tokens[9] not in ("0", "1"):
            warnings.append(f"line {lineno}: difficult flag must be 0 or 1")
            malformed += 1
            continue
        if category not in DOTA_CLASS_NAMES:
            warnings.append(f"line {lineno}: unknown category {category!r}, skipped")
            continue
        try:
            box = _clamped_box(
                coords, width, height,
                class_id=DOTA_CLASS_NAMES.index(category),
                difficult=tokens[9] == "1",
            )
        except ValueError as err:
            warnings.append(f"line {lineno}: {err}")
            continue
        objects.append(box)
    if content_lines == 0:
        if strict:
            raise EmptyFile(f"{image_id or 'input'}: no annotation lines")
    elif malformed == content_lines:
        raise AllLinesMalformed(f"{image_id or 'input'}: none of {malformed} lines parse")
    if width is None or height is None:
        ext_w, ext_h = _extent(objects)
        width = width if width is not None else ext_w
        height = height if height is not None else ext_h
    return (
        AnnotatedImage(image_id, width, height, objects, DOTA_CLASS_NAMES),
        warnings,
    )


def parse_icdar(
    text: str,
    image_id: str = "",
    width: int | None = None,
    height: int | None = None,
    strict: bool = False,
) -> tuple[AnnotatedImage, list[str]]:
    """Parse ICDAR text lines: x1,y1,...,y4,transcription.

    The transcription may itself contain commas; "###" marks a difficult
    region. Non-convex quads are skipped here so the overlap routine never
    sees them.
    """
    warnings: list[str] = []
    objects: list[OrientedBox] = []
    content_lines = 0
    malformed = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip().lstrip("﻿")
        if not line:
            continue
        content_lines += 1
        parts = line.split(",")
        if len(parts) < 9:
            warnings.append(f"line {lineno}: expected 8 coordinates plus text")
            malformed += 1
            continue
        try:
            coords = [float(t) for t in parts[:8]]
        except ValueError:
            warnings.append(f"line {lineno}: unparseable coordinates")
            malformed += 1
            continue
        transcription = ",".join(parts[8:]).strip()
        try:
            box = _clamped_box(
                coords, width, height, class_id=0,
                difficult=transcription == "###",
            )
        except ValueError as err:
            warnings.append(f"line {lineno}: {err}")
            continue
        if not is_convex(box):
            warnings.append(f"line {lineno}: non-convex quad skipped")
            continue
        objects.append(box)
    if content_lines == 0:
        if strict:
            raise EmptyFile(f"{image_id or 'input'}: no annotation lines")
    elif malformed == content_lines:
        raise AllLinesMalformed(f"{image_id or 'input'}: none of {malformed} lines parse")
    if width is None or height is None:
        ext_w, ext_h = _extent(objects)
        width = width if width is not None else ext_w
        height = height if height is not None else ext_h
    return (
        AnnotatedImage(image_id, width, height, objects, ICDAR_CLASS_NAMES),
        warnings,
    )


def _axis_origins(dim: int, window: int, step: float) -> list[float]:
    """Window origins along one axis; the last window is clamped to the edge."""
    origins: list[float] = []
    o = 0.0
    while True:
        actual = min(o, max(0.0, dim - window))
        if actual not in origins:
            origins.append(actual)
        if actual + window >= dim:
            return origins
        o += step


def _fmt_origin(v: float) -> str:
    return str(int(v)) if v == int(v) else f"{v:g}"


def tile_image(img: AnnotatedImage, spec: TileSpec = TileSpec()) -> list[AnnotatedImage]:
    """Cut an image into overlapping window tiles and split its objects.

    An object belongs to every tile whose half-open window contains its
    corner centroid; in the overlap band that can be more than one tile.
    Translated corners are clamped to the tile; boxes that degenerate under
    clamping are dropped.
    """
    xs = _axis_origins(img.width, spec.window, spec.step)
    ys = _axis_origins(img.height, spec.window, spec.step)
    tiles = []
    for oy in ys:
        for ox in xs:
            tile_w = int(round(min(spec.window, img.width - ox)))
            tile_h = int(round(min(spec.window, img.height - oy)))
            tile = AnnotatedImage(
                image_id=f"{img.image_id}__{_fmt_origin(ox)}_{_fmt_origin(oy)}",
                width=tile_w,
                height=tile_h,
                objects=[],
                class_names=img.class_names,
            )
            for box in img.objects:
                cx = sum(p.x for p in box.corners) / 4.0
                cy = sum(p.y for p in box.corners) / 4.0
                if not (ox <= cx < ox + spec.window and oy <= cy < oy + spec.window):
                    continue
                moved = [
                    (
                        min(max(p.x - ox, 0.0), float(tile_w)),
                        min(max(p.y - oy, 0.0), float(tile_h)),
                    )
                    for p in box.corners
                ]
                try:
                    tile.objects.append(
                        OrientedBox(
                            tuple(Point2(x, y) for x, y in moved),
                            class_id=box.class_id,
                            score=box.score,
                            difficult=box.difficult,
                        )
                    )
                except ValueError:
                    log.warning(
                        "tile=%s dropped a box that clamping collapsed", tile.image_id
                    )
                    continue
            tiles.append(tile)
    return tiles


# --- normalized ground-truth JSON ----------------------------------------------


def image_to_json(img: AnnotatedImage) -> dict:
    return {
        "image_id": img.image_id,
        "width": img.width,
        "height": img.height,
        "objects": [
            {
                "class": img.class_names[box.class_id],
                "corners": box.corner_array(),
                "difficult": box.difficult,
            }
            for box in img.objects
        ],
    }


def infer_vocabulary(class_strings: set[str]) -> list[str]:
    """Deterministic vocabulary for a set of class names.

    Known layouts keep their canonical channel order; anything else is
    sorted alphabetically.
    """
    if class_strings <= set(DOTA_CLASS_NAMES):
        return list(DOTA_CLASS_NAMES)
    if class_strings <= set(ICDAR_CLASS_NAMES):
        return list(ICDAR_CLASS_NAMES)
    return sorted(class_strings)


def images_from_json(data: list, class_names: Sequence[str] | None = None) -> list[AnnotatedImage]:
    """Rebuild annotated images from the normalized JSON array."""
    if not isinstance(data, list):
        raise ValueError("ground-truth JSON must be an array of images")
    if class_names is None:
        seen = {obj["class"] for img in data for obj in img.get("objects", ())}
        class_names = infer_vocabulary(seen)
    index = {name: i for i, name in enumerate(class_names)}
    images = []
    for entry in data:
        objects = []
        for obj in entry.get("objects", ()):
            name = obj["class"]
            if name not in index:
                raise UnknownClass(f"class {name!r} not in vocabulary {list(class_names)}")
            c = obj["corners"]
            objects.append(
                OrientedBox(
                    tuple(Point2(c[2 * i], c[2 * i + 1]) for i in range(4)),
                    class_id=index[name],
                    difficult=bool(obj.get("difficult", False)),
                )
            )
        images.append(
            AnnotatedImage(
                image_id=str(entry["image_id"]),
                width=int(entry["width"]),
                height=int(entry["height"]),
                objects=objects,
                class_names=tuple(class_names),
            )
        )
    return images


def load_ground_truth(path: str | Path, class_names: Sequence[str] | None = None) -> list[AnnotatedImage]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return images_from_json(data, class_names)
