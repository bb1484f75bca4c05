"""On-disk container for encoded maps.

A container directory holds manifest.json plus one raw little-endian
float32 file per tensor, row-major [channel][row][col]. Branch 1 is the
horizontal branch, branch 2 the oriented one.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encoder import TargetMaps
from .errors import ShapeMismatch

TENSOR_NAMES = ("hm_b1", "hm_b2", "reg_b1", "reg_b2", "mask_b1", "mask_b2")

_MANIFEST_FIELDS = ("stride", "num_classes", "width", "height", "image_w", "image_h", "class_names", "tensors")


def _tensor_views(maps: TargetMaps) -> dict[str, np.ndarray]:
    return {
        "hm_b1": maps.heatmap[0],
        "hm_b2": maps.heatmap[1],
        "reg_b1": maps.regression[0],
        "reg_b2": maps.regression[1],
        "mask_b1": maps.reg_mask[0].astype(np.float64),
        "mask_b2": maps.reg_mask[1].astype(np.float64),
    }


def write_maps(
    maps: TargetMaps,
    out_dir: str | Path,
    class_names: list[str] | tuple[str, ...],
    provenance: dict | None = None,
) -> Path:
    """Write one container; returns the manifest path."""
    if len(class_names) != maps.num_classes:
        raise ShapeMismatch(
            f"{len(class_names)} class names for {maps.num_classes} channels"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tensors = []
    for name, array in _tensor_views(maps).items():
        data = np.ascontiguousarray(array, dtype="<f4")
        data.tofile(out / f"{name}.f32")
        tensors.append(
            {"name": name, "file": f"{name}.f32", "shape": list(array.shape), "dtype": "<f4"}
        )
    manifest = {
        "stride": maps.stride,
        "num_classes": maps.num_classes,
        "width": maps.width,
        "height": maps.height,
        "image_w": maps.image_w,
        "image_h": maps.image_h,
        "class_names": list(class_names),
        "tensors": tensors,
    }
    if provenance is not None:
        manifest["provenance"] = provenance
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_maps(container_dir: str | Path) -> tuple[TargetMaps, list[str]]:
    """Read a container back; inverse of write_maps up to float32 rounding.

    Raises ShapeMismatch when a tensor file's size disagrees with its
    manifest shape or required tensors are missing; missing files surface
    as FileNotFoundError.
    """
    root = Path(container_dir)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    for field in _MANIFEST_FIELDS:
        if field not in manifest:
            raise ShapeMismatch(f"manifest missing field {field!r}")
    by_name = {t["name"]: t for t in manifest["tensors"]}
    missing = [n for n in TENSOR_NAMES if n not in by_name]
    if missing:
        raise ShapeMismatch(f"manifest missing tensors {missing}")

    arrays: dict[str, np.ndarray] = {}
    for name in TENSOR_NAMES:
        entry = by_name[name]
        shape = tuple(int(s) for s in entry["shape"])
        raw = np.fromfile(root / entry["file"], dtype="<f4")
        if raw.size != int(np.prod(shape)):
            raise ShapeMismatch(
                f"tensor {name}: file holds {raw.size} values, manifest says {shape}"
            )
        arrays[name] = raw.reshape(shape).astype(np.float64)

    height, width = int(manifest["height"]), int(manifest["width"])
    num_classes = int(manifest["num_classes"])
    expected = {
        "hm_b1": (num_classes, height, width),
        "hm_b2": (num_classes, height, width),
        "reg_b1": (8, height, width),
        "reg_b2": (8, height, width),
        "mask_b1": (height, width),
        "mask_b2": (height, width),
    }
    for name, shape in expected.items():
        if arrays[name].shape != shape:
            raise ShapeMismatch(f"tensor {name}: shape {arrays[name].shape}, expected {shape}")

    maps = TargetMaps(
        stride=int(manifest["stride"]),
        num_classes=num_classes,
        width=width,
        height=height,
        image_w=int(manifest["image_w"]),
        image_h=int(manifest["image_h"]),
        heatmap=np.stack([arrays["hm_b1"], arrays["hm_b2"]]),
        regression=np.stack([arrays["reg_b1"], arrays["reg_b2"]]),
        reg_mask=np.stack([arrays["mask_b1"], arrays["mask_b2"]]) > 0.5,
        n_objects=0,
    )
    return maps, [str(n) for n in manifest["class_names"]]
