import json
import logging

import pytest

from midlines.errors import AllLinesMalformed, EmptyFile, UnknownClass
from midlines.geometry import rectangle
from midlines.ingest import (
    DOTA_CLASS_NAMES,
    ICDAR_CLASS_NAMES,
    AnnotatedImage,
    TileSpec,
    image_to_json,
    images_from_json,
    infer_vocabulary,
    load_ground_truth,
    parse_dota,
    parse_icdar,
    tile_image,
)

DOTA_LINE = "100 80 130 80 130 120 100 120 plane 0"


# --- parse_dota -------------------------------------------------------------------


def test_dota_basic_line():
    img, warnings = parse_dota(DOTA_LINE, image_id="P0001")
    assert warnings == []
    assert img.image_id == "P0001"
    assert img.class_names == DOTA_CLASS_NAMES
    (box,) = img.objects
    assert box.class_id == DOTA_CLASS_NAMES.index("plane")
    assert not box.difficult
    assert box.corner_array() == [100, 80, 130, 80, 130, 120, 100, 120]


def test_dota_headers_skipped_silently():
    text = "imagesource:GoogleEarth\ngsd:0.146343590398\n" + DOTA_LINE
    img, warnings = parse_dota(text)
    assert warnings == []
    assert len(img.objects) == 1


def test_dota_difficult_flag():
    img, _ = parse_dota(DOTA_LINE.replace("plane 0", "plane 1"))
    assert img.objects[0].difficult


def test_dota_short_line_warns_and_skips():
    text = DOTA_LINE + "\n" + "1 2 3 4 5 6 7 plane 0"
    img, warnings = parse_dota(text)
    assert len(img.objects) == 1
    assert len(warnings) == 1
    assert "10 fields" in warnings[0]
    assert "line 2" in warnings[0]


def test_dota_bad_coordinate_and_flag_warn():
    text = "a b c d e f g h plane 0\n" + DOTA_LINE.replace(" 0", " 2")
    img, warnings = parse_dota(text + "\n" + DOTA_LINE)
    assert len(img.objects) == 1
    assert "unparseable coordinates" in warnings[0]
    assert "difficult flag" in warnings[1]


def test_dota_unknown_category_is_skipped_not_structural():
    text = DOTA_LINE.replace("plane", "zeppelin")
    img, warnings = parse_dota(text)  # must not raise AllLinesMalformed
    assert img.objects == []
    assert "zeppelin" in warnings[0]


def test_dota_all_lines_malformed_raises():
    with pytest.raises(AllLinesMalformed):
        parse_dota("1 2 3\nnot even close")


def test_dota_empty_file_strict_only():
    img, warnings = parse_dota("imagesource:x\n\n")
    assert img.objects == [] and warnings == []
    with pytest.raises(EmptyFile):
        parse_dota("", strict=True)


def test_dota_clamps_to_given_dimensions():
    text = "-10 -5 40 -5 40 30 -10 30 plane 0"
    img, _ = parse_dota(text, width=35, height=25)
    assert img.objects[0].corner_array() == [0, 0, 35, 0, 35, 25, 0, 25]
    assert (img.width, img.height) == (35, 25)


def test_dota_infers_extent_without_dimensions():
    img, _ = parse_dota(DOTA_LINE)
    assert (img.width, img.height) == (130, 120)


# --- parse_icdar ------------------------------------------------------------------


def test_icdar_basic_line():
    img, warnings = parse_icdar("10,10,50,12,49,30,9,28,hello", image_id="img_1")
    assert warnings == []
    assert img.class_names == ICDAR_CLASS_NAMES
    (box,) = img.objects
    assert box.class_id == 0
    assert not box.difficult
    assert box.corner_array() == [10, 10, 50, 12, 49, 30, 9, 28]


def test_icdar_hash_marks_difficult():
    img, _ = parse_icdar("10,10,50,12,49,30,9,28,###")
    assert img.objects[0].difficult


def test_icdar_transcription_may_contain_commas():
    img, warnings = parse_icdar("10,10,50,12,49,30,9,28,one, two, three")
    assert warnings == []
    assert len(img.objects) == 1
    assert not img.objects[0].difficult


def test_icdar_byte_order_mark_tolerated():
    img, warnings = parse_icdar("﻿10,10,50,12,49,30,9,28,word")
    assert warnings == []
    assert len(img.objects) == 1


def test_icdar_non_convex_quad_skipped():
    img, warnings = parse_icdar("0,0,10,1,3,2,10,10,word")
    assert img.objects == []
    assert "non-convex" in warnings[0]


def test_icdar_structural_failures():
    with pytest.raises(AllLinesMalformed):
        parse_icdar("1,2,3\nalso,not,enough")
    with pytest.raises(EmptyFile):
        parse_icdar("\n\n", strict=True)
    img, _ = parse_icdar("")
    assert img.objects == []


# --- tiling -----------------------------------------------------------------------


def test_four_tiles_for_1400_square():
    img = AnnotatedImage("P1", 1400, 1400, [rectangle(900, 300, 40, 20, 30)])
    tiles = tile_image(img, TileSpec(window=800, overlap=0.25))
    assert [t.image_id for t in tiles] == [
        "P1__0_0", "P1__600_0", "P1__0_600", "P1__600_600",
    ]
    assert all((t.width, t.height) == (800, 800) for t in tiles)
    by_id = {t.image_id: t for t in tiles}
    # Centroid (900, 300) sits only in the window starting at x=600.
    assert [len(t.objects) for t in tiles] == [0, 1, 0, 0]
    (moved,) = by_id["P1__600_0"].objects
    cx = sum(p.x for p in moved.corners) / 4
    cy = sum(p.y for p in moved.corners) / 4
    assert (cx, cy) == pytest.approx((300, 300))


def test_overlap_band_centroid_lands_in_both_tiles():
    img = AnnotatedImage("P1", 1400, 100, [rectangle(700, 50, 40, 20)])
    tiles = tile_image(img, TileSpec(window=800, overlap=0.25))
    assert [len(t.objects) for t in tiles] == [1, 1]


def test_membership_interval_is_half_open():
    # Centroid exactly at x=800 is outside [0, 800) but inside [600, 1400).
    img = AnnotatedImage("P1", 1400, 100, [rectangle(800, 50, 40, 20)])
    tiles = tile_image(img, TileSpec(window=800, overlap=0.25))
    assert [len(t.objects) for t in tiles] == [0, 1]


def test_last_window_clamps_to_edge():
    img = AnnotatedImage("P1", 1000, 1900, [])
    tiles = tile_image(img, TileSpec(window=800, overlap=0.25))
    xs = sorted({t.image_id.split("__")[1].split("_")[0] for t in tiles})
    ys = sorted({t.image_id.split("__")[1].split("_")[1] for t in tiles}, key=int)
    assert xs == ["0", "200"]
    assert ys == ["0", "600", "1100"]
    assert len(tiles) == 6


def test_small_image_is_one_tile():
    img = AnnotatedImage("P1", 700, 500, [rectangle(650, 450, 30, 14, 45)])
    (tile,) = tile_image(img, TileSpec(window=800, overlap=0.25))
    assert tile.image_id == "P1__0_0"
    assert (tile.width, tile.height) == (700, 500)
    assert len(tile.objects) == 1


def test_translation_is_exact_for_interior_objects():
    box = rectangle(1000.25, 900.5, 48, 20, 30)
    img = AnnotatedImage("P1", 1400, 1400, [box])
    tiles = {t.image_id: t for t in tile_image(img, TileSpec(800, 0.25))}
    (moved,) = tiles["P1__600_600"].objects
    for p, q in zip(moved.corners, box.corners):
        assert p.x + 600 == q.x
        assert p.y + 600 == q.y


def test_straddling_corners_clamp_to_tile():
    img = AnnotatedImage("P1", 700, 700, [rectangle(690, 100, 40, 20)])
    (tile,) = tile_image(img, TileSpec(window=800, overlap=0.25))
    (moved,) = tile.objects
    assert max(p.x for p in moved.corners) == 700.0


def test_box_collapsed_by_clamping_is_dropped(caplog):
    # Window reaches past the declared extent: the centroid test passes but
    # every corner clamps onto the image edge.
    img = AnnotatedImage("P1", 700, 700, [rectangle(725, 100, 30, 20)])
    with caplog.at_level(logging.WARNING, logger="midlines.ingest"):
        (tile,) = tile_image(img, TileSpec(window=800, overlap=0.25))
    assert tile.objects == []
    assert "clamping" in caplog.text


def test_tile_spec_validation():
    with pytest.raises(ValueError):
        TileSpec(window=0)
    with pytest.raises(ValueError):
        TileSpec(overlap=1.0)
    assert TileSpec(window=800, overlap=0.25).step == 600.0


# --- normalized JSON --------------------------------------------------------------


def test_json_round_trip(tmp_path):
    img, _ = parse_dota(DOTA_LINE + "\n30 0 60 0 60 20 30 20 ship 1", image_id="P9")
    payload = [image_to_json(t) for t in tile_image(img, TileSpec(800, 0.25))]
    path = tmp_path / "gt.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    restored = load_ground_truth(path)
    assert [r.image_id for r in restored] == [t["image_id"] for t in payload]
    for entry, image in zip(payload, restored):
        assert image.class_names == DOTA_CLASS_NAMES
        assert [
            {
                "class": image.class_names[b.class_id],
                "corners": b.corner_array(),
                "difficult": b.difficult,
            }
            for b in image.objects
        ] == entry["objects"]


def test_json_schema_fields():
    img, _ = parse_icdar("10,10,50,12,49,30,9,28,###", image_id="t1")
    payload = image_to_json(img)
    assert payload == {
        "image_id": "t1",
        "width": 50,
        "height": 30,
        "objects": [
            {
                "class": "text",
                "corners": [10, 10, 50, 12, 49, 30, 9, 28],
                "difficult": True,
            }
        ],
    }


def test_vocabulary_inference():
    assert infer_vocabulary({"ship", "plane"}) == list(DOTA_CLASS_NAMES)
    assert infer_vocabulary({"text"}) == ["text"]
    assert infer_vocabulary({"zebra", "aardvark"}) == ["aardvark", "zebra"]
    assert infer_vocabulary(set()) == list(DOTA_CLASS_NAMES)


def test_json_with_explicit_vocabulary():
    data = [
        {
            "image_id": "a",
            "width": 100,
            "height": 100,
            "objects": [{"class": "car", "corners": [0, 0, 10, 0, 10, 5, 0, 5]}],
        }
    ]
    (img,) = images_from_json(data, class_names=["bus", "car"])
    assert img.objects[0].class_id == 1
    assert not img.objects[0].difficult
    with pytest.raises(UnknownClass):
        images_from_json(data, class_names=["bus"])


def test_json_must_be_an_array():
    with pytest.raises(ValueError):
        images_from_json({"image_id": "a"})
