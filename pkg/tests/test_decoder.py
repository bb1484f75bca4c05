import numpy as np
import pytest

from midlines.decoder import (
    Detection,
    component_to_detection,
    decode,
    extract_components,
    merge_branches,
    reconstruct_at_cell,
)
from midlines.encoder import TargetMaps, encode_image
from midlines.errors import ShapeMismatch
from midlines.evaluation import rotated_iou
from midlines.geometry import BranchId, rectangle

from oracles import flood_components


def make_maps(height=24, width=24, num_classes=1, stride=4):
    return TargetMaps(
        stride=stride,
        num_classes=num_classes,
        width=width,
        height=height,
        image_w=width * stride,
        image_h=height * stride,
        heatmap=np.zeros((2, num_classes, height, width)),
        regression=np.zeros((2, 8, height, width)),
        reg_mask=np.zeros((2, height, width), dtype=bool),
        n_objects=0,
    )


def write_box_offsets(reg, row, col, stride, half_w, half_h):
    """Offsets for an axis-aligned box centered exactly on the cell point."""
    reg[:, row, col] = [half_w, 0.0, -half_w, 0.0, 0.0, -half_h, 0.0, half_h]


def corner_set(box):
    return sorted((round(p.x, 9), round(p.y, 9)) for p in box.corners)


# --- extract_components -----------------------------------------------------------


def test_empty_grid_has_no_components():
    assert extract_components(np.zeros((10, 10))) == []


def test_two_blocks_with_scores():
    grid = np.zeros((12, 12))
    grid[2:4, 2:4] = 0.6
    grid[2, 3] = 0.8
    grid[8:10, 0:2] = 0.5
    comps = extract_components(grid, threshold=0.3)
    assert len(comps) == 2
    first, second = comps
    assert set(map(tuple, first.cells)) == {(2, 2), (2, 3), (3, 2), (3, 3)}
    assert first.score == 0.8
    assert set(map(tuple, second.cells)) == {(8, 0), (8, 1), (9, 0), (9, 1)}
    assert second.score == 0.5


def test_diagonal_cells_join_one_component():
    grid = np.zeros((5, 5))
    grid[0, 0] = 0.9
    grid[1, 1] = 0.9
    comps = extract_components(grid)
    assert len(comps) == 1
    assert set(map(tuple, comps[0].cells)) == {(0, 0), (1, 1)}


def test_threshold_is_strict():
    grid = np.zeros((4, 4))
    grid[1, 1] = 0.3
    grid[2, 2] = 0.3000001
    comps = extract_components(grid, threshold=0.3)
    assert len(comps) == 1
    assert set(map(tuple, comps[0].cells)) == {(2, 2)}


def test_components_ordered_by_first_cell_scan_position():
    grid = np.zeros((6, 6))
    grid[0, 5] = 0.9  # first in scan order despite the rightmost column
    grid[2, 0] = 0.9
    grid[4, 3] = 0.9
    comps = extract_components(grid)
    firsts = [tuple(c.cells[0]) for c in comps]
    assert firsts == [(0, 5), (2, 0), (4, 3)]


def test_components_carry_class_and_branch():
    grid = np.zeros((4, 4))
    grid[1, 1] = 0.9
    (comp,) = extract_components(grid, class_id=7, branch=BranchId.ORIENTED)
    assert comp.class_id == 7
    assert comp.branch is BranchId.ORIENTED


def test_components_match_flood_fill_oracle():
    rng = np.random.default_rng(11)
    for _ in range(30):
        grid = (rng.random((20, 20)) > 0.65).astype(float) * 0.9
        comps = extract_components(grid, threshold=0.3)
        expected = flood_components(grid > 0.3)
        assert len(comps) == len(expected)
        for comp, cells in zip(comps, expected):
            assert set(map(tuple, comp.cells)) == cells


# --- reconstruction ---------------------------------------------------------------


def test_reconstruct_reads_one_cell():
    reg = np.zeros((8, 20, 20))
    write_box_offsets(reg, 5, 7, stride=4, half_w=20, half_h=8)
    det = reconstruct_at_cell(reg, 5, 7, stride=4, branch=BranchId.HORIZONTAL)
    expected = rectangle(28, 20, 40, 16)
    assert corner_set(det.box) == corner_set(expected)
    assert det.branch is BranchId.HORIZONTAL


def test_centroid_rounds_half_up_to_lookup_cell():
    # Four cells centered between them: centroid (10.5, 10.5) reads (11, 11).
    maps = make_maps()
    maps.heatmap[0, 0, 10:12, 10:12] = 0.9
    maps.heatmap[0, 0, 10, 10] = 0.95
    for row, col in ((10, 10), (10, 11), (11, 10)):
        write_box_offsets(maps.regression[0], row, col, 4, half_w=5, half_h=2.5)
    write_box_offsets(maps.regression[0], 11, 11, 4, half_w=20, half_h=8)
    (det,) = decode(maps)
    assert corner_set(det.box) == corner_set(rectangle(44, 44, 40, 16))
    assert det.score == 0.95


def test_component_to_detection_uses_component_metadata():
    reg = np.zeros((8, 20, 20))
    write_box_offsets(reg, 3, 3, 4, half_w=6, half_h=3)
    grid = np.zeros((20, 20))
    grid[3, 3] = 0.7
    (comp,) = extract_components(grid, class_id=2, branch=BranchId.ORIENTED)
    det = component_to_detection(comp, reg, stride=4)
    assert det.class_id == 2
    assert det.score == 0.7
    assert det.branch is BranchId.ORIENTED


# --- merge_branches ---------------------------------------------------------------


def det_at(x, y, w=40, h=16, angle=0.0, class_id=0, score=0.9, branch=BranchId.HORIZONTAL):
    return Detection(
        box=rectangle(x, y, w, h, angle, class_id=class_id, score=score),
        branch=branch,
    )


def test_merge_drops_lower_scoring_duplicate():
    weak = det_at(0, 0, score=0.6, branch=BranchId.HORIZONTAL)
    strong = det_at(0, 0, angle=2.5, score=0.8, branch=BranchId.ORIENTED)
    kept = merge_branches([weak, strong])
    assert kept == [strong]
    # Role reversal keeps the horizontal one instead.
    strong_h = det_at(0, 0, score=0.8, branch=BranchId.HORIZONTAL)
    weak_o = det_at(0, 0, angle=2.5, score=0.6, branch=BranchId.ORIENTED)
    assert merge_branches([weak_o, strong_h]) == [strong_h]


def test_merge_tie_keeps_horizontal():
    h = det_at(0, 0, score=0.7, branch=BranchId.HORIZONTAL)
    o = det_at(0, 0, angle=1.5, score=0.7, branch=BranchId.ORIENTED)
    assert merge_branches([o, h]) == [h]


def test_merge_requires_strictly_greater_overlap():
    h = det_at(0, 0, score=0.6, branch=BranchId.HORIZONTAL)
    o = det_at(2, 0, score=0.9, branch=BranchId.ORIENTED)
    iou = rotated_iou(h.box, o.box)
    assert merge_branches([h, o], iou_threshold=iou) == [h, o]
    assert merge_branches([h, o], iou_threshold=iou - 1e-9) == [o]


def test_merge_ignores_other_classes_and_low_overlap():
    h = det_at(0, 0, class_id=0, score=0.6, branch=BranchId.HORIZONTAL)
    other_class = det_at(0, 0, class_id=1, score=0.9, branch=BranchId.ORIENTED)
    far = det_at(500, 500, class_id=0, score=0.9, branch=BranchId.ORIENTED)
    assert merge_branches([h, other_class, far]) == [h, other_class, far]


def test_merge_never_suppresses_within_a_branch():
    a = det_at(0, 0, score=0.9, branch=BranchId.ORIENTED)
    b = det_at(0.5, 0, score=0.3, branch=BranchId.ORIENTED)
    assert merge_branches([a, b]) == [a, b]


# --- decode -----------------------------------------------------------------------


def test_decode_rejects_malformed_maps():
    maps = make_maps()
    maps.regression = maps.regression[:, :6]
    with pytest.raises(ShapeMismatch):
        decode(maps)


def test_decode_empty_maps():
    stats = {}
    assert decode(make_maps(), stats=stats) == []
    assert stats["dropped_degenerate"] == 0


def test_decode_drops_degenerate_regression():
    maps = make_maps()
    maps.heatmap[0, 0, 5, 5] = 0.9  # offsets all zero: endpoints coincide
    stats = {}
    assert decode(maps, stats=stats) == []
    assert stats["dropped_degenerate"] == 1


def test_decode_recovers_encoded_objects_exactly():
    boxes = [
        rectangle(60, 60, 48, 20, class_id=0),
        rectangle(180, 180, 60, 24, angle_deg=30, class_id=1),
    ]
    maps = encode_image(boxes, image_w=256, image_h=256, num_classes=2)
    dets = decode(maps)
    assert len(dets) == 2
    by_class = {d.class_id: d for d in dets}
    assert by_class[0].branch is BranchId.HORIZONTAL
    assert by_class[1].branch is BranchId.ORIENTED
    for box in boxes:
        assert rotated_iou(by_class[box.class_id].box, box) > 1.0 - 1e-9
        assert by_class[box.class_id].score == 1.0


def test_decode_is_deterministic():
    rng = np.random.default_rng(5)
    boxes = [
        rectangle(
            80 + 120 * (i % 3), 80 + 120 * (i // 3),
            rng.uniform(30, 60), rng.uniform(12, 25), rng.uniform(0, 180),
            class_id=int(rng.integers(0, 3)),
        )
        for i in range(9)
    ]
    maps = encode_image(boxes, image_w=480, image_h=480, num_classes=3)
    first = decode(maps)
    second = decode(maps)
    assert [corner_set(d.box) for d in first] == [corner_set(d.box) for d in second]
    assert [(d.class_id, d.branch) for d in first] == [
        (d.class_id, d.branch) for d in second
    ]
