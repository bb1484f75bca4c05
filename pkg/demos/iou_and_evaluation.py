"""
Overlap and scoring
===================

Rotated IoU on hand-checkable cases, then a small two-image evaluation with
a miss, a false alarm, and a difficult object that must not count.
"""

from midlines.evaluation import evaluate, rotated_iou
from midlines.geometry import rectangle

# Two unit-offset 2x2 squares overlap in a 1x2 strip: IoU = 2 / 6.
a = rectangle(1, 1, 2, 2)
b = rectangle(2, 1, 2, 2)
print(f"offset squares        {rotated_iou(a, b):.6f}  (exactly 2/6)")

# A square against its own 45-degree rotation: intersection is a regular
# octagon, IoU = 2*(sqrt(2)-1) / (2 - (sqrt(2)-1)) ~ 0.7071.
c = rectangle(0, 0, 2, 2)
d = rectangle(0, 0, 2, 2, 45)
print(f"square vs rotated 45  {rotated_iou(c, d):.6f}")

# Thin crossed strips barely overlap.
e = rectangle(0, 0, 40, 2)
f = rectangle(0, 0, 2, 40)
print(f"crossed strips        {rotated_iou(e, f):.6f}")

# --- a small dataset ---------------------------------------------------

gts = {
    "east": [
        rectangle(50, 50, 30, 12, 10, class_id=0),
        rectangle(120, 40, 40, 16, 70, class_id=1),
        rectangle(80, 120, 24, 24, 0, class_id=0, difficult=True),
    ],
    "west": [
        rectangle(60, 60, 36, 14, 130, class_id=1),
    ],
}

dets = {
    "east": [
        rectangle(51, 50, 30, 12, 11, class_id=0, score=0.92),    # good hit
        rectangle(200, 200, 30, 12, 0, class_id=0, score=0.40),   # false alarm
        rectangle(80, 120, 24, 24, 0, class_id=0, score=0.88),    # hits difficult -> ignored
    ],
    "west": [],                                                    # class 1 boxes all missed
}

report = evaluate(dets, gts, mode="map")
print()
print(report.format_table())
print()
print("the difficult object is neither a hit nor a miss; the class-1")
print("ground truth in both images went undetected, so its AP is 0.")

text = evaluate(dets, gts, mode="text", class_names=("word", "line"))
print()
print(text.format_table())
