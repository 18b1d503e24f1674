"""Frame accuracy against the two Jaccard variants on a toy example.

Ground truth: A on frames 0-9, B on 10-19. The prediction starts B five
frames early. MoF counts frames; IoD asks how much of each detected
segment is right; IoU also penalises what the detection misses.
"""
from segalign.core import Segment, Segmentation
from segalign.metrics import evaluate

A, B = 0, 1
truth = Segmentation("toy", (Segment(A, 0, 9), Segment(B, 10, 19)))
pred = Segmentation("toy", (Segment(A, 0, 4), Segment(B, 5, 19)))

report = evaluate([pred], [truth], names=["A", "B"])
print(f"MoF {report.mof:.3f}")   # 15 of 20 frames
print(f"IoD {report.iod:.3f}")   # A: 5/5, B: 10/15
print(f"IoU {report.iou:.3f}")   # A: 5/10, B: 10/15
print("per class:", {k: round(v, 3) for k, v in report.per_class_accuracy.items()})
