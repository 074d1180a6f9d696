"""Where on the image is the user looking while the content moves?

A gaze estimate arrives as normalized screen coordinates. The image under
the user's finger has been panned, zoomed, and rotated, so the same screen
point keeps landing on different content. This walkthrough maps one gaze
point through the three coordinate frames and back:

    normalized screen -> screen px -> widget (viewport) px
        -> undo the manipulation -> intrinsic image px

Run:  python3 demos/01_reconstruction_basics.py
"""

import math

from gazealign import (
    HomPoint,
    TransformState,
    ViewportGeometry,
    compose_transform,
    forward_project,
    invert_transform,
    reconstruct,
)

# A phone-like layout: 1290x2796 display, the image widget sits 45 px from
# the left edge and 398 px from the top, showing a 2400x4000 photo scaled
# down to 1200x2000.
geom = ViewportGeometry(W=1290, H=2796, ox=45, oy=398, wd=1200, hd=2000, wi=2400, hi=4000)

print("=== 1. A gaze point with no manipulation ===")
rest = TransformState(s=1.0, theta=0.0, tx=0.0, ty=0.0, t=0)
p = reconstruct(0.5, 0.5, rest, geom)
print(f"gaze at the screen midpoint -> intrinsic pixel ({p.x:.1f}, {p.y:.1f})")
print("note: not the image center, because the widget is offset on screen\n")

print("=== 2. The user pans the image 600 px to the right ===")
panned = TransformState(s=1.0, theta=0.0, tx=600.0, ty=0.0, t=0)
p2 = reconstruct(0.5, 0.5, panned, geom)
print(f"same screen gaze now lands on intrinsic pixel ({p2.x:.1f}, {p2.y:.1f})")
print(f"the content shifted under the gaze by {p.x - p2.x:.0f} intrinsic px in x\n")

print("=== 3. Following a content point through a pinch-zoom-rotate ===")
target = HomPoint(900.0, 1400.0)  # a fixed feature on the photograph
for label, st in [
    ("rest", rest),
    ("zoom x2", TransformState(s=2.0, theta=0.0, tx=0.0, ty=0.0, t=0)),
    ("rotate 30deg", TransformState(s=1.0, theta=math.radians(30), tx=0.0, ty=0.0, t=0)),
    ("compound", TransformState(s=1.6, theta=math.radians(-45), tx=250.0, ty=-120.0, t=0)),
]:
    xn, yn = forward_project(target, st, geom)
    back = reconstruct(xn, yn, st, geom)
    print(
        f"  {label:>12}: feature appears at normalized ({xn:.3f}, {yn:.3f}); "
        f"reconstruct -> ({back.x:.1f}, {back.y:.1f})"
    )
print("forward projection and reconstruction agree to float precision\n")

print("=== 4. Under the hood: the pivot matrix ===")
st = TransformState(s=2.0, theta=math.pi / 2, tx=0.0, ty=0.0, t=0)
m = compose_transform(st, geom)
print("M = T(tx,ty) T(center) R(theta) S(s) T(-center), pivot at the widget center:")
for row in m.rows():
    print("   [" + "  ".join(f"{v:10.3f}" for v in row) + "]")
inv = invert_transform(m)
check = m @ inv
print("max |M M^-1 - I| =", max(abs(v - e) for r, er in zip(check.rows(), ((1, 0, 0), (0, 1, 0), (0, 0, 1))) for v, e in zip(r, er)))
