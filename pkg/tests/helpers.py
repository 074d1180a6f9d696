"""Shared random-data builders and numpy reference math for the test suite."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from gazealign.geometry import Mat3, TransformState, ViewportGeometry

finite = {"allow_nan": False, "allow_infinity": False}


def geometries() -> st.SearchStrategy[ViewportGeometry]:
    """Hypothesis strategy over plausible screen/widget/image layouts."""

    def build(draw):
        W = draw(st.floats(min_value=200, max_value=4000, **finite))
        H = draw(st.floats(min_value=200, max_value=4000, **finite))
        ox = draw(st.floats(min_value=0, max_value=W * 0.45, **finite))
        oy = draw(st.floats(min_value=0, max_value=H * 0.45, **finite))
        wd = draw(st.floats(min_value=20, max_value=W - ox, **finite))
        hd = draw(st.floats(min_value=20, max_value=H - oy, **finite))
        wi = draw(st.floats(min_value=16, max_value=8192, **finite))
        hi = draw(st.floats(min_value=16, max_value=8192, **finite))
        return ViewportGeometry(W=W, H=H, ox=ox, oy=oy, wd=wd, hd=hd, wi=wi, hi=hi)

    return st.composite(lambda draw: build(draw))()


def transform_states(
    s_min: float = 0.2, s_max: float = 8.0, t_max: float = 2000.0
) -> st.SearchStrategy[TransformState]:
    return st.builds(
        TransformState,
        s=st.floats(min_value=s_min, max_value=s_max, **finite),
        theta=st.floats(min_value=-np.pi, max_value=np.pi, **finite),
        tx=st.floats(min_value=-t_max, max_value=t_max, **finite),
        ty=st.floats(min_value=-t_max, max_value=t_max, **finite),
        t=st.integers(min_value=0, max_value=10**12),
    )


def random_geometry(rng: np.random.Generator) -> ViewportGeometry:
    W = rng.uniform(200, 4000)
    H = rng.uniform(200, 4000)
    ox = rng.uniform(0, W * 0.45)
    oy = rng.uniform(0, H * 0.45)
    return ViewportGeometry(
        W=W,
        H=H,
        ox=ox,
        oy=oy,
        wd=rng.uniform(20, W - ox),
        hd=rng.uniform(20, H - oy),
        wi=rng.uniform(16, 8192),
        hi=rng.uniform(16, 8192),
    )


def random_state(
    rng: np.random.Generator, s_range=(0.2, 8.0), t_abs: float = 2000.0
) -> TransformState:
    return TransformState(
        s=rng.uniform(*s_range),
        theta=rng.uniform(-np.pi, np.pi),
        tx=rng.uniform(-t_abs, t_abs),
        ty=rng.uniform(-t_abs, t_abs),
        t=int(rng.integers(0, 10**12)),
    )


# numpy reference implementations, kept independent of the production kernel


def np_translation(tx: float, ty: float) -> np.ndarray:
    return np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])


def np_rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def np_scaling(s: float) -> np.ndarray:
    return np.array([[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0]])


def np_compose(st_: TransformState, geom: ViewportGeometry) -> np.ndarray:
    """Explicit five-matrix pivot composition evaluated numerically."""
    cx, cy = geom.wd / 2.0, geom.hd / 2.0
    return (
        np_translation(st_.tx, st_.ty)
        @ np_translation(cx, cy)
        @ np_rotation(st_.theta)
        @ np_scaling(st_.s)
        @ np_translation(-cx, -cy)
    )


def np_adjugate_inverse(m: np.ndarray) -> np.ndarray:
    """General 3x3 inverse via the adjugate (cofactor transpose) formula."""
    cof = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(m, i, axis=0), j, axis=1)
            cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    det = float(m[0] @ cof[0])
    return cof.T / det


def mat3_to_np(m: Mat3) -> np.ndarray:
    return np.array(m.rows(), dtype=float)
