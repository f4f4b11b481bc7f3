# core/predicates.py
"""
Geometric predicates for the Delaunay construction.

Both predicates run a floating-point filter first and fall back to exact
rational arithmetic (``fractions.Fraction``) when the float determinant is
too small relative to its Hadamard bound. Exact zeros of the in-sphere test
are broken by symbolic perturbation of the lifted coordinate, ordered by
global point index, so the answer is a deterministic function of the inputs.
"""
from fractions import Fraction
from typing import Sequence

import numpy as np

# float determinant is trusted when |det| exceeds this fraction of its Hadamard bound
_FILTER = 1e-10


def _exact_det(rows):
    """Determinant of a square matrix of Fractions (Gaussian elimination)."""
    m = [list(r) for r in rows]
    n = len(m)
    det = Fraction(1)
    for col in range(n):
        pivot = None
        for r in range(col, n):
            if m[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = -det
        p = m[col][col]
        det *= p
        for r in range(col + 1, n):
            factor = m[r][col] / p
            if factor == 0:
                continue
            for c in range(col, n):
                m[r][c] -= factor * m[col][c]
    return det


def _sign(value) -> int:
    return (value > 0) - (value < 0)


def orient3d(a, b, c, d) -> int:
    """Sign of det[b-a; c-a; d-a] (positive for the unit corner a=0, b=e1, c=e2, d=e3)."""
    a = np.asarray(a, dtype=float)
    m = np.array([np.asarray(b, float) - a, np.asarray(c, float) - a, np.asarray(d, float) - a])
    det = float(np.linalg.det(m))
    bound = float(np.prod(np.linalg.norm(m, axis=1)))
    if abs(det) > _FILTER * bound:
        return _sign(det)
    fa = [Fraction(float(v)) for v in a]
    rows = [[Fraction(float(p[k])) - fa[k] for k in range(3)] for p in (b, c, d)]
    return _sign(_exact_det(rows))


def _lifted_rows_exact(points, e):
    fe = [Fraction(float(v)) for v in e]
    rows = []
    for p in points:
        diff = [Fraction(float(p[k])) - fe[k] for k in range(3)]
        rows.append(diff + [diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]])
    return rows


def _perturbed_sign(pts: Sequence[np.ndarray], ids: Sequence[int]) -> int:
    """Sign of the 5x5 lifted determinant under symbolic perturbation.

    Rows are [x, y, z, |p|^2 + eps_i, 1] for (a, b, c, d, e). The determinant
    is linear in the eps_i; the point with the smallest global id dominates, so
    the first non-vanishing cofactor (ids ascending) decides.
    """
    order = sorted(range(5), key=lambda j: ids[j])
    for j in order:
        others = [pts[k] for k in range(5) if k != j]
        # cofactor of the lifted column: (-1)^(j+3) * det[x y z 1](others)
        # and det[x y z 1](p0..p3) == -orient3d(p0, p1, p2, p3)
        minor = -orient3d(*others)
        if minor != 0:
            return minor * (1 if (j + 3) % 2 == 0 else -1)
    return 0


def insphere(a, b, c, d, e, ids: Sequence[int] = (0, 1, 2, 3, 4)) -> int:
    """+1 if ``e`` is strictly inside the circumsphere of (a, b, c, d), -1 if outside.

    Never returns 0 for a non-degenerate tetrahedron: exact ties are decided by
    the index-ordered symbolic perturbation. ``ids`` are the global indices of
    the five points. Returns 0 only when (a, b, c, d) is itself flat.
    """
    orient = orient3d(a, b, c, d)
    if orient == 0:
        return 0
    e = np.asarray(e, dtype=float)
    pts = [np.asarray(p, dtype=float) for p in (a, b, c, d)]
    m = np.empty((4, 4))
    for i, p in enumerate(pts):
        diff = p - e
        m[i, :3] = diff
        m[i, 3] = diff @ diff
    det = float(np.linalg.det(m))
    bound = float(np.prod(np.linalg.norm(m, axis=1)))
    if abs(det) > _FILTER * bound:
        lifted = _sign(det)
    else:
        lifted = _sign(_exact_det(_lifted_rows_exact(pts, e)))
        if lifted == 0:
            lifted = _perturbed_sign(pts + [e], ids)
    # the lifted 5x5 determinant equals this 4x4 one; e is inside iff
    # lifted * det[x y z 1](a..d) > 0, i.e. lifted * orient < 0
    return 1 if lifted * orient < 0 else -1
