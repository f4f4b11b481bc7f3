# core/geometry.py
"""
Point-process sampling in a ball and the 3D Delaunay tetrahedralization.

Responsibilities:
- NetworkRealization: one draw of N aBS positions in b(0, R), CSV import/export
- delaunay_tetrahedralize: incremental Bowyer–Watson (exact predicates) or qhull
- Tetrahedralization: canonical cells, face adjacency, volumes, circumspheres, point location
- audits used by the validation report (empty circumsphere, volume conservation)
"""
import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError

from core.errors import DegeneracyError, NumericError, ParameterError
from core.predicates import insphere
from utils.log_utils import LogCb, safe_log

# tetrahedra with volume below DEGENERACY_TOL * R^3 are degenerate
DEGENERACY_TOL = 1e-12

# relative mismatch tolerated between sum of cell volumes and hull volume
VOLUME_RTOL = 1e-6

# super-tetrahedron inradius, in units of the point-set radius, per attempt
SUPER_SCALES = (1e3, 1e5, 1e7)

# mean number of Delaunay cells per point for a homogeneous 3D process
CELLS_PER_POINT = 24.0 * math.pi ** 2 / 35.0

BACKENDS = ("bowyer-watson", "qhull")


class Point3(NamedTuple):
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.hypot(self.x, self.y, self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def of(cls, value) -> "Point3":
        arr = np.asarray(value, dtype=float).reshape(3)
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


# =========================================
# Realizations
# =========================================

@dataclass(frozen=True, eq=False)
class NetworkRealization:
    radius_m: float
    coords: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        if not (self.radius_m > 0 and math.isfinite(self.radius_m)):
            raise ParameterError(f"radius must be positive, got {self.radius_m}")
        arr = np.array(self.coords, dtype=float, copy=True)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ParameterError(f"coords must have shape (N, 3), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("coords must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    def __len__(self):
        return self.coords.shape[0]

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def points(self) -> List[Point3]:
        return [Point3.of(row) for row in self.coords]

    def point(self, i: int) -> Point3:
        return Point3.of(self.coords[i])

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.coords, axis=1)

    def scaled(self, factor: float) -> "NetworkRealization":
        return NetworkRealization(self.radius_m * factor, self.coords * factor, self.seed)

    def rotated(self, rotation) -> "NetworkRealization":
        q = np.asarray(rotation, dtype=float)
        if q.shape != (3, 3) or not np.allclose(q @ q.T, np.eye(3), atol=1e-12):
            raise ParameterError("rotation must be an orthogonal 3x3 matrix")
        return NetworkRealization(self.radius_m, self.coords @ q.T, self.seed)


def uniform_ball(rng: np.random.Generator, shape: Tuple[int, ...], radius: float) -> np.ndarray:
    """Uniform points in b(0, radius) with array shape ``shape + (3,)``.

    Radii are drawn first (inverse transform r = R u^{1/3}), directions second;
    the simulator relies on this draw order for common random numbers.
    """
    r = radius * np.cbrt(rng.random(shape))
    g = rng.standard_normal(tuple(shape) + (3,))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    pts = g * r[..., None]
    # normalization rounding may push a point a few ulps past the sphere
    nrm = np.linalg.norm(pts, axis=-1, keepdims=True)
    over = nrm > radius
    if np.any(over):
        pts = np.where(over, pts * (radius / np.where(over, nrm, 1.0)), pts)
    return pts


def sample_bpp(n: int, radius: float, seed: Optional[int] = None) -> NetworkRealization:
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n}")
    if not (radius > 0 and math.isfinite(radius)):
        raise ParameterError(f"radius must be positive, got {radius}")
    rng = np.random.default_rng(seed)
    return NetworkRealization(float(radius), uniform_ball(rng, (int(n),), float(radius)), seed)


def write_realization_csv(net: NetworkRealization, path: str):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "x", "y", "z"])
        for i, (x, y, z) in enumerate(net.coords):
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(z))])
        f.write(f"# radius_m={net.radius_m!r},seed={net.seed}\n")


def read_realization_csv(path: str, radius: Optional[float] = None) -> NetworkRealization:
    rows = []
    meta: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        header = None
        for raw in f:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for part in line[1:].split(","):
                    if "=" in part:
                        k, v = part.split("=", 1)
                        meta[k.strip()] = v.strip()
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = [c.strip() for c in cells]
                if header != ["id", "x", "y", "z"]:
                    raise ParameterError(f"unexpected realization header: {header}")
                continue
            rows.append((int(cells[0]), float(cells[1]), float(cells[2]), float(cells[3])))
    if not rows:
        raise ParameterError(f"no points in {path}")
    rows.sort(key=lambda r: r[0])
    coords = np.array([r[1:] for r in rows], dtype=float)
    if radius is None:
        radius = float(meta["radius_m"]) if "radius_m" in meta else float(np.linalg.norm(coords, axis=1).max())
    seed_txt = meta.get("seed", "None")
    seed = None if seed_txt in ("", "None") else int(seed_txt)
    return NetworkRealization(radius, coords, seed)


# =========================================
# Cells
# =========================================

@dataclass(frozen=True, order=True)
class Tetrahedron:
    vertex_ids: Tuple[int, int, int, int]

    def __post_init__(self):
        ids = tuple(sorted(int(v) for v in self.vertex_ids))
        if len(ids) != 4 or len(set(ids)) != 4:
            raise ParameterError(f"a tetrahedron needs 4 distinct vertices, got {self.vertex_ids}")
        object.__setattr__(self, "vertex_ids", ids)

    def faces(self) -> List[Tuple[int, int, int]]:
        """Faces in order 'opposite vertex k' for k = 0..3."""
        v = self.vertex_ids
        return [tuple(v[j] for j in range(4) if j != k) for k in range(4)]


@dataclass(frozen=True)
class Circumsphere:
    center: Point3
    radius: float


def _volumes(coords: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    if len(simplices) == 0:
        return np.zeros(0)
    v = coords[simplices]
    m = v[:, 1:, :] - v[:, :1, :]
    return np.abs(np.linalg.det(m)) / 6.0


def _circumspheres(coords: np.ndarray, simplices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    v = coords[simplices]
    rel = v[:, 1:, :] - v[:, :1, :]
    rhs = 0.5 * np.einsum("tij,tij->ti", rel, rel)
    with np.errstate(all="ignore"):
        offset = np.linalg.solve(rel, rhs[..., None])[..., 0]
    centers = v[:, 0, :] + offset
    radii = np.linalg.norm(offset, axis=1)
    return centers, radii


def _canonical(simplices) -> np.ndarray:
    arr = np.sort(np.asarray(simplices, dtype=np.int64).reshape(-1, 4), axis=1)
    if len(arr) == 0:
        return arr
    order = np.lexsort(arr.T[::-1])
    arr = arr[order]
    keep = np.ones(len(arr), dtype=bool)
    keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
    return arr[keep]


@dataclass(frozen=True, eq=False)
class Tetrahedralization:
    source: NetworkRealization
    simplices: np.ndarray
    backend: str = "external"

    def __post_init__(self):
        arr = _canonical(self.simplices)
        if len(arr) and (arr.min() < 0 or arr.max() >= self.source.n):
            raise ParameterError("simplex vertex index out of range")
        if len(arr) and np.any(arr[:, 1:] == arr[:, :-1]):
            raise ParameterError("simplex with repeated vertex")
        arr.setflags(write=False)
        object.__setattr__(self, "simplices", arr)

    @classmethod
    def from_simplices(cls, net: NetworkRealization, simplices, backend: str = "external"):
        return cls(net, np.asarray(simplices), backend)

    def __len__(self):
        return len(self.simplices)

    @cached_property
    def tetrahedra(self) -> Tuple[Tetrahedron, ...]:
        return tuple(Tetrahedron(tuple(int(v) for v in row)) for row in self.simplices)

    @cached_property
    def adjacency(self) -> Dict[Tuple[int, int, int], Tuple[int, ...]]:
        """face (sorted vertex triple) -> indices of the cells sharing it."""
        faces: Dict[Tuple[int, int, int], List[int]] = {}
        for ci, tet in enumerate(self.tetrahedra):
            for face in tet.faces():
                faces.setdefault(face, []).append(ci)
        return {k: tuple(v) for k, v in faces.items()}

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(T, 4): neighbor across the face opposite vertex k, -1 on the hull."""
        out = np.full((len(self), 4), -1, dtype=np.int64)
        adj = self.adjacency
        for ci, tet in enumerate(self.tetrahedra):
            for k, face in enumerate(tet.faces()):
                for other in adj[face]:
                    if other != ci:
                        out[ci, k] = other
        return out

    @cached_property
    def volumes(self) -> np.ndarray:
        return _volumes(self.source.coords, self.simplices)

    @cached_property
    def _spheres(self) -> Tuple[np.ndarray, np.ndarray]:
        return _circumspheres(self.source.coords, self.simplices)

    @property
    def circumcenters(self) -> np.ndarray:
        return self._spheres[0]

    @property
    def circumradii(self) -> np.ndarray:
        return self._spheres[1]

    @cached_property
    def _barycentric_inverse(self) -> np.ndarray:
        v = self.source.coords[self.simplices]
        edges = np.transpose(v[:, 1:, :] - v[:, :1, :], (0, 2, 1))
        return np.linalg.inv(edges)

    def barycentric(self, p) -> np.ndarray:
        """(T, 4) barycentric coordinates of ``p`` in every cell."""
        p = np.asarray(p, dtype=float).reshape(3)
        v0 = self.source.coords[self.simplices[:, 0]]
        lam = np.einsum("tij,tj->ti", self._barycentric_inverse, p - v0)
        return np.column_stack([1.0 - lam.sum(axis=1), lam])


# =========================================
# Construction
# =========================================

class _BowyerWatson:
    """Incremental insertion into a super-tetrahedron.

    Coordinates are divided by a power of two (exact), the super-tetrahedron
    is centered on the bounding box. Cells are sorted 4-tuples; a face map gives
    adjacency for the cavity search.
    """

    def __init__(self, coords: np.ndarray, scale: float):
        mag = float(np.abs(coords).max()) or 1.0
        self.unit = 2.0 ** math.ceil(math.log2(mag))
        pts = coords / self.unit
        center = 0.5 * (pts.max(axis=0) + pts.min(axis=0))
        span = max(float(np.linalg.norm(pts - center, axis=1).max()), 1e-300)
        corners = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / math.sqrt(3.0)
        # regular tetrahedron: inradius is a third of the circumradius
        super_pts = center + 3.0 * scale * span * corners
        self.n = len(coords)
        self.pts = np.vstack([pts, super_pts])
        cap = 64
        self.cells: List[Tuple[int, int, int, int]] = []
        self.alive = np.zeros(cap, dtype=bool)
        self.cc = np.zeros((cap, 3))
        self.r2 = np.zeros(cap)
        self.faces: Dict[Tuple[int, int, int], List[int]] = {}
        self._add(tuple(range(self.n, self.n + 4)))

    # -------- bookkeeping --------
    def _grow(self):
        cap = len(self.alive) * 2
        self.alive = np.concatenate([self.alive, np.zeros(cap - len(self.alive), dtype=bool)])
        self.cc = np.vstack([self.cc, np.zeros((cap - len(self.cc), 3))])
        self.r2 = np.concatenate([self.r2, np.zeros(cap - len(self.r2))])

    def _add(self, cell: Tuple[int, ...]):
        cell = tuple(sorted(cell))
        idx = len(self.cells)
        if idx >= len(self.alive):
            self._grow()
        self.cells.append(cell)
        self.alive[idx] = True
        v = self.pts[list(cell)]
        rel = v[1:] - v[0]
        try:
            off = np.linalg.solve(rel, 0.5 * np.einsum("ij,ij->i", rel, rel))
            self.cc[idx] = v[0] + off
            self.r2[idx] = off @ off
        except np.linalg.LinAlgError:
            self.cc[idx] = np.nan
            self.r2[idx] = np.nan
        for face in _faces_of(cell):
            self.faces.setdefault(face, []).append(idx)

    def _remove(self, idx: int):
        self.alive[idx] = False
        for face in _faces_of(self.cells[idx]):
            owners = self.faces[face]
            owners.remove(idx)
            if not owners:
                del self.faces[face]

    def _conflict(self, idx: int, i: int) -> bool:
        cell = self.cells[idx]
        a, b, c, d = (self.pts[v] for v in cell)
        return insphere(a, b, c, d, self.pts[i], ids=cell + (i,)) > 0

    # -------- insertion --------
    def _seed_cell(self, i: int) -> int:
        m = len(self.cells)
        live = np.flatnonzero(self.alive[:m])
        diff = self.cc[live] - self.pts[i]
        with np.errstate(invalid="ignore"):
            score = np.einsum("ij,ij->i", diff, diff) - self.r2[live]
        for idx in live[np.argsort(score)]:
            if self._conflict(int(idx), i):
                return int(idx)
        raise NumericError("no conflicting cell found for inserted point", {"point": i})

    def insert(self, i: int):
        seed = self._seed_cell(i)
        bad = {seed}
        good = set()
        stack = [seed]
        while stack:
            t = stack.pop()
            for face in _faces_of(self.cells[t]):
                for u in self.faces.get(face, ()):
                    if u == t or u in bad or u in good:
                        continue
                    if self._conflict(u, i):
                        bad.add(u)
                        stack.append(u)
                    else:
                        good.add(u)
        boundary = []
        for t in bad:
            for face in _faces_of(self.cells[t]):
                if not any(u != t and u in bad for u in self.faces[face]):
                    boundary.append(face)
        for t in bad:
            self._remove(t)
        for face in boundary:
            self._add(face + (i,))

    def run(self) -> np.ndarray:
        for i in range(self.n):
            self.insert(i)
        live = [c for k, c in enumerate(self.cells) if self.alive[k] and c[3] < self.n]
        return np.array(live, dtype=np.int64).reshape(-1, 4)


def _faces_of(cell) -> List[Tuple[int, int, int]]:
    a, b, c, d = cell
    return [(b, c, d), (a, c, d), (a, b, d), (a, b, c)]


def _check_general_position(net: NetworkRealization):
    if net.n < 5:
        raise ParameterError(f"Delaunay tetrahedralization needs at least 5 points, got {net.n}")
    centered = net.coords - net.coords.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[0] == 0 or sv[2] <= 1e-12 * sv[0]:
        raise DegeneracyError("all points are coplanar or collinear")


def _hull_volume(coords: np.ndarray) -> float:
    try:
        return float(ConvexHull(coords).volume)
    except QhullError as e:
        raise DegeneracyError(f"convex hull failed: {e}") from e


def _drop_degenerate(net: NetworkRealization, simplices: np.ndarray) -> np.ndarray:
    if len(simplices) == 0:
        return simplices
    vols = _volumes(net.coords, simplices)
    return simplices[vols >= DEGENERACY_TOL * net.radius_m ** 3]


def delaunay_tetrahedralize(net: NetworkRealization, backend: str = "bowyer-watson",
                            log: Optional[LogCb] = None) -> Tetrahedralization:
    """Delaunay complex of ``net``; canonical (sorted) output for either backend."""
    if backend not in BACKENDS:
        raise ParameterError(f"unknown Delaunay backend {backend!r}, expected one of {BACKENDS}")
    _check_general_position(net)
    hull = _hull_volume(net.coords)

    if backend == "qhull":
        tri = Delaunay(net.coords)
        simplices = _drop_degenerate(net, tri.simplices)
        return Tetrahedralization(net, simplices, backend)

    rel_err = float("inf")
    for attempt, scale in enumerate(SUPER_SCALES):
        simplices = _drop_degenerate(net, _BowyerWatson(net.coords, scale).run())
        total = float(_volumes(net.coords, simplices).sum())
        rel_err = abs(total - hull) / hull
        if rel_err <= VOLUME_RTOL:
            return Tetrahedralization(net, simplices, backend)
        if attempt + 1 < len(SUPER_SCALES):
            safe_log(log, f"hull cells missing (volume mismatch {rel_err:.2e}); "
                          f"enlarging super-tetrahedron to {SUPER_SCALES[attempt + 1]:g}", "warning")
    raise NumericError("Bowyer-Watson did not cover the convex hull",
                       {"relative_volume_error": rel_err, "points": net.n})


# =========================================
# Queries
# =========================================

def circumsphere(t: Tetrahedron, net: NetworkRealization) -> Circumsphere:
    ids = np.array(t.vertex_ids)
    vol = float(_volumes(net.coords, ids[None, :])[0])
    if vol < DEGENERACY_TOL * net.radius_m ** 3:
        raise DegeneracyError(f"tetrahedron {t.vertex_ids} is degenerate (volume {vol:.3e})")
    centers, radii = _circumspheres(net.coords, ids[None, :])
    return Circumsphere(Point3.of(centers[0]), float(radii[0]))


def circumspheres(tess: Tetrahedralization) -> Tuple[np.ndarray, np.ndarray]:
    return tess.circumcenters, tess.circumradii


def tetrahedron_volumes(tess: Tetrahedralization) -> np.ndarray:
    return tess.volumes


def locate_tetrahedron(tess: Tetrahedralization, p, tol: float = 1e-10) -> Optional[Tetrahedron]:
    """Cell containing ``p`` (lowest canonical index on shared faces), None outside the hull."""
    if len(tess) == 0:
        return None
    bary = tess.barycentric(p)
    hits = np.flatnonzero(np.all(bary >= -tol, axis=1))
    if len(hits) == 0:
        return None
    return tess.tetrahedra[int(hits[0])]


def k_nearest(net: NetworkRealization, p, k: int) -> List[Tuple[int, float]]:
    if int(k) != k or k < 1 or k > net.n:
        raise ParameterError(f"k must be in [1, {net.n}], got {k}")
    d = np.linalg.norm(net.coords - np.asarray(p, dtype=float).reshape(3), axis=1)
    idx = np.argsort(d, kind="stable")[: int(k)]
    return [(int(i), float(d[i])) for i in idx]


def mean_cell_volume(tess: Tetrahedralization) -> float:
    if len(tess) == 0:
        raise ParameterError("empty tessellation has no mean cell volume")
    return float(tess.volumes.mean())


def interior_cell_volumes(tess: Tetrahedralization, inner_radius: float) -> np.ndarray:
    """Volumes of the cells whose circumcenter lies within ``inner_radius`` of the origin.

    Cells picked by circumcenter are the typical cells of the point process; near the
    ball surface the hull is thinner than the ball, so the hull-wide mean runs low.
    """
    if not 0.0 < inner_radius <= tess.source.radius_m:
        raise ParameterError(f"inner radius must be in (0, R], got {inner_radius}")
    if len(tess) == 0:
        return np.zeros(0)
    inside = np.linalg.norm(tess.circumcenters, axis=1) <= inner_radius
    return tess.volumes[inside]


def expected_cell_volume(n: int, radius: float) -> float:
    """Mean Delaunay cell volume 35 R^3 / (18 pi N), the bulk value away from the boundary."""
    return 35.0 * radius ** 3 / (18.0 * math.pi * n)


def expected_voronoi_cell_volume(n: int, radius: float) -> float:
    return 4.0 * math.pi * radius ** 3 / (3.0 * n)


# =========================================
# Audits
# =========================================

@dataclass(frozen=True)
class CircumsphereViolation:
    cell: int
    point: int
    depth: float  # (radius - distance) / radius


def audit_empty_circumsphere(tess: Tetrahedralization, rel_tol: float = 1e-9,
                             block: int = 256) -> List[CircumsphereViolation]:
    coords = tess.source.coords
    centers, radii = tess.circumcenters, tess.circumradii
    found: List[CircumsphereViolation] = []
    for start in range(0, len(tess), block):
        stop = min(start + block, len(tess))
        d = np.linalg.norm(coords[None, :, :] - centers[start:stop, None, :], axis=2)
        inside = d < radii[start:stop, None] * (1.0 - rel_tol)
        rows = np.arange(stop - start)[:, None]
        inside[rows, tess.simplices[start:stop]] = False
        for ci, pi in zip(*np.nonzero(inside)):
            r = radii[start + ci]
            found.append(CircumsphereViolation(int(start + ci), int(pi), float((r - d[ci, pi]) / r)))
    return found


def audit_volume_conservation(tess: Tetrahedralization) -> float:
    hull = _hull_volume(tess.source.coords)
    return abs(float(tess.volumes.sum()) - hull) / hull


def audit_face_sharing(tess: Tetrahedralization) -> int:
    """Number of faces claimed by more than two cells (0 for a valid complex)."""
    return sum(1 for owners in tess.adjacency.values() if len(owners) > 2)
