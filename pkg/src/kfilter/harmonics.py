"""Real spherical harmonics and ``r = |Y_l^m|`` surface meshes.

Convention: real harmonics with the Condon-Shortley phase, unit L2 norm on
the sphere,

    Y_l^m  = sqrt(2) N_l^m P_l^m(cos t) cos(m p)        m > 0
    Y_l^0  = N_l^0 P_l(cos t)
    Y_l^-m = sqrt(2) N_l^m P_l^m(cos t) sin(m p)        m > 0

with ``N_l^m = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!)``.  Mesh radius is |Y|; the
signed value is kept as a per-vertex scalar.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

RADIUS_MODE = "abs"
DEFAULT_RESOLUTION = (64, 128)
FIGURE_HARMONICS = ((3, 2), (7, 1), (4, 2), (5, 4), (3, 0))


def _check_lm(l: int, m: int):
    if l < 0 or abs(m) > l or int(l) != l or int(m) != m:
        raise ValueError(f"invalid harmonic indices (l={l}, m={m})")


def assoc_legendre(l: int, m: int, x) -> np.ndarray:
    """P_l^m(x), m >= 0, Condon-Shortley phase, by upward recurrence in l."""
    x = np.asarray(x, dtype=float)
    somx2 = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    pmm = np.ones_like(x)
    fact = 1.0
    for _ in range(m):
        pmm = -pmm * fact * somx2
        fact += 2.0
    if l == m:
        return pmm
    pmm1 = x * (2 * m + 1) * pmm
    for ll in range(m + 2, l + 1):
        pmm, pmm1 = pmm1, ((2 * ll - 1) * x * pmm1 - (ll + m - 1) * pmm) / (ll - m)
    return pmm1


def norm_factor(l: int, m: int) -> float:
    m = abs(m)
    return math.sqrt((2 * l + 1) / (4 * math.pi) * math.exp(math.lgamma(l - m + 1) - math.lgamma(l + m + 1)))


def eval_Ylm(l: int, m: int, theta, phi):
    """Real orthonormal spherical harmonic; vectorized over theta and phi."""
    _check_lm(l, m)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    p = norm_factor(l, m) * assoc_legendre(l, abs(m), np.cos(theta))
    if m > 0:
        out = math.sqrt(2) * p * np.cos(m * phi)
    elif m < 0:
        out = math.sqrt(2) * p * np.sin(-m * phi)
    else:
        out = p * np.ones_like(phi)
    return out if np.ndim(out) else float(out)


def harmonic_index(l: int, m: int) -> int:
    return l * l + l + m


def quadrature_grid(n_theta: int = 64, n_phi: int = 128):
    """Gauss-Legendre in cos(theta) times trapezoid in phi: (theta, phi, weight)."""
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    t, p = np.meshgrid(np.arccos(x), phi, indexing="ij")
    w = np.outer(wx, np.full(n_phi, 2 * np.pi / n_phi))
    return t.ravel(), p.ravel(), w.ravel()


def inner_product(l1, m1, l2, m2, n_theta: int = 64, n_phi: int = 128) -> float:
    t, p, w = quadrature_grid(n_theta, n_phi)
    return float(np.sum(w * eval_Ylm(l1, m1, t, p) * eval_Ylm(l2, m2, t, p)))


def orthonormality_matrix(l_max: int, n_theta: int = 64, n_phi: int = 128) -> np.ndarray:
    """Gram matrix of all Y_l^m with l <= l_max, ordered by ``harmonic_index``."""
    if not 0 <= l_max <= 10:
        raise ValueError("l_max must lie in 0..10")
    t, p, w = quadrature_grid(n_theta, n_phi)
    rows = np.array([eval_Ylm(l, m, t, p) for l in range(l_max + 1) for m in range(-l, l + 1)])
    return (rows * w) @ rows.T


@dataclass(frozen=True)
class HarmonicSpec:
    l: int
    m: int
    resolution: tuple[int, int] = DEFAULT_RESOLUTION

    def __post_init__(self):
        _check_lm(self.l, self.m)
        nt, nph = self.resolution
        if nt < 8 or nph < 8:
            raise ValueError("resolution must be at least (8, 8)")

    @property
    def filename(self) -> str:
        return f"Y_{self.l}_{self.m}.obj"


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    scalar: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle index out of range")


def sphere_grid(n_theta: int, n_phi: int):
    """Vertex angles of a UV sphere with welded poles, plus its triangles.

    Rings i = 1..n_theta-2 sit at theta = pi i / (n_theta - 1); each pole is a
    single vertex, so the vertex count is (n_theta - 2) n_phi + 2.
    """
    rings = np.pi * np.arange(1, n_theta - 1) / (n_theta - 1)
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    t = np.concatenate([[0.0], np.repeat(rings, n_phi), [np.pi]])
    p = np.concatenate([[0.0], np.tile(phis, len(rings)), [0.0]])
    south = len(t) - 1

    def vid(ring, j):
        return 1 + ring * n_phi + (j % n_phi)

    tris = []
    for j in range(n_phi):
        tris.append((0, vid(0, j), vid(0, j + 1)))
    for r in range(len(rings) - 1):
        for j in range(n_phi):
            a, b = vid(r, j), vid(r, j + 1)
            c, d = vid(r + 1, j), vid(r + 1, j + 1)
            tris.append((a, c, b))
            tris.append((b, c, d))
    last = len(rings) - 1
    for j in range(n_phi):
        tris.append((south, vid(last, j + 1), vid(last, j)))
    return t, p, np.array(tris, dtype=np.int64)


def mesh_harmonic(spec: HarmonicSpec) -> SurfaceMesh:
    nt, nph = spec.resolution
    t, p, tris = sphere_grid(nt, nph)
    y = np.asarray(eval_Ylm(spec.l, spec.m, t, p), dtype=float)
    r = np.abs(y)
    verts = np.column_stack([r * np.sin(t) * np.cos(p), r * np.sin(t) * np.sin(p), r * np.cos(t)])
    meta = {"l": spec.l, "m": spec.m, "resolution": list(spec.resolution), "radius": RADIUS_MODE,
            "convention": "real, Condon-Shortley, orthonormal"}
    return SurfaceMesh(verts, tris, y, t, p, meta)


def meridian_scalar(mesh: SurfaceMesh, phi_index: int = 0) -> np.ndarray:
    """Signed values from north pole to south pole along one meridian."""
    n_phi = mesh.meta["resolution"][1]
    ring_vals = mesh.scalar[1:-1].reshape(-1, n_phi)[:, phi_index]
    return np.concatenate([[mesh.scalar[0]], ring_vals, [mesh.scalar[-1]]])


def equator_ring(mesh: SurfaceMesh) -> np.ndarray:
    """Signed values on the ring nearest the equator, excluding an exact
    equator ring (odd-parity harmonics vanish there identically)."""
    n_phi = mesh.meta["resolution"][1]
    rings = mesh.theta[1:-1].reshape(-1, n_phi)[:, 0]
    off = np.abs(rings - np.pi / 2)
    off[off < 1e-12] = np.inf
    i = int(np.argmin(off))
    return mesh.scalar[1:-1].reshape(-1, n_phi)[i]


def sign_changes(values, cyclic: bool = False, rel_tol: float = 1e-9) -> int:
    """Number of sign changes, skipping values that are numerically zero."""
    v = np.asarray(values, dtype=float)
    scale = np.abs(v).max() if v.size else 0.0
    s = np.sign(v[np.abs(v) > rel_tol * scale])
    if s.size < 2:
        return 0
    if cyclic:
        s = np.append(s, s[0])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def to_obj(mesh: SurfaceMesh) -> str:
    buf = io.StringIO()
    for k, v in sorted(mesh.meta.items()):
        buf.write(f"# {k}: {v}\n")
    for x, y, z in mesh.vertices:
        buf.write(f"v {x:.10g} {y:.10g} {z:.10g}\n")
    for a, b, c in mesh.triangles + 1:
        buf.write(f"f {a} {b} {c}\n")
    return buf.getvalue()


def parse_obj(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and zero-based triangles of a plain triangle OBJ."""
    verts, faces = [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            if len(parts) != 4:
                raise ValueError(f"only triangles are supported: {line!r}")
            faces.append([int(x.split("/")[0]) - 1 for x in parts[1:]])
    v = np.array(verts, dtype=float).reshape(-1, 3)
    f = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        raise ValueError("face index out of range")
    return v, f


def to_csv(mesh: SurfaceMesh, header: str | None = None) -> str:
    """Per-vertex ``theta,phi,Y``; ``header`` lines are written as '#' comments."""
    buf = io.StringIO()
    if header:
        buf.write("".join(f"# {line}\n" for line in header.splitlines()))
    buf.write("theta,phi,Y\n")
    for t, p, y in zip(mesh.theta, mesh.phi, mesh.scalar):
        buf.write(f"{t:.12g},{p:.12g},{y:.12g}\n")
    return buf.getvalue()


def is_watertight(triangles: np.ndarray) -> bool:
    """Every undirected edge is shared by exactly two triangles."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    return bool(np.all(counts == 2))
