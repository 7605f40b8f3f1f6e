"""Least-squares B-splines through noisy paths, tube checks and complexity reduction.

A high-complexity sampled path is replaced by a smooth spline of degree >= 4
that stays inside a tube of radius epsilon around the samples; quantizing the
spline instead of the raw samples gives a much shorter description.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .complexity import DEFAULT_ESTIMATOR, estimate_word
from .motion import Polyline, Quantizer, quantize_path

MIN_DEGREE = 4
DENSE_FACTOR = 16
_GOLDEN = (math.sqrt(5) - 1) / 2


class SplineFitError(ValueError):
    pass


def clamped_knots(n_ctrl: int, degree: int) -> np.ndarray:
    inner = np.linspace(0.0, 1.0, n_ctrl - degree + 1)
    return np.concatenate([np.zeros(degree), inner, np.ones(degree)])


def periodic_knots(n_ctrl: int, degree: int) -> np.ndarray:
    """Uniform knots for ``n_ctrl`` distinct control points wrapped by ``degree``."""
    return (np.arange(n_ctrl + 2 * degree + 1) - degree) / n_ctrl


def basis_functions(knots: np.ndarray, degree: int, u) -> np.ndarray:
    """Cox-de Boor: matrix ``N[s, i] = N_{i,degree}(u_s)``.

    Parameters at the last knot of the valid domain use the final non-empty
    span, so clamped curves interpolate their end control point.
    """
    t = np.asarray(knots, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    hi = t[len(t) - degree - 1]
    n = ((t[:-1] <= u[:, None]) & (u[:, None] < t[1:])).astype(float)
    at_end = u >= hi
    if at_end.any():
        last = np.nonzero(t[:-1] < hi)[0][-1]
        n[at_end] = 0.0
        n[at_end, last] = 1.0
    for k in range(1, degree + 1):
        d1 = t[k:-1] - t[: -k - 1]
        d2 = t[k + 1:] - t[1:-k]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(d1 > 0, (u[:, None] - t[: -k - 1]) / d1, 0.0)
            b = np.where(d2 > 0, (t[k + 1:] - u[:, None]) / d2, 0.0)
        n = a * n[:, :-1] + b * n[:, 1:]
    return n


@dataclass(frozen=True, eq=False)
class BSplineCurve:
    degree: int
    knots: np.ndarray
    control_points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        k = np.array(self.knots, dtype=float)
        c = np.array(self.control_points, dtype=float)
        if c.ndim != 2:
            raise ValueError("control points must be an (n, d) array")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if np.any(np.diff(k) < 0):
            raise ValueError("knots must be non-decreasing")
        n_basis = len(c) + (self.degree if self.closed else 0)
        if len(k) != n_basis + self.degree + 1:
            raise ValueError(f"expected {n_basis + self.degree + 1} knots, got {len(k)}")
        k.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "control_points", c)

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    @property
    def wrapped_control_points(self) -> np.ndarray:
        c = self.control_points
        return np.vstack([c, c[: self.degree]]) if self.closed else c

    def basis(self, u) -> np.ndarray:
        """Basis matrix over the distinct control points (wrap columns folded)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.closed:
            u = np.mod(u, 1.0)
            n = basis_functions(self.knots, self.degree, u)
            c = len(self.control_points)
            folded = n[:, :c].copy()
            folded[:, : self.degree] += n[:, c:]
            return folded
        return basis_functions(self.knots, self.degree, np.clip(u, 0.0, 1.0))

    def __call__(self, u) -> np.ndarray:
        return self.basis(u) @ self.control_points

    def sample(self, count: int) -> Polyline:
        """``count`` points at uniform parameters; closed curves repeat the start."""
        u = np.linspace(0.0, 1.0, count)
        pts = self(u)
        if self.closed:
            pts[-1] = pts[0]
        return Polyline(pts, closed=self.closed)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "knots": self.knots.tolist(),
            "control_points": self.control_points.tolist(),
            "closed": self.closed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BSplineCurve":
        return cls(int(d["degree"]), np.asarray(d["knots"]), np.asarray(d["control_points"]), bool(d["closed"]))


def _loop_points(p: Polyline) -> np.ndarray:
    """Points of a closed polyline without the repeated closing sample."""
    pts = p.points
    if len(pts) > 1 and np.linalg.norm(pts[-1] - pts[0]) <= 1e-9:
        pts = pts[:-1]
    return pts


def chord_params(points: np.ndarray, closed: bool = False) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    if closed:
        seg = np.append(seg, np.linalg.norm(points[0] - points[-1]))
    total = seg.sum()
    if total <= 0:
        raise SplineFitError("degenerate input: all points coincide")
    u = np.concatenate([[0.0], np.cumsum(seg)]) / total
    return u[:-1] if closed else u


def fit_bspline(p: Polyline, degree: int = MIN_DEGREE, n_ctrl: int = 16,
                params=None) -> BSplineCurve:
    """Least-squares B-spline with chord-length parameters and uniform knots.

    Closed polylines give periodic curves.  ``params`` overrides the
    chord-length parameters (one per fitted point).
    """
    if degree < MIN_DEGREE:
        raise SplineFitError(f"degree must be >= {MIN_DEGREE}")
    if n_ctrl < degree + 1:
        raise SplineFitError(f"n_ctrl must be >= degree + 1 = {degree + 1}")
    pts = _loop_points(p) if p.closed else p.points
    if len(pts) < n_ctrl:
        raise SplineFitError(f"under-determined: {len(pts)} points for {n_ctrl} control points")
    if np.ptp(pts, axis=0).max() == 0:
        raise SplineFitError("degenerate input: all points coincide")
    u = chord_params(pts, p.closed) if params is None else np.asarray(params, dtype=float)
    if len(u) != len(pts):
        raise SplineFitError("need one parameter per point")
    knots = periodic_knots(n_ctrl, degree) if p.closed else clamped_knots(n_ctrl, degree)
    shell = BSplineCurve(degree, knots, np.zeros((n_ctrl, p.dim)), p.closed)
    b = shell.basis(u)
    ctrl, _, rank, _ = np.linalg.lstsq(b, pts, rcond=None)
    if rank < n_ctrl:
        raise SplineFitError(f"under-determined: basis rank {rank} < {n_ctrl}")
    return replace(shell, control_points=ctrl)


@dataclass(frozen=True)
class TubeReport:
    epsilon: float
    max_deviation: float
    contained: bool
    complexity_original_bits: int | None = None
    complexity_spline_bits: int | None = None
    estimator: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float | None:
        if self.complexity_original_bits is None or self.complexity_spline_bits is None:
            return None
        return self.complexity_spline_bits / self.complexity_original_bits

    def to_dict(self) -> dict:
        d = {
            "epsilon": self.epsilon,
            "max_deviation": self.max_deviation,
            "contained": self.contained,
            "complexity_original_bits": self.complexity_original_bits,
            "complexity_spline_bits": self.complexity_spline_bits,
            "ratio": self.ratio,
            "estimator": self.estimator,
        }
        d.update(self.extra)
        return d


def distances_to_curve(c: BSplineCurve, points: np.ndarray, iters: int = 40) -> np.ndarray:
    """Distance from each point to the curve.

    Nearest of ``DENSE_FACTOR`` x len(points) curve samples, then a
    golden-section search on the two neighbouring sample intervals.
    """
    points = np.asarray(points, dtype=float)
    m = max(DENSE_FACTOR * len(points), 64)
    u = np.linspace(0.0, 1.0, m + 1)
    dense = c(u)
    d0, j = cKDTree(dense).query(points)
    h = 1.0 / m
    a, b = u[j] - h, u[j] + h
    if not c.closed:
        a, b = np.clip(a, 0, 1), np.clip(b, 0, 1)

    def dist(s):
        return np.linalg.norm(c(s) - points, axis=1)

    x1, x2 = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    f1, f2 = dist(x1), dist(x2)
    for _ in range(iters):
        left = f1 < f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        x1n = b - _GOLDEN * (b - a)
        x2n = a + _GOLDEN * (b - a)
        x1, x2 = x1n, x2n
        f1, f2 = dist(x1), dist(x2)
    return np.minimum(d0, np.minimum(f1, f2))


def tube_check(c: BSplineCurve, p: Polyline, epsilon: float) -> TubeReport:
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    dev = float(distances_to_curve(c, p.points).max())
    return TubeReport(float(epsilon), dev, dev <= epsilon)


def complexity_reduction(original: Polyline, spline: BSplineCurve, q: Quantizer,
                         e: str = DEFAULT_ESTIMATOR, epsilon: float | None = None) -> TubeReport:
    """Estimates of the quantized original and of a same-count spline sample.

    With ``epsilon`` the geometric tube check is filled in as well.
    """
    if original.dim != len(q.anchor) or spline.dim != len(q.anchor):
        raise ValueError("quantizer dimension does not match the path")
    w_orig = quantize_path(original, q)
    w_spl = quantize_path(spline.sample(len(original)), q)
    k0 = estimate_word(w_orig, e).bits
    k1 = estimate_word(w_spl, e).bits
    extra = {"tokens_original": len(w_orig), "tokens_spline": len(w_spl)}
    if epsilon is None:
        return TubeReport(math.nan, math.nan, False, k0, k1, e, extra)
    geo = tube_check(spline, original, epsilon)
    return replace(geo, complexity_original_bits=k0, complexity_spline_bits=k1, estimator=e, extra=extra)
