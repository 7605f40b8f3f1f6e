"""Sampled motions, greedy quantization into generator words, and noise.

Points are reached from an anchor vector by prefix products of token
matrices: point k of ``reconstruct(w)`` is ``S @ M(w_1) @ ... @ M(w_k) @ a``
with ``S`` the quantizer's seed frame and ``a`` its anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .words import Alphabet, AlphabetError, Word

MAX_BURST = 8


@dataclass(frozen=True, eq=False)
class Polyline:
    points: np.ndarray
    times: np.ndarray | None = None
    closed: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or len(pts) < 1:
            raise ValueError("polyline needs at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.times is not None:
            t = np.array(self.times, dtype=float)
            if t.shape != (len(pts),):
                raise ValueError("times must match the point count")
            if len(t) > 1 and np.any(np.diff(t) <= 0):
                raise ValueError("times must be strictly increasing")
            t.setflags(write=False)
            object.__setattr__(self, "times", t)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def arc_length(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def endpoint_gap(self) -> float:
        return float(np.linalg.norm(self.points[-1] - self.points[0]))

    def __eq__(self, other):
        if not isinstance(other, Polyline):
            return NotImplemented
        same_t = (self.times is None and other.times is None) or (
            self.times is not None and other.times is not None
            and np.array_equal(self.times, other.times))
        return self.closed == other.closed and same_t and np.array_equal(self.points, other.points)


@dataclass(frozen=True, eq=False)
class Quantizer:
    alphabet: Alphabet
    anchor: np.ndarray
    seed_state: np.ndarray | None = None
    max_burst: int = MAX_BURST

    def __post_init__(self):
        if not self.alphabet.realized:
            raise AlphabetError(f"alphabet {self.alphabet.name!r} has no matrix realization")
        n = self.alphabet.dim
        a = np.array(self.anchor, dtype=float)
        if a.shape != (n,):
            raise ValueError(f"anchor must have dimension {n}")
        s = np.eye(n) if self.seed_state is None else np.array(self.seed_state, dtype=float)
        if s.shape != (n, n):
            raise ValueError("seed_state must be square with the alphabet's dimension")
        if np.abs(s @ s.T - np.eye(n)).max() > 1e-9:
            raise ValueError("seed_state must be orthogonal")
        if self.max_burst < 1:
            raise ValueError("max_burst must be >= 1")
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "seed_state", s)

    @property
    def start(self) -> np.ndarray:
        return self.seed_state @ self.anchor


def rotation_x(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rotation_y(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rotation_z(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def build_so3_alphabet(theta: float = 2 * math.pi / 100) -> Alphabet:
    """Rx, Ry, Rz by ``theta`` (ids 0-2) and their inverses (ids 3-5)."""
    if not 0 < theta < math.pi:
        raise ValueError(f"theta must lie in (0, pi), got {theta}")
    gens = {"Rx": rotation_x(theta), "Ry": rotation_y(theta), "Rz": rotation_z(theta)}
    alpha = Alphabet.from_generators(f"so3[theta={theta!r}]", gens)
    # exact transposes instead of numerical inverses
    mats = list(alpha.matrices[:3]) + [m.T for m in alpha.matrices[:3]]
    return Alphabet(alpha.name, alpha.tokens, tuple(mats))


# unit vector moved by all three generators and far from the Rx Ry Rz axis
DEFAULT_ANCHOR = np.array([0.0, 0.6, 0.8])


def so3_quantizer(theta: float = 2 * math.pi / 100, anchor=None) -> Quantizer:
    return Quantizer(build_so3_alphabet(theta), DEFAULT_ANCHOR if anchor is None else anchor)


def theta_of(alphabet: Alphabet) -> float:
    """Rotation angle of the first generator (assumes a rotation alphabet)."""
    m = alphabet.matrices[0]
    return float(math.acos(max(-1.0, min(1.0, (np.trace(m) - (m.shape[0] - 2)) / 2))))


def example_loopword(alphabet: Alphabet, n: int = 100) -> Word:
    """``Rx^n``; a closed loop when ``n * theta`` is a multiple of 2 pi."""
    return alphabet.word(["Rx"] * n)


def example_pathword(alphabet: Alphabet, n: int = 15) -> Word:
    """``n`` concatenated factors ``(Rx Ry Rz)^(2n)``."""
    factor = alphabet.word(["Rx", "Ry", "Rz"] * (2 * n))
    return Word(factor.tokens * n, alphabet)


def reconstruct(w: Word, q: Quantizer) -> Polyline:
    """Inverse quantization: the anchor carried by every prefix product."""
    if w.alphabet != q.alphabet:
        raise AlphabetError("word and quantizer use different alphabets")
    mats = q.alphabet.matrices
    frame = q.seed_state.copy()
    pts = np.empty((len(w) + 1, len(q.anchor)))
    pts[0] = frame @ q.anchor
    for k, t in enumerate(w.tokens, 1):
        frame = frame @ mats[t]
        pts[k] = frame @ q.anchor
    closed = len(w) > 0 and np.linalg.norm(pts[-1] - pts[0]) <= 1e-9
    return Polyline(pts, closed=bool(closed))


def resample_arc_length(p: Polyline, count: int) -> Polyline:
    """``count`` points spaced uniformly by arc length along ``p``."""
    s = p.arc_length()
    if s[-1] == 0:
        pts = np.repeat(p.points[:1], count, axis=0)
    else:
        targets = np.linspace(0.0, s[-1], count)
        pts = np.column_stack([np.interp(targets, s, p.points[:, j]) for j in range(p.dim)])
    return Polyline(pts, closed=p.closed)


def quantize_path(p: Polyline, q: Quantizer, n: int | None = None) -> Word:
    """Greedy quantization of ``p`` into a word over ``q.alphabet``.

    For each of the ``n`` targets after the first sample, the token whose
    image lies closest to the target is appended; further tokens follow
    while they strictly reduce the distance, up to ``q.max_burst`` per step.
    """
    return quantize_steps(p, q, n)[0]


def quantize_steps(p: Polyline, q: Quantizer, n: int | None = None) -> tuple[Word, list[int]]:
    """``quantize_path`` plus the word length reached after each sample step."""
    if p.dim != len(q.anchor):
        raise ValueError(f"polyline dimension {p.dim} does not match quantizer {len(q.anchor)}")
    if n is None:
        n = len(p) - 1
    if len(p) == 1 or n == 0:
        return q.alphabet.empty(), []
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(p) != n + 1:
        p = resample_arc_length(p, n + 1)
    mats = np.stack(q.alphabet.matrices)  # (T, d, d)
    moved_anchor = mats @ q.anchor        # image of the anchor under each token
    frame = q.seed_state.copy()
    out: list[int] = []
    ends: list[int] = []
    for target in p.points[1:]:
        cand = moved_anchor @ frame.T     # frame @ M_t @ a for every t
        d = np.linalg.norm(cand - target, axis=1)
        best = int(np.argmin(d))
        out.append(best)
        frame = frame @ mats[best]
        cur = d[best]
        for _ in range(q.max_burst - 1):
            cand = moved_anchor @ frame.T
            d = np.linalg.norm(cand - target, axis=1)
            best = int(np.argmin(d))
            if not d[best] < cur - 1e-15:
                break
            out.append(best)
            frame = frame @ mats[best]
            cur = d[best]
        ends.append(len(out))
    return Word(tuple(out), q.alphabet), ends


# -- fluctuation operator E ---------------------------------------------------

SUBSTITUTION = "token_substitution"
JITTER = "coordinate_jitter"


@dataclass(frozen=True)
class NoiseSpec:
    model: str
    amplitude: float
    seed: int = 0

    def __post_init__(self):
        if self.model not in (SUBSTITUTION, JITTER):
            raise ValueError(f"unknown noise model {self.model!r}")
        if not self.amplitude >= 0 or not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be a finite non-negative number")
        if self.model == SUBSTITUTION and self.amplitude > 1:
            raise ValueError("substitution probability must lie in [0, 1]")


def apply_E_word(w: Word, ns: NoiseSpec) -> Word:
    """Replace each token, with probability ``amplitude``, by a uniformly
    chosen different token."""
    if ns.model != SUBSTITUTION:
        raise ValueError(f"apply_E_word needs the {SUBSTITUTION} model, got {ns.model!r}")
    k = len(w.alphabet)
    if k < 2 or len(w) == 0:
        return w
    rng = np.random.default_rng(ns.seed)
    tokens = np.array(w.tokens, dtype=np.int64)
    hit = rng.random(len(tokens)) < ns.amplitude
    shift = rng.integers(1, k, size=len(tokens))
    tokens = np.where(hit, (tokens + shift) % k, tokens)
    return Word(tuple(tokens.tolist()), w.alphabet)


def apply_E_path(p: Polyline, ns: NoiseSpec) -> Polyline:
    if ns.model != JITTER:
        raise ValueError(f"apply_E_path needs the {JITTER} model, got {ns.model!r}")
    rng = np.random.default_rng(ns.seed)
    noise = rng.normal(0.0, ns.amplitude, size=p.points.shape) if ns.amplitude > 0 else 0.0
    return Polyline(p.points + noise, p.times, p.closed)


# -- Brownian motion ------------------------------------------------------------

def brownian_path(n: int, dt: float, sigma: float, d: int = 1, seed: int = 0,
                  start=None) -> Polyline:
    """Random walk of ``n`` steps with iid N(0, sigma^2 dt) increments."""
    if n < 2:
        raise ValueError("need n >= 2 steps")
    if not dt > 0 or not sigma >= 0 or d < 1:
        raise ValueError("need dt > 0, sigma >= 0 and d >= 1")
    rng = np.random.default_rng(seed)
    steps = rng.normal(0.0, sigma * math.sqrt(dt), size=(n, d))
    x0 = np.zeros(d) if start is None else np.asarray(start, dtype=float)
    pts = np.vstack([x0, x0 + np.cumsum(steps, axis=0)])
    return Polyline(pts, times=dt * np.arange(n + 1))


def mean_square_velocity(p: Polyline, window: float) -> float:
    """Mean over t of ``|(x(t + window) - x(t)) / window|^2``.

    ``x(t + window)`` is linearly interpolated, which is exact when the
    window is a multiple of a uniform sampling step.
    """
    if p.times is None:
        raise ValueError("polyline has no times")
    t = p.times
    if len(t) < 2:
        raise ValueError("need at least two samples")
    if window < np.min(np.diff(t)) * (1 - 1e-9):
        raise ValueError("window shorter than the sampling step")
    if window > t[-1] - t[0]:
        raise ValueError("window exceeds path duration")
    starts = t[t + window <= t[-1] * (1 + 1e-12) + 1e-12]
    ahead = np.column_stack([np.interp(starts + window, t, p.points[:, j]) for j in range(p.dim)])
    here = p.points[: len(starts)]
    v = (ahead - here) / window
    return float(np.mean(np.sum(v * v, axis=1)))
