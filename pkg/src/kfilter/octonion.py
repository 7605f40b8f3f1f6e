"""Octonions, the 7-dimensional cross product, and G2 generator words.

The multiplication table is read from ``data/octonion_table.csv`` (rows
``i,j,k,sign`` meaning ``e_i e_j = sign e_k``).  It was chosen by
:func:`compatible_tables`: among the 480 alternative sign conventions on
the Fano plane, the ones under which both block-rotation samples
(:func:`g2_generator` kinds A and B) are automorphisms.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from .motion import Polyline, Quantizer, quantize_path
from .words import Alphabet, Word, evaluate

TABLE_FILE = "octonion_table.csv"

# Fano lines of the standard labelling, used to generate every labelling
_FANO_LINES = [(1, 2, 3), (1, 4, 5), (1, 6, 7), (2, 4, 6), (2, 5, 7), (3, 4, 7), (3, 5, 6)]


def table_from_triples(triples: Sequence[tuple[int, int, int]]) -> np.ndarray:
    """Structure tensor ``T`` with ``(xy)_k = sum_ij x_i y_j T[i, j, k]``.

    Each oriented triple (a, b, c) means e_a e_b = e_c (and cyclically).
    """
    t = np.zeros((8, 8, 8))
    t[0, 0, 0] = 1
    for i in range(1, 8):
        t[0, i, i] = t[i, 0, i] = 1
        t[i, i, 0] = -1
    for a, b, c in triples:
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            t[x, y, z] = 1
            t[y, x, z] = -1
    return t


def table_rows(t: np.ndarray) -> list[tuple[int, int, int, int]]:
    rows = []
    for i in range(8):
        for j in range(8):
            (k,) = np.nonzero(t[i, j])[0]
            rows.append((i, j, int(k), int(t[i, j, k])))
    return rows


def table_from_rows(rows) -> np.ndarray:
    t = np.zeros((8, 8, 8))
    seen = set()
    for i, j, k, s in rows:
        i, j, k, s = int(i), int(j), int(k), int(s)
        if s not in (1, -1) or not all(0 <= v < 8 for v in (i, j, k)):
            raise ValueError(f"bad table row {(i, j, k, s)}")
        if (i, j) in seen:
            raise ValueError(f"duplicate table entry for e{i} e{j}")
        seen.add((i, j))
        t[i, j, k] = s
    if len(seen) != 64:
        raise ValueError("table must define all 64 basis products")
    return t


def write_table_csv(t: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "k", "sign"])
    w.writerows(table_rows(t))
    return buf.getvalue()


def read_table_csv(text: str) -> np.ndarray:
    r = csv.DictReader(io.StringIO(text))
    return table_from_rows((row["i"], row["j"], row["k"], row["sign"]) for row in r)


@lru_cache(maxsize=1)
def default_table() -> np.ndarray:
    text = resources.files("kfilter").joinpath("data", TABLE_FILE).read_text()
    t = read_table_csv(text)
    t.setflags(write=False)
    return t


# -- octonion arithmetic -------------------------------------------------------------

def oct_mul(x, y, table: np.ndarray | None = None) -> np.ndarray:
    """Product of octonions given as length-8 coefficient arrays (batched ok)."""
    t = default_table() if table is None else table
    return np.einsum("...i,...j,ijk->...k", np.asarray(x, float), np.asarray(y, float), t)


def imag(x) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[..., 0] = 0.0
    return x


def cross(x, y, table: np.ndarray | None = None) -> np.ndarray:
    """``[x, y] / 2`` on the imaginary parts; the result is purely imaginary."""
    x, y = imag(x), imag(y)
    return 0.5 * (oct_mul(x, y, table) - oct_mul(y, x, table))


def conj(x) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[..., 1:] *= -1
    return x


def basis(i: int) -> np.ndarray:
    e = np.zeros(8)
    e[i] = 1.0
    return e


def embed7(v) -> np.ndarray:
    """Imaginary octonion with coefficients ``v`` on e1..e7."""
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


@dataclass(frozen=True, eq=False)
class Octonion:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (8,):
            raise ValueError("an octonion has 8 coefficients")
        object.__setattr__(self, "coeffs", c)

    def __mul__(self, other: "Octonion") -> "Octonion":
        return Octonion(oct_mul(self.coeffs, other.coeffs))

    def __add__(self, other: "Octonion") -> "Octonion":
        return Octonion(self.coeffs + other.coeffs)

    def __sub__(self, other: "Octonion") -> "Octonion":
        return Octonion(self.coeffs - other.coeffs)

    def __neg__(self):
        return Octonion(-self.coeffs)

    def __eq__(self, other):
        return isinstance(other, Octonion) and np.array_equal(self.coeffs, other.coeffs)

    def conj(self) -> "Octonion":
        return Octonion(conj(self.coeffs))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    @property
    def real(self) -> float:
        return float(self.coeffs[0])

    @classmethod
    def unit(cls, i: int) -> "Octonion":
        return cls(basis(i))


# -- G2 --------------------------------------------------------------------------

def g2_generator(kind: str, angle: float) -> np.ndarray:
    """Block-rotation samples of G2 acting on e1..e7.

    Kind A fixes e1, e6, e7 and turns the (e2, e3) and (e4, e5) planes by
    opposite senses; kind B fixes e1, e2, e3 and turns (e4, e7) and (e5, e6).
    """
    c, s = math.cos(angle), math.sin(angle)
    m = np.eye(7)
    if kind == "A":
        m[1, 1] = m[2, 2] = c
        m[1, 2], m[2, 1] = s, -s
        m[3, 3] = m[4, 4] = c
        m[3, 4], m[4, 3] = -s, s
    elif kind == "B":
        m[3, 3] = m[6, 6] = c
        m[3, 6], m[6, 3] = s, -s
        m[4, 4] = m[5, 5] = c
        m[4, 5], m[5, 4] = s, -s
    else:
        raise ValueError(f"kind must be 'A' or 'B', got {kind!r}")
    return m


def extend8(m: np.ndarray) -> np.ndarray:
    """7x7 action on the imaginary part, extended to 8x8 fixing e0."""
    out = np.eye(8)
    out[1:, 1:] = m
    return out


def automorphism_residual(m: np.ndarray, table: np.ndarray | None = None) -> float:
    """``max_ij |g(e_i e_j) - g(e_i) g(e_j)|`` over imaginary basis pairs."""
    t = default_table() if table is None else table
    m = np.asarray(m, dtype=float)
    if m.shape != (7, 7):
        raise ValueError("expected a 7x7 matrix")
    g = extend8(m)
    lhs = np.einsum("ijk,lk->ijl", t, g)
    rhs = np.einsum("ai,bj,abk->ijk", g, g, t)
    return float(np.abs(lhs - rhs)[1:, 1:].max())


def is_automorphism(m: np.ndarray, tol: float = 1e-9, table: np.ndarray | None = None) -> tuple[bool, float]:
    r = automorphism_residual(m, table)
    return r <= tol, r


class NotAnAutomorphism(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class G2Element:
    matrix: np.ndarray
    tol: float = 1e-8

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        ok, r = is_automorphism(m, self.tol)
        if not ok:
            raise NotAnAutomorphism(f"automorphism residual {r:.3g} exceeds {self.tol:g}")
        if np.abs(m @ m.T - np.eye(7)).max() > self.tol:
            raise NotAnAutomorphism("matrix is not orthogonal")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "G2Element") -> "G2Element":
        return G2Element(self.matrix @ other.matrix)

    def act(self, x) -> np.ndarray:
        """Apply to octonion coefficients (real part fixed)."""
        return np.asarray(x, float) @ extend8(self.matrix).T

    @property
    def residual(self) -> float:
        return automorphism_residual(self.matrix)


# irrational multiples of pi keep both generators of infinite order
DEFAULT_ANGLES = (math.sqrt(2) * math.pi / 4, math.sqrt(3) * math.pi / 4)
# e1 is fixed by both sample generators, so loops are traced from the
# normalised all-ones imaginary vector instead
DEFAULT_G2_ANCHOR = np.ones(7) / math.sqrt(7.0)


def g2_alphabet(x1: float = DEFAULT_ANGLES[0], y1: float = DEFAULT_ANGLES[1]) -> Alphabet:
    """Tokens g1 = A(x1), g2 = B(y1) and their inverses g1^-1, g2^-1."""
    a, b = g2_generator("A", x1), g2_generator("B", y1)
    base = Alphabet.from_generators(f"g2[x1={x1!r},y1={y1!r}]", {"g1": a, "g2": b})
    return Alphabet(base.name, base.tokens, (a, b, a.T, b.T))


def word_to_g2(w: Word) -> G2Element:
    return G2Element(evaluate(w))


def cross_preservation_residual(m: np.ndarray, x, y) -> float:
    """``max |g(x cross y) - g(x) cross g(y)|`` for imaginary x, y (batched)."""
    g = extend8(np.asarray(m, float))
    x, y = imag(x), imag(y)
    lhs = cross(x, y) @ g.T
    rhs = cross(x @ g.T, y @ g.T)
    return float(np.abs(lhs - rhs).max())


class OpenLoop(ValueError):
    pass


def quantize_loop_to_g2(p: Polyline, alphabet: Alphabet | None = None, anchor=None,
                        n: int | None = None) -> Word:
    """Greedy quantization of a closed 7-dimensional loop into a G2 word."""
    if not p.closed:
        raise OpenLoop("polyline is not flagged closed")
    if p.dim != 7:
        raise ValueError("G2 loops live in R^7")
    alphabet = g2_alphabet() if alphabet is None else alphabet
    q = Quantizer(alphabet, DEFAULT_G2_ANCHOR if anchor is None else anchor)
    if np.abs(p.points - p.points[0]).max() <= 1e-12:
        # no motion at all: treat like a single sample
        return alphabet.empty()
    return quantize_path(p, q, n)


# -- empirical freeness and density probes ------------------------------------------

def _levels(alphabet: Alphabet, max_len: int):
    """Matrices of all freely reduced words, grouped by length 1..max_len.

    Yields (length, matrices (N, d, d), token sequences (N, length)).
    """
    gens = np.stack(alphabet.matrices)
    inv = np.array([alphabet.inverse(t) for t in range(len(alphabet))])
    mats = gens.copy()
    words = np.arange(len(alphabet))[:, None]
    for length in range(1, max_len + 1):
        if length > 1:
            new_m, new_w = [], []
            last = words[:, -1]
            for t in range(len(alphabet)):
                keep = last != inv[t]
                new_m.append(mats[keep] @ gens[t])
                new_w.append(np.column_stack([words[keep], np.full(keep.sum(), t)]))
            mats, words = np.concatenate(new_m), np.concatenate(new_w)
        yield length, mats, words


def probe_freeness(alphabet: Alphabet, max_len: int = 8, tol: float = 1e-6) -> dict:
    """Smallest Frobenius distance to the identity over reduced words.

    A distance at or below ``tol`` is reported as a relation.  Finding none
    is evidence of freeness up to ``max_len``, not a proof.
    """
    if max_len > 10:
        raise ValueError("max_len above 10 is not desk-scale")
    if not alphabet.inverse_closed:
        raise ValueError("freeness probe needs an inverse-closed alphabet")
    eye = np.eye(alphabet.dim)
    per_length = []
    best = (math.inf, None)
    checked = 0
    for length, mats, words in _levels(alphabet, max_len):
        d = np.sqrt(((mats - eye) ** 2).sum(axis=(1, 2)))
        i = int(np.argmin(d))
        per_length.append(float(d[i]))
        checked += len(d)
        if d[i] < best[0]:
            best = (float(d[i]), words[i])
    word = " ".join(alphabet.label(int(t)) for t in best[1]) if best[1] is not None else ""
    return {
        "alphabet": alphabet.name,
        "max_len": max_len,
        "tol": tol,
        "words_checked": checked,
        "min_distance_per_length": per_length,
        "min_distance": best[0],
        "closest_word": word,
        "relation_found": best[0] <= tol,
    }


def _balls(alphabet: Alphabet, radius: int) -> list[np.ndarray]:
    """``balls[k]``: matrices of all reduced words of length <= k (k = 0..radius)."""
    eye = np.eye(alphabet.dim)[None]
    balls = [eye]
    acc = [eye]
    for _, mats, _ in _levels(alphabet, radius):
        acc.append(mats)
        balls.append(np.concatenate(acc))
    return balls


def probe_density(alphabet: Alphabet, targets: Sequence[np.ndarray], max_len: int = 12) -> dict:
    """Smallest Frobenius distance from each target to words of length <= L.

    Every word of length <= L factors as ``u v`` with ``|u| <= ceil(L/2)`` and
    ``|v| <= floor(L/2)``, and ``|u v - T| = |v - u^T T|`` for orthogonal u,
    so the search pairs two half-length balls.
    """
    for t in targets:
        ok, r = is_automorphism(t, 1e-8)
        if not ok:
            raise NotAnAutomorphism(f"target residual {r:.3g}")
    balls = _balls(alphabet, (max_len + 1) // 2)
    dim = alphabet.dim
    rows = []
    for t in targets:
        t = np.asarray(t, float)
        per_l = []
        for length in range(1, max_len + 1):
            a, b = (length + 1) // 2, length // 2
            u, v = balls[a], balls[b]
            x = np.einsum("nji,jk->nik", u, t).reshape(len(u), -1)  # u^T T
            y = v.reshape(len(v), -1)
            score = x @ y.T  # |v - u^T T|^2 = 2 dim - 2 score
            i, j = np.unravel_index(int(np.argmax(score)), score.shape)
            per_l.append(float(np.linalg.norm(u[i] @ v[j] - t)))
        # exact recomputation can wobble at the 1e-16 level; keep the nesting monotone
        per_l = list(np.minimum.accumulate(per_l))
        rows.append(per_l)
    return {
        "alphabet": alphabet.name,
        "max_len": max_len,
        "min_distance": rows,
        "median_per_length": [float(np.median([r[k] for r in rows])) for k in range(max_len)],
        "dim": dim,
    }


def random_automorphism(rng: np.random.Generator, factors: int = 6) -> np.ndarray:
    """Product of the two sample generators at random angles."""
    m = np.eye(7)
    for _ in range(factors):
        m = m @ g2_generator("A", rng.uniform(0, 2 * math.pi)) @ g2_generator("B", rng.uniform(0, 2 * math.pi))
    return m


# -- table reconciliation -----------------------------------------------------------

def all_alternative_tables(rng_seed: int = 0) -> list[list[tuple[int, int, int]]]:
    """Every oriented Fano labelling whose product is alternative (480 of them)."""
    rng = np.random.default_rng(rng_seed)
    probes = rng.normal(size=(8, 2, 8))
    linesets = set()
    for p in itertools.permutations(range(1, 8)):
        linesets.add(frozenset(frozenset(p[i - 1] for i in line) for line in _FANO_LINES))
    out = []
    for ls in sorted(linesets, key=lambda s: sorted(sorted(line) for line in s)):
        lines = sorted(tuple(sorted(line)) for line in ls)
        for o in range(2 ** 7):
            triples = [line if not (o >> k) & 1 else (line[0], line[2], line[1])
                       for k, line in enumerate(lines)]
            t = table_from_triples(triples)
            x, y = probes[:, 0], probes[:, 1]
            gap = oct_mul(oct_mul(x, x, t), y, t) - oct_mul(x, oct_mul(x, y, t), t)
            if np.abs(gap).max() < 1e-9:
                out.append(triples)
    return out


PREFERRED_PRODUCTS = {(1, 2): (3, 1), (1, 4): (5, 1), (2, 4): (6, 1), (3, 4): (7, 1),
                      (2, 5): (7, 1), (1, 6): (7, -1), (3, 6): (5, -1)}


def compatible_tables(angles=(0.7, 1.3), tol: float = 1e-9) -> list[list[tuple[int, int, int]]]:
    """Alternative tables under which both sample generators are automorphisms,
    best agreement with ``PREFERRED_PRODUCTS`` first."""
    a, b = g2_generator("A", angles[0]), g2_generator("B", angles[1])
    ok = []
    for triples in all_alternative_tables():
        t = table_from_triples(triples)
        if automorphism_residual(a, t) <= tol and automorphism_residual(b, t) <= tol:
            score = sum(t[i, j, k] == s for (i, j), (k, s) in PREFERRED_PRODUCTS.items())
            ok.append((-score, sorted(triples), triples))
    ok.sort()
    return [tr for _, _, tr in ok]
