"""Memory-versus-complexity classifiers and complexity pass filters.

A robot with ``m`` bits of memory can retrace a motion when the motion's
estimated description fits in memory (``estimate <= m``).  It cannot when
the estimate is far above memory, ``estimate >= rho * m``.  Verdicts in the
band between the two are kept as Reversible but flagged ``marginal``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .complexity import DEFAULT_ESTIMATOR, ESTIMATORS, UnknownEstimator, estimate_word
from .motion import DEFAULT_ANCHOR, Quantizer, reconstruct
from .words import Word, reverse_inverse


class Kind(str, enum.Enum):
    CAUSAL = "Causal"
    REVERSIBLE = "Reversible"
    SPIN = "Spin"
    NO_SPIN = "NoSpin"


class NotALoop(ValueError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    memory_bits: float
    rho: float = 4.0
    estimator: str = DEFAULT_ESTIMATOR

    def __post_init__(self):
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if not self.memory_bits >= 0:
            raise ValueError("memory_bits must be >= 0")
        if self.estimator not in ESTIMATORS:
            raise UnknownEstimator(self.estimator)


@dataclass(frozen=True)
class FilterVerdict:
    kind: Kind
    estimate_bits: int
    memory_bits: float
    rho: float
    marginal: bool

    @property
    def ratio(self) -> float:
        return self.estimate_bits / self.memory_bits if self.memory_bits else math.inf

    def record(self, word_id: str | int | None = None) -> dict:
        ratio = self.ratio
        return {
            "word_id": word_id,
            "kind": self.kind.value,
            "estimate_bits": self.estimate_bits,
            "memory_bits": self.memory_bits,
            "ratio": ratio if math.isfinite(ratio) else None,
            "marginal": self.marginal,
        }


def _rule(estimate_bits: int, cfg: FilterConfig) -> tuple[bool, bool]:
    """(fires, marginal) of the "memory far below complexity" rule."""
    if estimate_bits >= cfg.rho * cfg.memory_bits:
        return True, False
    return False, estimate_bits > cfg.memory_bits


def classify_path(w: Word, e_image: Word, cfg: FilterConfig) -> FilterVerdict:
    """Causal/Reversible verdict for the fluctuated image of ``w``.

    ``w`` itself is not estimated; the caller supplies its E-image
    (pass ``w`` twice to classify the unperturbed word).
    """
    if e_image.alphabet != w.alphabet:
        raise ValueError("E-image must share the word's alphabet")
    est = estimate_word(e_image, cfg.estimator).bits
    fires, marginal = _rule(est, cfg)
    return FilterVerdict(Kind.CAUSAL if fires else Kind.REVERSIBLE, est, cfg.memory_bits, cfg.rho, marginal)


def loop_tolerance(q: Quantizer) -> float:
    """Twice the longest single-token step of the anchor (2 theta for a unit
    anchor under small rotations)."""
    steps = [np.linalg.norm(m @ q.anchor - q.anchor) for m in q.alphabet.matrices]
    return 2.0 * float(max(steps))


def loop_gap(lw: Word, q: Quantizer) -> float:
    return reconstruct(lw, q).endpoint_gap()


def classify_loop(lw: Word, e_image: Word, cfg: FilterConfig,
                  quantizer: Quantizer | None = None) -> FilterVerdict:
    """Spin/NoSpin: the causal rule applied to a word that closes a loop."""
    q = quantizer if quantizer is not None else Quantizer(lw.alphabet, DEFAULT_ANCHOR)
    gap, tol = loop_gap(lw, q), loop_tolerance(q)
    if gap > tol:
        raise NotALoop(f"word does not close: endpoint gap {gap:.4g} > {tol:.4g}")
    v = classify_path(lw, e_image, cfg)
    return FilterVerdict(Kind.SPIN if v.kind is Kind.CAUSAL else Kind.NO_SPIN,
                         v.estimate_bits, v.memory_bits, v.rho, v.marginal)


def highpass(words: Sequence[Word], threshold_bits: float,
             estimator: str = DEFAULT_ESTIMATOR) -> list[Word]:
    return [w for w in words if estimate_word(w, estimator).bits >= threshold_bits]


def lowpass(words: Sequence[Word], threshold_bits: float,
            estimator: str = DEFAULT_ESTIMATOR) -> list[Word]:
    return [w for w in words if estimate_word(w, estimator).bits < threshold_bits]


@dataclass(frozen=True)
class MirrorReport:
    forward_bits: int
    reverse_bits: int
    memory_bits: float
    rho: float

    @property
    def gap(self) -> int:
        return self.reverse_bits - self.forward_bits

    @property
    def symmetric(self) -> bool:
        """Both directions fit in memory: the motion and its mirror are retraceable."""
        return max(self.forward_bits, self.reverse_bits) <= self.memory_bits

    @property
    def symmetry_broken(self) -> bool:
        return not self.symmetric

    @property
    def causal_both_ways(self) -> bool:
        return min(self.forward_bits, self.reverse_bits) >= self.rho * self.memory_bits

    def record(self) -> dict:
        return {
            "forward_bits": self.forward_bits,
            "reverse_bits": self.reverse_bits,
            "gap": self.gap,
            "memory_bits": self.memory_bits,
            "symmetric": self.symmetric,
            "symmetry_broken": self.symmetry_broken,
            "causal_both_ways": self.causal_both_ways,
        }


def mirror_report(w: Word, cfg: FilterConfig) -> MirrorReport:
    back = reverse_inverse(w)
    return MirrorReport(estimate_word(w, cfg.estimator).bits,
                        estimate_word(back, cfg.estimator).bits,
                        cfg.memory_bits, cfg.rho)


def verdict_lines(verdicts: Iterable[tuple[str | int, FilterVerdict]]) -> str:
    """JSON lines, one verdict per line."""
    return "".join(json.dumps(v.record(i), sort_keys=True) + "\n" for i, v in verdicts)
