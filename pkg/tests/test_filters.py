import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kfilter.complexity import ESTIMATORS, estimate_word
from kfilter.filters import (FilterConfig, Kind, NotALoop, classify_loop, classify_path, highpass, loop_tolerance,
                             lowpass, mirror_report, verdict_lines)
from kfilter.motion import (SUBSTITUTION, NoiseSpec, apply_E_word, build_so3_alphabet, example_loopword,
                            example_pathword, so3_quantizer)
from kfilter.robot import geometric_mean
from kfilter.words import Alphabet, Word

from conftest import THETA, random_word

SO3 = build_so3_alphabet(THETA)
Q = so3_quantizer(THETA)
LOOP = example_loopword(SO3)


def _noisy(w, amp, seed):
    return apply_E_word(w, NoiseSpec(SUBSTITUTION, amp, seed))


def test_config_validation():
    with pytest.raises(ValueError):
        FilterConfig(10, rho=1.0)
    with pytest.raises(ValueError):
        FilterConfig(-1)
    with pytest.raises(ValueError):
        FilterConfig(10, estimator="gzip")


def test_generous_memory_is_reversible():
    est = estimate_word(LOOP).bits
    v = classify_path(LOOP, LOOP, FilterConfig(10 * est))
    assert v.kind is Kind.REVERSIBLE
    assert not v.marginal
    assert v.ratio == pytest.approx(0.1)


def test_zero_memory_is_causal():
    v = classify_path(LOOP, LOOP, FilterConfig(0))
    assert v.kind is Kind.CAUSAL
    assert v.record()["ratio"] is None


def test_marginal_band():
    est = estimate_word(LOOP).bits
    v = classify_path(LOOP, LOOP, FilterConfig(est / 2))
    assert v.kind is Kind.REVERSIBLE
    assert v.marginal


def test_geometric_mean_separation_at_default_rho():
    # clean Rx^100 and its amplitude-0.3 substituted image, m between the two estimates
    noisy = _noisy(LOOP, 0.3, 0)
    clean_bits, noisy_bits = estimate_word(LOOP).bits, estimate_word(noisy).bits
    cfg = FilterConfig(geometric_mean(clean_bits, noisy_bits))
    assert classify_path(LOOP, LOOP, cfg).kind is Kind.REVERSIBLE
    assert classify_path(LOOP, noisy, cfg).kind is Kind.CAUSAL


def test_separation_with_small_memory():
    noisy = _noisy(LOOP, 0.3, 0)
    clean_bits = estimate_word(LOOP).bits
    cfg = FilterConfig(clean_bits)
    assert classify_path(LOOP, LOOP, cfg).kind is Kind.REVERSIBLE
    assert classify_path(LOOP, noisy, cfg).kind is Kind.CAUSAL


@pytest.mark.parametrize("estimator", ESTIMATORS)
def test_monotone_in_memory(estimator, rng):
    for seed in range(5):
        w = _noisy(LOOP, 0.3, seed)
        kinds = [classify_path(w, w, FilterConfig(m, estimator=estimator)).kind for m in range(0, 800, 5)]
        first = kinds.index(Kind.REVERSIBLE)
        assert all(k is Kind.REVERSIBLE for k in kinds[first:])


@pytest.mark.parametrize("estimator", ESTIMATORS)
def test_monotone_in_noise(estimator):
    amps = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0]
    medians = [np.median([estimate_word(_noisy(LOOP, a, s), estimator).bits for s in range(20)]) for a in amps]
    assert all(b >= a for a, b in zip(medians, medians[1:]))


def test_clean_loop_no_spin():
    est = estimate_word(LOOP).bits
    v = classify_loop(LOOP, LOOP, FilterConfig(10 * est))
    assert v.kind is Kind.NO_SPIN


def test_noisy_loop_spins():
    noisy = _noisy(LOOP, 0.5, 1)
    v = classify_loop(LOOP, noisy, FilterConfig(estimate_word(LOOP).bits))
    assert v.kind is Kind.SPIN


def test_pathword_is_not_a_loop():
    w = example_pathword(SO3)
    with pytest.raises(NotALoop):
        classify_loop(w, w, FilterConfig(100))


def test_loop_tolerance_is_two_theta():
    # the anchor is a unit vector, so one token moves it by 2 sin(theta/2) < theta
    tol = loop_tolerance(Q)
    assert tol <= 2 * THETA
    assert tol == pytest.approx(2 * THETA, rel=1e-3)


@given(st.integers(0, 10_000), st.integers(0, 3), st.floats(0, 1))
def test_spin_iff_causal(m, seed, amp):
    noisy = _noisy(LOOP, amp, seed)
    cfg = FilterConfig(m)
    spin = classify_loop(LOOP, noisy, cfg).kind is Kind.SPIN
    causal = classify_path(LOOP, noisy, cfg).kind is Kind.CAUSAL
    assert spin == causal


def test_pass_filters_trivial(rng):
    words = [random_word(SO3, 40, rng) for _ in range(10)]
    assert highpass(words, 0) == words
    assert lowpass(words, 0) == []
    assert highpass(words, math.inf) == []
    assert lowpass(words, math.inf) == words


def _batch(rng):
    periodic = []
    for _ in range(50):
        period = int(rng.integers(1, 6))
        unit = tuple(rng.integers(0, len(SO3), period))
        periodic.append(Word((unit * (512 // period + 1))[:512], SO3))
    rand = [random_word(SO3, 512, rng) for _ in range(50)]
    return periodic, rand


def test_pass_filters_separate(rng):
    periodic, rand = _batch(rng)
    words = periodic + rand
    thr = float(np.median([estimate_word(w).bits for w in words]))
    hi = highpass(words, thr)
    lo = lowpass(words, thr)
    assert sum(w in hi for w in rand) >= 0.8 * len(rand)
    assert sum(w in lo for w in periodic) >= 0.8 * len(periodic)


def test_pass_filters_partition(rng):
    periodic, rand = _batch(rng)
    words = periodic + rand
    for thr in (0, 100, 700, 1600, 10_000):
        hi, lo = highpass(words, thr), lowpass(words, thr)
        assert len(hi) + len(lo) == len(words)
        assert sorted(map(id, hi + lo)) == sorted(map(id, words))


def test_mirror_periodic_symmetric():
    w = SO3.word("Rx Ry Rz") * 30
    rep = mirror_report(w, FilterConfig(2 * estimate_word(w).bits))
    assert rep.symmetric
    assert not rep.symmetry_broken


def test_mirror_noisy_broken():
    w = _noisy(SO3.word("Rx Ry Rz") * 200, 0.5, 3)
    rep = mirror_report(w, FilterConfig(50))
    assert rep.symmetry_broken
    assert rep.causal_both_ways
    assert rep.record()["gap"] == rep.reverse_bits - rep.forward_bits


def test_mirror_needs_inverses():
    a = Alphabet.plain("ab", "ab")
    with pytest.raises(ValueError):
        mirror_report(a.word("a b"), FilterConfig(10))


@pytest.mark.parametrize("estimator", ESTIMATORS)
def test_mirror_within_ten_percent_random(estimator, rng):
    for _ in range(50):
        w = random_word(SO3, int(rng.integers(50, 600)), rng)
        rep = mirror_report(w, FilterConfig(100, estimator=estimator))
        assert abs(rep.gap) <= 0.1 * rep.forward_bits


@pytest.mark.parametrize("estimator", ESTIMATORS)
def test_mirror_within_ten_percent_example_words(estimator):
    # the worked-example words and their substituted images
    base = [LOOP, example_pathword(SO3), SO3.word("Rx Ry Rz") * 40, SO3.word("Rz") * 300]
    for w in base:
        for amp in (0.0, 0.1, 0.3, 1.0):
            e = _noisy(w, amp, 0)
            rep = mirror_report(e, FilterConfig(100, estimator=estimator))
            assert abs(rep.gap) <= 0.1 * rep.forward_bits, (len(w), amp, rep.forward_bits, rep.reverse_bits)


def test_verdict_lines_json():
    noisy = _noisy(LOOP, 0.3, 0)
    cfg = FilterConfig(60)
    text = verdict_lines([("clean", classify_path(LOOP, LOOP, cfg)), ("noisy", classify_path(LOOP, noisy, cfg))])
    rows = [json.loads(line) for line in text.splitlines()]
    assert [r["word_id"] for r in rows] == ["clean", "noisy"]
    assert set(rows[0]) == {"word_id", "kind", "estimate_bits", "memory_bits", "ratio", "marginal"}
    assert rows[1]["kind"] == "Causal"
