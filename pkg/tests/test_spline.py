import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.interpolate import BSpline

from kfilter.motion import (JITTER, NoiseSpec, Polyline, apply_E_path, build_so3_alphabet, example_loopword,
                            reconstruct, so3_quantizer)
from kfilter.spline import (BSplineCurve, SplineFitError, basis_functions, chord_params, clamped_knots,
                            complexity_reduction, distances_to_curve, fit_bspline, periodic_knots, tube_check)

from conftest import THETA

SO3 = build_so3_alphabet(THETA)
Q = so3_quantizer(THETA)
LOOP = reconstruct(example_loopword(SO3), Q)


def jittered_loop(sigma, seed):
    return apply_E_path(LOOP, NoiseSpec(JITTER, sigma, seed))


def circle(n, radius=1.0):
    t = np.linspace(0, 2 * np.pi, n + 1)
    return Polyline(np.column_stack([radius * np.cos(t), radius * np.sin(t)]), closed=True)


# -- basis ----------------------------------------------------------------------------

@pytest.mark.parametrize("degree,n_ctrl", [(4, 5), (4, 16), (5, 12), (7, 30)])
def test_partition_of_unity(degree, n_ctrl, rng):
    u = rng.random(1000)
    n = basis_functions(clamped_knots(n_ctrl, degree), degree, np.append(u, [0.0, 1.0]))
    assert np.abs(n.sum(axis=1) - 1).max() < 1e-12
    assert n.min() >= 0


def test_periodic_partition_of_unity(rng):
    c = BSplineCurve(4, periodic_knots(10, 4), np.zeros((10, 2)), closed=True)
    assert np.abs(c.basis(rng.random(1000)).sum(axis=1) - 1).max() < 1e-12


@pytest.mark.parametrize("degree", [4, 5, 6])
def test_matches_scipy_bspline(degree, rng):
    n_ctrl = 14
    knots = clamped_knots(n_ctrl, degree)
    ctrl = rng.normal(size=(n_ctrl, 3))
    ours = BSplineCurve(degree, knots, ctrl)
    ref = BSpline(knots, ctrl, degree)
    u = np.sort(rng.random(500))
    assert np.abs(ours(u) - ref(u)).max() < 1e-12


def test_periodic_matches_scipy(rng):
    degree, n_ctrl = 4, 9
    ctrl = rng.normal(size=(n_ctrl, 2))
    ours = BSplineCurve(degree, periodic_knots(n_ctrl, degree), ctrl, closed=True)
    ref = BSpline(periodic_knots(n_ctrl, degree), np.vstack([ctrl, ctrl[:degree]]), degree)
    u = rng.random(300)
    assert np.abs(ours(u) - ref(u)).max() < 1e-12
    assert np.abs(ours(0.0) - ours(1.0)).max() < 1e-12


def test_clamped_endpoints(rng):
    ctrl = rng.normal(size=(8, 3))
    c = BSplineCurve(4, clamped_knots(8, 4), ctrl)
    assert np.allclose(c(0.0), ctrl[0], atol=1e-14)
    assert np.allclose(c(1.0), ctrl[-1], atol=1e-14)


def test_curve_validation():
    with pytest.raises(ValueError):
        BSplineCurve(4, np.arange(10.0), np.zeros((6, 2)))
    with pytest.raises(ValueError):
        BSplineCurve(4, clamped_knots(6, 4)[::-1], np.zeros((6, 2)))
    with pytest.raises(ValueError):
        BSplineCurve(4, clamped_knots(6, 4), np.zeros(6))


def test_json_round_trip(rng):
    c = BSplineCurve(4, periodic_knots(7, 4), rng.normal(size=(7, 3)), closed=True)
    d = json.loads(c.to_json())
    assert set(d) == {"degree", "knots", "control_points", "closed"}
    c2 = BSplineCurve.from_dict(d)
    u = rng.random(20)
    assert np.array_equal(c(u), c2(u))


def test_sample_closed_repeats_start(rng):
    c = BSplineCurve(4, periodic_knots(7, 4), rng.normal(size=(7, 3)), closed=True)
    s = c.sample(50)
    assert len(s) == 50
    assert s.closed
    assert np.array_equal(s.points[0], s.points[-1])


def test_chord_params():
    u = chord_params(np.array([[0.0, 0], [1, 0], [3, 0]]))
    assert np.allclose(u, [0, 1 / 3, 1])
    u = chord_params(np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]]), closed=True)
    assert np.allclose(u, [0, 0.25, 0.5, 0.75])


# -- fitting --------------------------------------------------------------------------

def test_exact_representation(rng):
    degree, n_ctrl = 4, 10
    ctrl = rng.normal(size=(n_ctrl, 3))
    c = BSplineCurve(degree, clamped_knots(n_ctrl, degree), ctrl)
    u = np.linspace(0, 1, 80)
    fit = fit_bspline(Polyline(c(u)), degree, n_ctrl, params=u)
    assert np.abs(fit(u) - c(u)).max() < 1e-9
    assert np.abs(fit.control_points - ctrl).max() < 1e-9


def test_circle_fit():
    p = circle(256, radius=2.0)
    c = fit_bspline(p, 4, 12)
    assert c.closed
    dev = tube_check(c, p, 1.0).max_deviation
    assert dev < 1e-3 * 2.0


def test_fit_errors():
    pts = Polyline(np.random.default_rng(0).normal(size=(4, 3)))
    with pytest.raises(SplineFitError):
        fit_bspline(pts, 4, 5)
    with pytest.raises(SplineFitError):
        fit_bspline(Polyline(np.ones((40, 3))), 4, 8)
    with pytest.raises(SplineFitError):
        fit_bspline(LOOP, 3, 8)
    with pytest.raises(SplineFitError):
        fit_bspline(LOOP, 4, 4)
    with pytest.raises(SplineFitError):
        fit_bspline(LOOP, 4, 8, params=np.linspace(0, 1, 5))


def test_rank_deficient_parameters():
    # all parameters inside one knot span cannot pin down every control point
    p = Polyline(np.random.default_rng(1).normal(size=(40, 2)))
    with pytest.raises(SplineFitError):
        fit_bspline(p, 4, 12, params=np.linspace(0.0, 0.05, 40))


# -- tube -----------------------------------------------------------------------------

def test_tube_on_own_samples(rng):
    p = jittered_loop(0.02, 1)
    c = fit_bspline(p, 4, 16)
    dev = distances_to_curve(c, p.points)
    residual = dev.max()
    rep = tube_check(c, p, 2 * residual)
    assert rep.contained
    assert rep.max_deviation == pytest.approx(residual)
    assert not tube_check(c, p, 0.0).contained


def test_tube_distance_against_brute_force(rng):
    p = jittered_loop(0.05, 2)
    c = fit_bspline(p, 4, 16)
    u = np.linspace(0, 1, 200_001)
    dense = c(u)
    pts = p.points[::7]
    brute = np.array([np.linalg.norm(dense - x, axis=1).min() for x in pts])
    ours = distances_to_curve(c, pts)
    assert np.all(ours <= brute + 1e-12)
    assert np.abs(ours - brute).max() < 1e-6


def test_tube_negative_epsilon():
    c = fit_bspline(LOOP, 4, 16)
    with pytest.raises(ValueError):
        tube_check(c, LOOP, -1.0)


def test_jittered_loop_contained():
    for seed in range(5):
        p = jittered_loop(0.05, seed)
        assert tube_check(fit_bspline(p, 4, 16), p, 4 * 0.05).contained


@given(st.floats(0.1, 10.0), st.integers(64, 300))
def test_tube_report_consistency(radius, n):
    p = circle(n, radius)
    c = fit_bspline(p, 4, 8)
    rep = tube_check(c, p, 1e-4 * radius)
    assert rep.contained == (rep.max_deviation <= rep.epsilon)


# -- complexity reduction -------------------------------------------------------------

@pytest.mark.parametrize("tokens", [["Rz"] * 50, ["Rx"] * 100, ["Ry"] * 70])
def test_noise_free_line_ratio(tokens):
    p = reconstruct(SO3.word(tokens), Q)
    rep = complexity_reduction(p, fit_bspline(p, 4, 8), Q)
    assert rep.ratio <= 1.05


def test_jittered_loop_ratio_median():
    ratios = []
    for seed in range(20):
        p = jittered_loop(0.05, seed)
        ratios.append(complexity_reduction(p, fit_bspline(p, 4, 16), Q).ratio)
    assert np.median(ratios) < 0.8


def test_deviation_decreases_with_ctrl():
    counts = [8, 16, 32, 64]
    med = []
    for n in counts:
        devs = [tube_check(fit_bspline(p, 4, n), p, 1.0).max_deviation
                for p in (jittered_loop(0.05, s) for s in range(10))]
        med.append(np.median(devs))
    assert all(b <= a for a, b in zip(med, med[1:]))


def test_complexity_report_fields():
    p = jittered_loop(0.05, 0)
    rep = complexity_reduction(p, fit_bspline(p, 4, 16), Q, epsilon=0.2)
    d = rep.to_dict()
    assert d["ratio"] == rep.complexity_spline_bits / rep.complexity_original_bits
    assert d["contained"] == (d["max_deviation"] <= 0.2)
    assert d["tokens_original"] >= len(p) - 1
    no_geo = complexity_reduction(p, fit_bspline(p, 4, 16), Q)
    assert math.isnan(no_geo.max_deviation)


def test_complexity_dimension_check():
    p = Polyline(np.random.default_rng(0).normal(size=(30, 2)))
    with pytest.raises(ValueError):
        complexity_reduction(p, fit_bspline(p, 4, 8), Q)
