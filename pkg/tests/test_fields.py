"""Torus field calculus: convolution, proxy pair, chains, kernels, reports."""
from __future__ import annotations

import math

import numpy as np
import pytest

from currentkit import (
    Field, GraphError, NonContracting, SpreadOut,
    bubble_chain, convolution_bound_check, convolve, delta, depicted_ratios,
    hyp1_report, hyp2_report, hyp3_report, key_lemma_gap, key_lemma_gap_matrix,
    psi1_report, rw_green_proxy, step_distribution, tilde_g, triangle_T,
    triangle_tensor, weighted_norm, wrap_mass,
)
from currentkit.fields import (
    centered_norm_grid, conv_power, from_offsets, triangle_T_field, zeros,
)


def rng_field(d, side, seed):
    rng = np.random.default_rng(seed)
    return Field(d, side, rng.uniform(0.0, 1.0, size=(side,) * d))


def test_field_shape_guard():
    with pytest.raises(GraphError):
        Field(2, 4, np.zeros((4, 5)))
    with pytest.raises(GraphError):
        rng_field(1, 8, 0) + rng_field(1, 9, 0)


def test_delta_is_convolution_identity():
    f = rng_field(2, 7, 1)
    g = convolve(delta(2, 7), f)
    assert np.allclose(g.data, f.data, atol=1e-13)


def test_convolution_commutes_and_sums_mass():
    f = rng_field(2, 6, 2)
    g = rng_field(2, 6, 3)
    a = convolve(f, g)
    b = convolve(g, f)
    assert np.allclose(a.data, b.data, atol=1e-12)
    assert a.total() == pytest.approx(f.total() * g.total(), rel=1e-12)


def test_fft_matches_direct():
    for d, side, seed in ((1, 9, 4), (2, 5, 5), (3, 4, 6)):
        f = rng_field(d, side, seed)
        g = rng_field(d, side, seed + 50)
        a = convolve(f, g, method="fft")
        b = convolve(f, g, method="direct")
        assert np.max(np.abs(a.data - b.data)) <= 1e-12
    with pytest.raises(GraphError):
        convolve(f, g, method="sideways")


def test_reversed_and_shifted():
    f = rng_field(2, 5, 7)
    assert np.allclose(f.reversed().reversed().data, f.data)
    assert f.reversed().value((2, 1)) == pytest.approx(f.value((-2, -1)))
    s = f.shifted((1, 3))
    assert s.value((2, 4)) == pytest.approx(f.value((1, 1)))


def test_conv_power():
    f = from_offsets(1, 8, {(1,): 0.5, (-1,): 0.5})
    p0 = conv_power(f, 0)
    assert np.allclose(p0.data, delta(1, 8).data)
    p2 = conv_power(f, 2)
    # two symmetric steps: back at 0 with mass 1/2, at +-2 with 1/4
    assert p2.value((0,)) == pytest.approx(0.5)
    assert p2.value((2,)) == pytest.approx(0.25)
    with pytest.raises(GraphError):
        conv_power(f, -1)


def test_weighted_norm_floor():
    assert weighted_norm((0, 0), 2.0) == 2.0
    assert weighted_norm((3, 4), 2.0) == 5.0
    grid = centered_norm_grid(2, 6, 1.5, 1.0)
    assert grid[0, 0] == 1.5
    assert grid[3, 0] == pytest.approx(3.0)
    # symmetry under reflection through the origin
    assert grid[1, 2] == pytest.approx(grid[-1, -2])


def test_step_distribution_mass():
    D = step_distribution(SpreadOut(2, 1.0), 7)
    assert D.total() == pytest.approx(1.0, rel=1e-12)
    assert D.value((0, 0)) == 0.0


def test_proxy_identity_and_mass():
    spec = SpreadOut(2, 1.0)
    p = 0.5
    G, tau = rw_green_proxy(spec, 9, p)
    dlt = delta(2, 9)
    # exact resolvent identity G = delta + tau * G
    resid = np.max(np.abs(G.data - (dlt + convolve(tau, G)).data))
    assert resid <= 1e-12
    # geometric total mass
    assert (G - dlt).total() == pytest.approx(p / (1.0 - p), rel=1e-10)
    assert tau.total() == pytest.approx(p, rel=1e-12)


def test_proxy_degenerate_and_divergent():
    G, tau = rw_green_proxy(SpreadOut(1, 1.0), 8, 0.0)
    assert np.allclose(G.data, delta(1, 8).data)
    assert tau.l1() == 0.0
    with pytest.raises(NonContracting):
        rw_green_proxy(SpreadOut(1, 1.0), 8, 1.0)


def test_tilde_g_equals_g_minus_delta_for_proxy():
    G, tau = rw_green_proxy(SpreadOut(2, 1.5), 8, 0.7)
    Gt = tilde_g(G, tau)
    assert np.max(np.abs(Gt.data - (G.data - delta(2, 8).data))) <= 1e-12


def test_tilde_g_rejects_significant_negative():
    tau = from_offsets(1, 6, {(1,): -1.0})
    G = delta(1, 6)
    with pytest.raises(GraphError):
        tilde_g(G, tau)


def test_bubble_chain_finite_orders():
    Gt = from_offsets(1, 9, {(1,): 0.4, (-1,): 0.4})
    sq = Gt * Gt
    want = delta(1, 9) + sq + convolve(sq, sq)
    got = bubble_chain(Gt, 2)
    assert np.allclose(got.data, want.data, atol=1e-13)
    tail = bubble_chain(Gt, 2, j_start=1)
    assert np.allclose(tail.data, (sq + convolve(sq, sq)).data, atol=1e-13)
    empty = bubble_chain(Gt, 0, j_start=1)
    assert empty.l1() == 0.0


def test_bubble_chain_certified_upper():
    Gt = from_offsets(1, 9, {(1,): 0.4, (-1,): 0.4})
    inf_sum = bubble_chain(Gt, None, atol=1e-13)
    long_sum = bubble_chain(Gt, 60)
    # certified infinite chain dominates any truncation, entrywise
    assert np.all(inf_sum.data >= long_sum.data - 1e-15)
    assert np.max(inf_sum.data - long_sum.data) <= 1e-9


def test_bubble_chain_divergence_refused():
    Gt = from_offsets(1, 5, {(1,): 1.1})
    with pytest.raises(NonContracting):
        bubble_chain(Gt, None)


def test_triangle_identity_matrix():
    I = np.eye(4)
    assert triangle_T(I, 0, 0, 0) == pytest.approx(3.0)
    assert triangle_T(I, 0, 1, 2) == 0.0
    T = triangle_tensor(I)
    assert T[0, 0, 0] == pytest.approx(3.0)
    assert T[1, 1, 1] == pytest.approx(3.0)


def test_triangle_tensor_matches_scalar():
    rng = np.random.default_rng(11)
    G = rng.uniform(0.1, 1.0, size=(4, 4))
    G = (G + G.T) / 2
    T = triangle_tensor(G)
    for o in range(4):
        for x in range(4):
            for y in range(4):
                assert T[o, x, y] == pytest.approx(triangle_T(G, o, x, y), rel=1e-12)


def test_triangle_field_matches_direct_sum():
    G = rng_field(2, 5, 13)
    x, y = (1, 2), (3, 0)
    want = 0.0
    for z0 in range(5):
        for z1 in range(5):
            z = (z0, z1)
            gz = G.value(z)
            gxz = G.value((x[0] - z0, x[1] - z1))
            gzy = G.value((z0 - y[0], z1 - y[1]))
            want += gz * gxz * gzy * (
                G.value(x) * gzy
                + G.value(y) * G.value((z0 - x[0], z1 - x[1]))
                + gz * G.value((y[0] - x[0], y[1] - x[1])))
    got = triangle_T_field(G, x, y)
    assert got == pytest.approx(want, rel=1e-10)


def test_convolution_bound_validation():
    with pytest.raises(GraphError):
        convolution_bound_check(2, 1.0, 2.0, 1.0, 10)   # a < b
    with pytest.raises(GraphError):
        convolution_bound_check(3, 2.0, 0.5, 1.0, 10)   # a + b <= d
    with pytest.raises(GraphError):
        convolution_bound_check(2, 2.0, 1.0, 1.0, 10)   # marginal a == d
    with pytest.raises(GraphError):
        convolution_bound_check(2, 3.0, -1.0, 1.0, 10)


def test_convolution_bound_finite_constant():
    rep = convolution_bound_check(1, 2.0, 1.0, 1.0, 60)
    assert math.isfinite(rep["constant"])
    assert rep["constant"] >= max(rep["ratios"].values()) - 1e-15
    assert all(v > 0 for v in rep["ratios"].values())


def test_wrap_mass_extremes():
    f = delta(2, 8)
    assert wrap_mass(f) == 0.0
    g = zeros(2, 8)
    g.data[4, 4] = 2.0
    assert wrap_mass(g) == 1.0
    assert wrap_mass(zeros(2, 8)) == 0.0


def test_hypothesis_reports_on_proxy():
    spec = SpreadOut(2, 2.0)
    G, tau = rw_green_proxy(spec, 12, 0.6)
    Gt = tilde_g(G, tau)
    h1 = hyp1_report(G, tau, 2.0)
    assert set(h1) == {"tau_l1", "sup_ratio", "value", "passed"}
    assert h1["tau_l1"] == pytest.approx(0.6, rel=1e-12)
    assert h1["value"] == max(h1["tau_l1"], h1["sup_ratio"])
    h2 = hyp2_report(G, Gt, 2.0)
    assert h2["dominates"]
    assert h2["min_gap"] >= -1e-12
    h3 = hyp3_report(Gt, tau)
    assert h3["ratio_1"] > 0 and h3["ratio_2"] > 0


def test_key_lemma_gaps_nonnegative():
    G, tau = rw_green_proxy(SpreadOut(2, 1.0), 9, 0.55)
    Gt = tilde_g(G, tau)
    assert key_lemma_gap(tau, tau) >= -1e-14
    assert key_lemma_gap(tau, Gt) >= -1e-14
    rng = np.random.default_rng(5)
    Tau = rng.uniform(0.0, 0.3, size=(5, 5))
    F = rng.uniform(0.0, 1.0, size=(5, 5))
    assert key_lemma_gap_matrix(Tau, F) >= -1e-14


def test_psi1_report_small_proxy():
    G, tau = rw_green_proxy(SpreadOut(2, 1.0), 8, 0.5)
    Gt = tilde_g(G, tau)
    rep = psi1_report(Gt, tau)
    assert rep["identity_rel"] <= 1e-10
    assert rep["slack_step2"] >= -1e-14
    assert rep["slack_step3"] >= -1e-14
    assert rep["key_lemma_tau"] >= -1e-14
    assert rep["key_lemma_gt"] >= -1e-14


def test_depicted_ratios_positive_finite():
    G, tau = rw_green_proxy(SpreadOut(3, 1.0), 8, 0.5)
    Gt = tilde_g(G, tau)
    r = depicted_ratios(G, Gt)
    assert sorted(r) == [f"ratio{k}" for k in range(6)]
    for v in r.values():
        assert math.isfinite(v) and v > 0
