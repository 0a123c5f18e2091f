import math
import warnings

import numpy as np
import pytest
from scipy.stats import norm

from pathgreeks import (
    GreekEstimate,
    InvalidArgumentError,
    InvalidDirectionError,
    Path,
    PayoffSpec,
    SimConfig,
    VegaDirection,
    additive_model,
    black_scholes,
    estimate_bs_greeks,
    estimate_delta_weight,
    estimate_fd_greek,
    estimate_gamma_weight,
    estimate_price,
    estimate_vega_weight,
    gamma_weight,
    make_grid,
    simulate_batch,
)
from pathgreeks.greeks import (
    DegenerateEstimateWarning,
    bs_weights,
    combined_z,
    compute_greeks,
    delta_weights,
    fd_bump_table,
    gamma_weights,
    weighted_samples,
)
from pathgreeks.oracles import DigitalClosedForm, closed_form_digital_greeks
from pathgreeks.simulate import simulate_block

BS = black_scholes(100.0, 0.2)
DIG = PayoffSpec("digital_call", 100.0)
ONE = PayoffSpec("digital_call", 0.0)  # g = 1 on every positive path
DELTA, GAMMA, VSIG = closed_form_digital_greeks(100.0, 100.0, 0.2, 1.0)


def cfg(n_paths=100_000, n=64, seed=1, T=1.0, **kw):
    return SimConfig(make_grid(T, n), n_paths, seed, **kw)


def test_estimate_record():
    e = GreekEstimate.from_samples([1.0, 2.0, 3.0, 4.0], "delta", "weight", 5)
    assert e.value == 2.5
    assert e.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert e.ci95 == pytest.approx((2.5 - 1.96 * e.stderr, 2.5 + 1.96 * e.stderr))
    assert e.csv_row()[:2] == ["delta", "weight"] and e.csv_row()[-2:] == ["4", "5"]
    assert float(e.csv_row()[2]) == 2.5
    with pytest.raises(InvalidArgumentError):
        GreekEstimate.from_samples([1.0], "delta", "weight", 0)
    f = GreekEstimate.from_samples([2.0, 2.0], "delta", "fd", 0)
    assert f.stderr == 0 and combined_z(f, f) == 0.0


@pytest.mark.parametrize("T", [1.0, 0.5, 2.0])
def test_bs_reduction_identities(T):
    blk = simulate_block(BS, cfg(4000, 50, T=T), 0)
    bw = bs_weights(blk, BS)
    w = blk.w_T
    sig, x0 = 0.2, 100.0
    # compare against the size of the summands: near-zero weights lose
    # relative digits to cancellation, not to the formula
    d_scale = np.abs(blk.dW).sum(axis=1) / (x0 * sig * T)
    assert np.all(np.abs(delta_weights(blk) - bw["delta"]) <= 1e-10 * d_scale)
    g_scale = (w**2 / (sig * T) + np.abs(w) + 1 / sig) / (sig * x0**2 * T)
    assert np.all(np.abs(gamma_weights(blk, BS) - bw["gamma"]) <= 1e-10 * g_scale)


def test_gamma_weight_single_path_zero_noise():
    b = simulate_batch(BS, cfg(1, 10, zero_noise=True))
    assert gamma_weight(b[0], BS, 0.0, 1.0) == pytest.approx(-1 / 400, rel=1e-15)
    with pytest.raises(InvalidArgumentError):
        gamma_weight(b[0], BS, 1.0, 1.0)


def test_gamma_weight_matches_closed_bracket_per_path():
    b = simulate_batch(BS, cfg(100, 40, T=2.0, seed=3))
    for out in b:
        w = out.dW.sum()
        closed = (w**2 / (0.2 * 2) - w - 1 / 0.2) / (0.2 * 100**2 * 2)
        assert gamma_weight(out, BS, 0.0, 2.0) == pytest.approx(closed, rel=1e-9, abs=1e-15)


def test_weights_have_mean_zero():
    c = cfg(100_000, 32, seed=4)
    for est in (
        estimate_delta_weight(BS, c, ONE),
        estimate_gamma_weight(BS, c, ONE),
        estimate_vega_weight(BS, c, ONE),
    ):
        assert abs(est.zscore(0.0)) <= 3


def test_zero_noise_price_is_deterministic():
    e = estimate_price(black_scholes(101.0, 0.2), cfg(2, 8, zero_noise=True), DIG)
    assert e.value == 1.0 and e.stderr == 0.0


def test_vanilla_zero_strike_is_forward():
    e = estimate_price(BS, cfg(100_000, 16, seed=2), PayoffSpec("vanilla_call", 0.0))
    assert abs(e.zscore(100.0)) <= 3


def test_bs_digital_weights_against_closed_form():
    c = cfg(200_000, 64, seed=5)
    res = {(e.greek, e.method): e for e in compute_greeks(BS, c, DIG, fd_bump=1.0, vega_bump=0.002)}
    assert abs(res["delta", "weight"].zscore(DELTA)) <= 3
    assert abs(res["gamma", "weight"].zscore(GAMMA)) <= 3
    assert abs(res["vega", "weight"].zscore(0.1 * VSIG)) <= 3
    assert abs(res["vega", "weight_bs"].zscore(0.1 * VSIG)) <= 3
    assert abs(combined_z(res["vega", "weight_bs"], res["vega_sigma", "fd"], 0.1)) <= 3
    assert abs(res["delta", "fd"].zscore(DELTA)) <= 3
    assert "dP/dvol" in res["vega_sigma", "fd"].notes
    # the one-pass driver agrees with the single-estimator entry points
    assert estimate_delta_weight(BS, c, DIG).value == res["delta", "weight"].value
    bs = estimate_bs_greeks(BS, c, DIG)
    assert bs["gamma"].value == res["gamma", "weight_bs"].value


def test_gamma_at_longer_horizon():
    c = cfg(200_000, 40, seed=6, T=2.0)
    _, gamma, _ = closed_form_digital_greeks(100.0, 100.0, 0.2, 2.0)
    assert abs(estimate_gamma_weight(BS, c, DIG).zscore(gamma)) <= 3


def test_gamma_matches_fd_of_weight_delta():
    c = cfg(200_000, 32, seed=7)
    g = estimate_gamma_weight(BS, c, DIG)
    up = estimate_delta_weight(BS.with_x0(101.0), c, DIG)
    dn = estimate_delta_weight(BS.with_x0(99.0), c, DIG)
    fd_value = (up.value - dn.value) / 2.0
    fd_se = math.hypot(up.stderr, dn.stderr) / 2.0
    assert abs(g.value - fd_value) <= 3 * math.hypot(g.stderr, fd_se)


def test_constant_direction_vega_additive_model():
    # dx = sqrt(v) dW, digital: P(v) = Phi((x0 - K) / sqrt(v T)); along u = c
    # the derivative is dP/dv * c
    x0, K, sig, T, c = 100.0, 105.0, 10.0, 1.0, 4.0
    m = additive_model(x0, sig)
    d = (x0 - K) / (sig * math.sqrt(T))
    exact = norm.pdf(d) * (x0 - K) / math.sqrt(T) * (-0.5 * sig**-3) * c
    est = estimate_vega_weight(m, cfg(200_000, 64, seed=8), PayoffSpec("digital_call", K),
                               VegaDirection.constant(c))
    assert abs(est.zscore(exact)) <= 3
    assert "direction=constant" in est.notes


def test_zero_direction_is_exactly_zero():
    est = estimate_vega_weight(BS, cfg(1000, 16), DIG, VegaDirection.constant(0.0))
    assert est.value == 0.0 and est.stderr == 0.0


def test_ellipticity_violation():
    with pytest.raises(InvalidDirectionError):
        estimate_vega_weight(BS, cfg(100, 8), DIG, VegaDirection.constant(1e6))


def test_restart_at_s_matches_conditional_delta():
    grid = make_grid(1.0, 64)
    hist_vals = np.linspace(100.0, 104.0, 65)
    history = Path(grid, hist_vals)
    s = 0.5
    est = estimate_delta_weight(BS, SimConfig(grid, 200_000, 9), DIG, s=s, history=history)
    x_s = hist_vals[32]
    target = float(DigitalClosedForm(100.0, 0.2, 1.0).delta(s, x_s))
    assert abs(est.zscore(target)) <= 3


def test_average_delta_at_s():
    # without a history the s-weight averages the conditional delta over X_s
    s, sig = 0.5, 0.2
    y, w = np.polynomial.hermite_e.hermegauss(80)
    x_s = 100.0 * np.exp(sig * math.sqrt(s) * y - 0.5 * sig**2 * s)
    target = float(np.dot(w, DigitalClosedForm(100.0, sig, 1.0).delta(s, x_s)) / math.sqrt(2 * math.pi))
    est = estimate_delta_weight(BS, cfg(200_000, 64, seed=10), DIG, s=s)
    assert abs(est.zscore(target)) <= 3
    with pytest.raises(InvalidArgumentError):
        estimate_delta_weight(BS, cfg(10, 8), DIG, s=1.0)


def test_vanilla_with_rates_against_black_scholes():
    r, sig, K, T = 0.05, 0.2, 100.0, 1.0
    m = black_scholes(100.0, sig, r=r)
    d1 = (math.log(100 / K) + (r + 0.5 * sig**2) * T) / (sig * math.sqrt(T))
    d2 = d1 - sig * math.sqrt(T)
    van = PayoffSpec("vanilla_call", K)
    c = cfg(200_000, 64, seed=11)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        price = estimate_price(m, c, van)
        delta = estimate_delta_weight(m, c, van)
    assert abs(price.zscore(100 * norm.cdf(d1) - K * math.exp(-r * T) * norm.cdf(d2))) <= 3
    assert abs(delta.zscore(norm.cdf(d1))) <= 3
    assert "unbounded payoff" in delta.notes
    with pytest.raises(InvalidArgumentError):
        estimate_gamma_weight(m, c, van)


def test_vanilla_fd_agrees_with_weight_delta():
    van = PayoffSpec("vanilla_call", 100.0)
    c = cfg(100_000, 32, seed=12)
    w = estimate_delta_weight(BS, c, van)
    fd = estimate_fd_greek(BS, c, van, "delta", 1.0)
    assert abs(combined_z(w, fd)) <= 3


def test_fd_validation_and_degenerate_warning():
    with pytest.raises(InvalidArgumentError):
        estimate_fd_greek(BS, cfg(10, 8), DIG, "delta", 0.0)
    with pytest.raises(InvalidArgumentError):
        estimate_fd_greek(BS, cfg(10, 8), DIG, "theta", 1.0)
    with pytest.warns(DegenerateEstimateWarning):
        e = estimate_fd_greek(BS, cfg(50, 8), DIG, "delta", 1e-12)
    assert e.value == 0.0


def test_fd_stderr_grows_as_bump_shrinks():
    weight, table = fd_bump_table(BS, cfg(50_000, 32, seed=13), DIG, [0.1, 1.0, 10.0])
    ses = [e.stderr for _, e in table]
    assert ses[0] > ses[1] > ses[2]
    assert ses[0] > 3 * weight.stderr


def test_determinism_and_thread_invariance():
    c = cfg(20_000, 16, seed=14)
    a = compute_greeks(BS, c, DIG, 1.0, 0.002, threads=1)
    b = compute_greeks(BS, c, DIG, 1.0, 0.002, threads=3)
    assert [e.csv_row() for e in a] == [e.csv_row() for e in b]


def test_weighted_samples_prefix_matches_smaller_run():
    s = weighted_samples(BS, cfg(30_000, 16, seed=15), DIG, "delta")
    t = weighted_samples(BS, cfg(10_000, 16, seed=15), DIG, "delta")
    assert np.array_equal(s[:8192], t[:8192])
