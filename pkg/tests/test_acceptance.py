"""Acceptance criteria 1-9; the terminal summary prints one PASS/FAIL line per criterion."""

import csv
import io
import math
import time

import mpmath
import numpy as np
import pytest

import oracles
from erlang_econ import (
    CostPolynomial,
    ServiceDistribution,
    SimConfig,
    SystemParams,
    equilibrium_join_prob,
    equilibrium_threshold,
    erlang_table,
    occupancy_distribution,
    optimal_join_prob,
    revenue_optimal_threshold,
    revenue_unobservable,
    simulate_observable,
    simulate_unobservable,
    social_welfare,
    socially_optimal_threshold,
)
from erlang_econ.observable import (
    REL_TOL,
    revenue_curve,
    revenue_marginal_ratios,
    social_marginal_ratios,
    welfare_curve,
)
from erlang_econ.sim import total_variation
from erlang_econ.sweep import SweepSpec, example_lines, run_sweep, run_validation, sweep_rows

EXAMPLE = SystemParams(lam=20.0, mu=1 / 60, reward=400.0)
QUAD = CostPolynomial((0.0, 0.01))


def random_draw(rng):
    """Load and reward log-uniform; degree 1-4 with a positive leading term."""
    rho = 10 ** rng.uniform(-2, math.log10(2000))
    reward = 10 ** rng.uniform(-1, 4)
    degree = int(rng.integers(1, 5))
    coeffs = [0.0 if rng.random() < 0.3 else 10 ** rng.uniform(-2, 2) for _ in range(degree)]
    coeffs[-1] = 10 ** rng.uniform(-2, 2)
    return SystemParams.from_load(rho, 1.0, reward), CostPolynomial(coeffs)


def tie_argmax(values, start=0):
    """Largest index within REL_TOL of the maximum (ties go up)."""
    seg = np.asarray(values[start:])
    best = seg.max()
    return start + int(np.flatnonzero(seg >= best - REL_TOL * abs(best))[-1])


def largest_satisfying(ratios, reward):
    return int(np.flatnonzero(ratios <= reward * (1 + REL_TOL))[-1]) + 1


# ---------------------------------------------------------------- criterion 1

@pytest.mark.acceptance(1)
def test_example_unobservable_and_equilibrium():
    start = time.perf_counter()
    n_e = equilibrium_threshold(EXAMPLE, QUAD)
    q_e = equilibrium_join_prob(EXAMPLE, QUAD)
    opt = optimal_join_prob(EXAMPLE, QUAD)
    elapsed = time.perf_counter() - start
    assert n_e == 201
    assert abs(q_e - 1 / 6) <= 1e-12
    assert abs(opt.q - math.sqrt(3) / 18) <= 1e-12
    assert abs(opt.price - 800 / 3) <= 1e-9
    assert abs(opt.revenue - 513.20) <= 0.01
    assert elapsed < 0.05


# ---------------------------------------------------------------- criterion 2

@pytest.mark.acceptance(2)
def test_example_thresholds_both_paths():
    start = time.perf_counter()
    n_e = equilibrium_threshold(EXAMPLE, QUAD)
    w = welfare_curve(EXAMPLE, QUAD, n_e)
    v = revenue_curve(EXAMPLE, QUAD, n_e)
    assert tie_argmax(w) == 116
    assert tie_argmax(v, start=1) == 116
    assert largest_satisfying(social_marginal_ratios(EXAMPLE, QUAD, n_e), EXAMPLE.reward) == 116
    assert largest_satisfying(revenue_marginal_ratios(EXAMPLE, QUAD, n_e), EXAMPLE.reward) == 116
    assert socially_optimal_threshold(EXAMPLE, QUAD) == 116
    assert revenue_optimal_threshold(EXAMPLE, QUAD)[0] == 116
    assert social_welfare(EXAMPLE, QUAD, 116) == pytest.approx(517.64, rel=0.01)
    assert social_welfare(EXAMPLE, QUAD, n_e) == pytest.approx(2.66, rel=0.05)

    lines = {line.name: line for line in example_lines()}
    prices = [l for name, l in lines.items() if name.startswith("P_o")]
    revenues = [l for name, l in lines.items() if name.startswith("S^r_m(n_m)")]
    assert len(prices) == 2 and len(revenues) == 2
    assert any(abs(l.computed - 265.44) <= 0.01 for l in prices)
    assert any(abs(l.computed - 512.71) <= 0.01 for l in revenues)
    # the threshold convention is the one the library returns
    assert lines["P_o = R - cost(n_m - 1)"].computed == pytest.approx(267.75, abs=1e-9)
    assert time.perf_counter() - start < 5.0


# ---------------------------------------------------------------- criterion 3

@pytest.mark.acceptance(3)
def test_ordering_on_random_draws():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    violations = []
    for _ in range(1000):
        p, cost = random_draw(rng)
        n_e = equilibrium_threshold(p, cost)
        n_s = socially_optimal_threshold(p, cost, n_e)
        n_m, _ = revenue_optimal_threshold(p, cost, n_e)
        if not n_m <= n_s <= n_e:
            violations.append((p, cost, n_e, n_s, n_m))
    assert violations == []
    assert time.perf_counter() - start < 60.0


# ---------------------------------------------------------------- criterion 4

@pytest.mark.acceptance(4)
def test_comparative_statics_over_load():
    rows = sweep_rows(SweepSpec(rho_min=0.5, rho_max=20.0, rho_step=0.5, mu=1.0, reward=15.0,
                                cost=(1.0, 0.0), mode="both"))
    assert [r["rho"] for r in rows] == [0.5 * k for k in range(1, 41)]
    n_s = [r["n_s"] for r in rows]
    n_m = [r["n_m"] for r in rows]
    assert all(a >= b for a, b in zip(n_s, n_s[1:]))
    assert all(a <= b for a, b in zip(n_m, n_m[1:]))
    assert all(r["S^r(n_s)"] >= r["S_q_opt"] for r in rows)
    signs = [np.sign(r["S^r_m(n_m)"] - r["S_q_opt"]) for r in rows]
    assert 0 not in signs
    changes = sum(a != b for a, b in zip(signs, signs[1:]))
    assert changes == 1 and signs[0] < 0 and signs[-1] > 0


# ---------------------------------------------------------------- criterion 5

def _check_unimodal(values, ratios, reward, chosen, start):
    """Marginal sign pattern is increase-then-decrease; values agree where resolvable."""
    up = ratios <= reward * (1 + REL_TOL)  # entry N-1: value(N) >= value(N-1)
    if start == 1:
        up = up[1:]  # N = 1 is the fixed starting point for revenue
    first_down = np.flatnonzero(~up)
    if first_down.size:
        assert not up[first_down[0]:].any(), "more than one local maximum"
    peak = start + (int(first_down[0]) if first_down.size else len(up))
    seg = np.asarray(values[start:])
    diffs = np.diff(seg)
    resolvable = np.abs(diffs) > REL_TOL * np.abs(seg).max()
    assert np.all(up[resolvable] == (diffs[resolvable] > 0))
    # the returned threshold is the marginal peak or a tie with it
    assert chosen >= peak
    assert values[chosen] >= values[peak] - REL_TOL * abs(values[peak])
    best = seg.max()
    assert np.all(seg[chosen - start + 1:] < best - REL_TOL * abs(best))


@pytest.mark.acceptance(5)
def test_unimodality_on_random_draws():
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    for _ in range(200):
        p, cost = random_draw(rng)
        n_e = equilibrium_threshold(p, cost)
        n_s = socially_optimal_threshold(p, cost, n_e)
        n_m, _ = revenue_optimal_threshold(p, cost, n_e)
        _check_unimodal(welfare_curve(p, cost, n_e), social_marginal_ratios(p, cost, n_e),
                        p.reward, n_s, 0)
        _check_unimodal(revenue_curve(p, cost, n_e), revenue_marginal_ratios(p, cost, n_e),
                        p.reward, n_m, 1)
    assert time.perf_counter() - start < 60.0


# ---------------------------------------------------------------- criterion 6

LOADS = [0.1, 1.0, 10.0, 100.0, 1200.0]
N_MAX = 300
EPS = np.finfo(float).eps


@pytest.mark.acceptance(6)
@pytest.mark.parametrize("rho", LOADS)
def test_mean_occupancy_properties(rho):
    table = erlang_table(rho, N_MAX + 1)
    mean = table.mean
    log_d = table.log_mean_increment()  # log(E(L_{n+1}) - E(L_n)), n = 0 .. N_MAX
    d = np.exp(log_d)

    # strictly increasing: every increment is positive (log finite); where
    # the increment is representable the float means increase too
    assert np.all(np.isfinite(log_d))
    visible = d[:-1] > 4 * EPS * mean[1:-1]
    assert np.all(np.diff(mean[: N_MAX + 1])[visible[:N_MAX]] > 0)

    # strictly concave increments
    assert np.all(np.diff(log_d) < 0)

    # log-concave: E_n^2 - E_{n+1} E_{n-1} = E_n (d_{n-1} - d_n) + d_n d_{n-1} > 0
    n = np.arange(1, N_MAX + 1)
    gap_log = np.logaddexp(
        np.log(mean[n]) + log_d[n - 1] + np.log(-np.expm1(log_d[n] - log_d[n - 1])),
        log_d[n] + log_d[n - 1],
    )
    assert np.all(np.isfinite(gap_log))
    direct = mean[n] ** 2 - mean[n + 1] * mean[n - 1]
    resolvable = np.exp(gap_log) > 8 * EPS * mean[n] ** 2
    assert np.all(direct[resolvable] > 0)

    # flow identity lam P(N < n) = mu E(L_n), mu = 1
    for k in range(0, N_MAX + 1, 7):
        dist = occupancy_distribution(rho, k)
        assert abs(rho * dist.admission_probability - dist.mean) <= 1e-10

    # spot checks of the increments against the 60-digit oracle
    for k in (0, 1, 37, 150, N_MAX):
        exact = mpmath.log(oracles.mean_increment(rho, k))
        assert log_d[k] == pytest.approx(float(exact), rel=1e-10)


@pytest.mark.acceptance(6)
def test_mean_ratio_non_decreasing_in_load():
    # log(E_{n+1}/E_n - 1) = log d_n - log E_n, for n = 1 .. N_MAX
    excess = []
    plain = []
    for rho in LOADS:
        table = erlang_table(rho, N_MAX + 1)
        log_d = table.log_mean_increment()
        excess.append(log_d[1 : N_MAX + 1] - np.log(table.mean[1 : N_MAX + 1]))
        plain.append(table.mean[2 : N_MAX + 2] / table.mean[1 : N_MAX + 1])
    for i in range(len(LOADS)):
        for j in range(i + 1, len(LOADS)):
            assert np.all(excess[i] <= excess[j])
            assert np.all(plain[i] <= plain[j])


# ---------------------------------------------------------------- criterion 7

@pytest.mark.acceptance(7)
@pytest.mark.parametrize(
    "reward,coeffs",
    [(100.0, (1.0, 0.5)), (30.0, (0.2, 0.0, 0.05)), (10.0, (1.0,))],
)
def test_welfare_matches_arrival_sum(reward, coeffs):
    cost = CostPolynomial(coeffs)
    for rho in np.arange(0.25, 5.0 + 1e-9, 0.25):
        rho = float(rho)
        p = SystemParams.from_load(rho, 1.0, reward)
        for n in range(0, 13):
            probs = occupancy_distribution(rho, n).probs
            terms = [p.lam * probs[m] * (reward - cost(m)) for m in range(n)]
            brute = math.fsum(terms)
            exact = float(oracles.welfare_pasta(p.lam, reward, list(coeffs), rho, n))
            value = social_welfare(p, cost, n)
            # relative to the sum of absolute terms (equals the plain relative
            # error whenever every admitted customer has positive net utility)
            scale = math.fsum(abs(t) for t in terms)
            assert abs(value - brute) <= 1e-10 * scale
            assert abs(value - exact) <= 1e-10 * scale
            if all(reward > cost(m) for m in range(n)) and n:
                assert value == pytest.approx(exact, rel=1e-10)


# ---------------------------------------------------------------- criterion 8

P2 = SystemParams(lam=2.0, mu=1.0, reward=10.0)
LINEAR = CostPolynomial((1.0,))


@pytest.mark.acceptance(8)
@pytest.mark.parametrize("kind", ["exponential", "deterministic", "uniform", "lognormal"])
def test_simulation_insensitivity_and_welfare(kind):
    # 20 replications of 5e4 mean service times: 1e6 in total
    res = simulate_observable(SimConfig(
        params=P2, service=ServiceDistribution.for_rate(kind, P2.mu, sigma=1.0),
        horizon=5e4, seed=8, replications=20, threshold=3, cost=LINEAR))
    exact = occupancy_distribution(2.0, 3).probs
    assert total_variation(res.occupancy_pmf, exact) < 0.01
    assert total_variation(res.arrival_pmf, res.occupancy_pmf) < 0.015
    assert abs(res.welfare_estimate - social_welfare(P2, LINEAR, 3)) <= 3 * res.welfare_se


@pytest.mark.acceptance(8)
@pytest.mark.parametrize(
    "params,cost,horizon",
    [(P2, LINEAR, 5e4), (EXAMPLE, QUAD, 1e4)],
    ids=["small", "example"],
)
def test_simulated_unobservable_revenue(params, cost, horizon):
    q = optimal_join_prob(params, cost).q
    res = simulate_unobservable(SimConfig(
        params=params, service=ServiceDistribution.for_rate("exponential", params.mu),
        horizon=horizon, seed=8, replications=20, join_prob=q, cost=cost))
    assert abs(res.revenue_estimate - revenue_unobservable(params, cost, q)) <= 3 * res.revenue_se
    assert abs(res.mean_occupancy - params.rho * q) <= 3 * res.mean_occupancy_se


@pytest.mark.acceptance(8)
def test_same_seed_gives_identical_csv():
    spec = SweepSpec(rho_min=1.0, rho_max=3.0, rho_step=1.0, reward=10.0, cost=(1.0,),
                     threshold=3, horizon=2000.0, replications=10, seed=99)
    first, _, ok = run_validation(spec)
    second, _, _ = run_validation(spec)
    assert ok
    assert first.encode("utf-8") == second.encode("utf-8")
    assert run_sweep(spec)[0].encode() == run_sweep(spec)[0].encode()
    assert len(list(csv.DictReader(io.StringIO(first)))) > 0


# ---------------------------------------------------------------- criterion 9

@pytest.mark.acceptance(9)
def test_linear_cost_limits():
    rng = np.random.default_rng(9)
    checked = 0
    while checked < 300:
        rho = 10 ** rng.uniform(-2, math.log10(2000))
        mu = 10 ** rng.uniform(-2, 1)
        c1 = 10 ** rng.uniform(-2, 2)
        reward = 10 ** rng.uniform(-1, 4)
        if reward >= c1 * rho:
            continue  # both optima sit at q = 1
        p = SystemParams.from_load(rho, mu, reward)
        for cost in (CostPolynomial((c1,)), CostPolynomial((c1, 0.0))):
            q_e = equilibrium_join_prob(p, cost, "numeric")
            assert q_e == pytest.approx(reward / (c1 * rho), rel=1e-10)
            assert equilibrium_join_prob(p, cost, "closed") == pytest.approx(q_e, rel=1e-10)
            opt = optimal_join_prob(p, cost, "numeric")
            assert opt.q == pytest.approx(reward / (2 * c1 * rho), rel=1e-10)
            assert opt.price == pytest.approx(reward / 2, rel=1e-10)
            assert opt.revenue == pytest.approx(mu * reward**2 / (4 * c1), rel=1e-10)
            closed = optimal_join_prob(p, cost, "closed")
            assert closed.q == pytest.approx(opt.q, rel=1e-10)
            assert closed.revenue == pytest.approx(opt.revenue, rel=1e-10)
        checked += 1


@pytest.mark.acceptance(9)
@pytest.mark.parametrize("method", ["auto", "closed", "numeric"])
def test_spot_value_hundred(method):
    p = SystemParams.from_load(10.0, 1.0, 20.0)
    for cost in (CostPolynomial((1.0,)), CostPolynomial((1.0, 0.0))):
        assert optimal_join_prob(p, cost, method).revenue == 100.0
    assert 1.0 * 20.0**2 / (4 * 1.0) == 100.0
