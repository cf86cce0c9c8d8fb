"""Parameter sweeps, the worked-example report and simulation validation.

Sweeps run over a grid of offered loads with ``mu``, ``R`` and the cost
coefficients held fixed.  Every command writes plot-ready CSV (UTF-8, ``\\n``
line endings, floats in shortest round-trip form) and a plain-text summary.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .erlang import expected_occupancy, occupancy_distribution
from .model import CostPolynomial, SystemParams
from .observable import (
    equilibrium_threshold,
    revenue,
    revenue_optimal_threshold,
    social_welfare,
    socially_optimal_threshold,
)
from .sim import ServiceDistribution, SimConfig, simulate_observable, simulate_unobservable, total_variation
from .unobservable import equilibrium_join_prob, optimal_join_prob, revenue_unobservable

MODES = ("obs", "unobs", "both")
Z_LIMIT = 4.0
TV_LIMIT = 0.01


class SpecError(ValueError):
    """Invalid sweep specification; the message names the field and, for config files, the line."""


@dataclass(frozen=True)
class SweepSpec:
    rho_min: float = 0.5
    rho_max: float = 20.0
    rho_step: float = 0.5
    mu: float = 1.0
    reward: float = 15.0
    cost: tuple[float, ...] = (1.0, 0.0)
    mode: str = "both"
    simulate: bool = False
    out: str | None = None
    seed: int = 0
    threshold: int | None = None
    replications: int = 20
    horizon: float | None = None
    service: str = "exponential"
    sigma: float = 1.0
    workers: int = 1

    def validate(self) -> SweepSpec:
        for name in ("rho_min", "rho_step", "mu", "reward"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise SpecError(f"{name}: must be > 0, got {value!r}")
        if not math.isfinite(self.rho_max) or self.rho_max < self.rho_min:
            raise SpecError(f"rho_max: grid is empty ({self.rho_min} .. {self.rho_max})")
        if self.mode not in MODES:
            raise SpecError(f"mode: must be one of {MODES}, got {self.mode!r}")
        try:
            CostPolynomial(self.cost)
        except ValueError as exc:
            raise SpecError(f"cost: {exc}") from None
        if not 0 <= self.seed < 2**64:
            raise SpecError(f"seed: must be an unsigned 64-bit integer, got {self.seed}")
        if self.threshold is not None and self.threshold < 0:
            raise SpecError(f"threshold: must be >= 0, got {self.threshold}")
        if self.replications < 1:
            raise SpecError(f"replications: must be >= 1, got {self.replications}")
        if self.horizon is not None and not self.horizon > 0:
            raise SpecError(f"horizon: must be > 0, got {self.horizon}")
        if self.workers < 1:
            raise SpecError(f"workers: must be >= 1, got {self.workers}")
        try:
            ServiceDistribution(self.service, 1.0, self.sigma)
        except ValueError as exc:
            raise SpecError(f"service: {exc}") from None
        return self

    def grid(self) -> list[float]:
        count = int(math.floor((self.rho_max - self.rho_min) / self.rho_step * (1 + 1e-12) + 1e-9)) + 1
        return [self.rho_min + k * self.rho_step for k in range(count)]

    def params(self, rho: float) -> SystemParams:
        return SystemParams.from_load(rho, self.mu, self.reward)

    def cost_polynomial(self) -> CostPolynomial:
        return CostPolynomial(self.cost)


# ---------------------------------------------------------------- config files

def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_cost(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    if not parts or any(not p for p in parts):
        raise ValueError(f"expected comma-separated coefficients, got {text!r}")
    return tuple(float(p) for p in parts)


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none") else int(text)


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none") else float(text)


_PARSERS = {
    "rho_min": float, "rho_max": float, "rho_step": float, "mu": float,
    "reward": float, "cost": _parse_cost, "mode": str.strip, "simulate": _parse_bool,
    "out": str.strip, "seed": int, "threshold": _optional_int,
    "replications": int, "horizon": _optional_float, "service": str.strip,
    "sigma": float, "workers": int,
}


def load_config(path: str | Path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment.  Keys use ``_`` or ``-``."""
    values = {}
    path = Path(path)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, text = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _PARSERS:
            raise SpecError(f"{path}:{lineno}: unknown field {key!r}")
        try:
            values[key] = _PARSERS[key](text)
        except ValueError as exc:
            raise SpecError(f"{path}:{lineno}: field {key!r}: {exc}") from None
    return values


def build_spec(file_values: dict | None = None, overrides: dict | None = None) -> SweepSpec:
    """Defaults, then config-file values, then flag overrides (flags win)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in fields(SweepSpec)}
    unknown = set(merged) - known
    if unknown:
        raise SpecError(f"unknown fields: {sorted(unknown)}")
    return SweepSpec(**merged).validate()


# ------------------------------------------------------------------------- CSV

def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ----------------------------------------------------------------------- sweep

OBS_COLUMNS = [
    "n_e", "n_s", "n_m", "S^r(n_e)", "S^r(n_s)", "S^r(n_m)",
    "S^r_m(n_s)", "S^r_m(n_m)", "P_o",
]
UNOBS_COLUMNS = ["q_e", "q_opt", "P_u", "S_q_opt"]


def sweep_columns(n_coeffs: int) -> list[str]:
    return (
        ["rho", "lambda", "mu", "R"]
        + [f"C{i}" for i in range(1, n_coeffs + 1)]
        + OBS_COLUMNS
        + UNOBS_COLUMNS
    )


def evaluate_point(params: SystemParams, cost: CostPolynomial, mode: str = "both") -> dict:
    """One sweep row."""
    row = {"rho": params.rho, "lambda": params.lam, "mu": params.mu, "R": params.reward}
    row.update({f"C{i}": c for i, c in enumerate(cost.coeffs, start=1)})
    if mode in ("obs", "both"):
        n_e = equilibrium_threshold(params, cost)
        n_s = socially_optimal_threshold(params, cost, n_e)
        n_m, price = revenue_optimal_threshold(params, cost, n_e)
        row.update({
            "n_e": n_e, "n_s": n_s, "n_m": n_m,
            "S^r(n_e)": social_welfare(params, cost, n_e),
            "S^r(n_s)": social_welfare(params, cost, n_s),
            "S^r(n_m)": social_welfare(params, cost, n_m),
            "S^r_m(n_s)": revenue(params, cost, n_s),
            "S^r_m(n_m)": revenue(params, cost, n_m),
            "P_o": price,
        })
    if mode in ("unobs", "both"):
        opt = optimal_join_prob(params, cost)
        row.update({
            "q_e": equilibrium_join_prob(params, cost),
            "q_opt": opt.q, "P_u": opt.price, "S_q_opt": opt.revenue,
        })
    return row


def _point(args) -> dict:
    spec, rho = args
    return evaluate_point(spec.params(rho), spec.cost_polynomial(), spec.mode)


def sweep_rows(spec: SweepSpec) -> list[dict]:
    """Rows in grid order; with ``workers > 1`` points are evaluated in parallel."""
    jobs = [(spec, rho) for rho in spec.grid()]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(_point, jobs))
    return [_point(j) for j in jobs]


def summarize_sweep(rows: list[dict]) -> str:
    lines = [f"grid points: {len(rows)} (rho {rows[0]['rho']!r} .. {rows[-1]['rho']!r})"]
    if "n_s" in rows[0]:
        ordered = all(r["n_m"] <= r["n_s"] <= r["n_e"] for r in rows)
        lines.append(f"n_m <= n_s <= n_e at every point: {'yes' if ordered else 'NO'}")
    if "n_s" in rows[0] and "S_q_opt" in rows[0]:
        dominates = all(r["S^r(n_s)"] >= r["S_q_opt"] for r in rows)
        lines.append(f"S^r(n_s) >= S(q_opt) at every point: {'yes' if dominates else 'NO'}")
        diff = [r["S^r_m(n_m)"] - r["S_q_opt"] for r in rows]
        crossings = [
            (rows[k]["rho"], rows[k + 1]["rho"])
            for k in range(len(rows) - 1)
            if np.sign(diff[k]) != np.sign(diff[k + 1])
        ]
        if crossings:
            spans = ", ".join(f"({a!r}, {b!r}]" for a, b in crossings)
            lines.append(f"S^r_m(n_m) - S(q_opt) changes sign in: {spans}")
        else:
            lines.append("S^r_m(n_m) - S(q_opt) does not change sign on the grid")
    return "\n".join(lines) + "\n"


def run_sweep(spec: SweepSpec) -> tuple[str, str]:
    """Evaluate the grid; returns ``(csv_text, summary)`` and writes ``spec.out`` if set."""
    rows = sweep_rows(spec)
    text = to_csv(rows, sweep_columns(len(spec.cost)))
    if spec.out:
        write_text(spec.out, text)
    return text, summarize_sweep(rows)


# -------------------------------------------------------------- worked example

EXAMPLE_PARAMS = SystemParams(lam=20.0, mu=1.0 / 60.0, reward=400.0)
EXAMPLE_COST = CostPolynomial((0.0, 0.01))
#: Reference values for the worked example, as printed to two decimals.
EXAMPLE_PRINTED = {
    "n_e": 201, "n_s": 116, "n_m": 116, "q_e": 1 / 6, "q_opt": math.sqrt(3) / 18,
    "S^r(n_s)": 517.64, "S^r(n_e)": 2.66, "P_o": 265.44, "S^r_m(n_m)": 512.71,
    "P_u": 266.67, "S(q_e)": 0.0, "S(q_opt)": 513.20,
}


@dataclass
class ExampleLine:
    name: str
    computed: float
    printed: float
    note: str = ""

    @property
    def matches(self) -> bool:
        return abs(self.computed - self.printed) <= 0.005 + 1e-9

    def render(self) -> str:
        if isinstance(self.computed, int):
            full, short = str(self.computed), str(self.computed)
        else:
            full, short = f"{self.computed:.10f}", f"{self.computed:.2f}"
        printed = self.printed if isinstance(self.printed, int) else f"{self.printed:.2f}"
        status = "match" if self.matches else "MISMATCH"
        text = f"{self.name:<34}{full:>18}{short:>12}{printed:>10}  {status}"
        return text + (f"  ({self.note})" if self.note else "")


def example_lines() -> list[ExampleLine]:
    p, c = EXAMPLE_PARAMS, EXAMPLE_COST
    n_e = equilibrium_threshold(p, c)
    n_s = socially_optimal_threshold(p, c, n_e)
    n_m, price = revenue_optimal_threshold(p, c, n_e)
    q_e = equilibrium_join_prob(p, c)
    opt = optimal_join_prob(p, c)
    alt_price = p.reward - c(n_m)
    alt_revenue = p.mu * expected_occupancy(p.rho, n_m) * alt_price
    pr = EXAMPLE_PRINTED
    return [
        ExampleLine("n_e", n_e, pr["n_e"]),
        ExampleLine("n_s", n_s, pr["n_s"]),
        ExampleLine("n_m", n_m, pr["n_m"]),
        ExampleLine("q_e", q_e, pr["q_e"], "printed 1/6"),
        ExampleLine("q_opt", opt.q, pr["q_opt"], "printed sqrt(3)/18"),
        ExampleLine("S^r(n_s)", social_welfare(p, c, n_s), pr["S^r(n_s)"]),
        ExampleLine("S^r(n_e)", social_welfare(p, c, n_e), pr["S^r(n_e)"]),
        ExampleLine("P_o = R - cost(n_m - 1)", price, pr["P_o"], "threshold convention"),
        ExampleLine("P_o = R - cost(n_m)", alt_price, pr["P_o"], "printed value's convention"),
        ExampleLine("S^r_m(n_m), price R - cost(n_m - 1)", revenue(p, c, n_m), pr["S^r_m(n_m)"],
                    "threshold convention"),
        ExampleLine("S^r_m(n_m), price R - cost(n_m)", alt_revenue, pr["S^r_m(n_m)"],
                    "printed value's convention"),
        ExampleLine("P_u", opt.price, pr["P_u"]),
        ExampleLine("S(q_e)", revenue_unobservable(p, c, q_e), pr["S(q_e)"]),
        ExampleLine("S(q_opt)", opt.revenue, pr["S(q_opt)"]),
    ]


def run_example_report() -> str:
    p = EXAMPLE_PARAMS
    header = [
        "Worked example: lam = 20 per minute, mean sojourn 60 minutes (rho = 1200),",
        "R = 400, cost = 0.01 n^2.",
        "",
        f"{'quantity':<34}{'computed':>18}{'2 dp':>12}{'printed':>10}  status",
    ]
    body = [line.render() for line in example_lines()]
    footer = [
        "",
        "Prices use cost(n - 1) for threshold n (join iff fewer than n present).",
        "The printed P_o and S^r_m(n_m) correspond to cost(n_m) instead; both",
        "conventions are shown above and the cost(n_m) rows reproduce them.",
        f"(rho = {p.rho!r}, mu = {p.mu!r})",
    ]
    return "\n".join(header + body + footer) + "\n"


# ------------------------------------------------------------------ validation

VALIDATION_COLUMNS = [
    "rho", "model", "policy", "service", "quantity", "analytic", "simulated", "se", "z",
]


def default_horizon(params: SystemParams) -> float:
    """Per-replication horizon: at least 200 mean services and 5e4 expected arrivals."""
    return max(200.0 / params.mu, 5e4 / params.lam)


def _z(sim: float, se: float, exact: float) -> float | None:
    if not se > 0:
        return None
    return (sim - exact) / se


def validate_point(spec: SweepSpec, rho: float) -> list[dict]:
    params = spec.params(rho)
    cost = spec.cost_polynomial()
    service = ServiceDistribution.for_rate(spec.service, params.mu, spec.sigma)
    horizon = spec.horizon if spec.horizon is not None else default_horizon(params)
    base = dict(params=params, service=service, horizon=horizon, seed=spec.seed,
                replications=spec.replications, cost=cost)
    rows = []

    def add(model, policy, quantity, exact, sim, se):
        rows.append({"rho": rho, "model": model, "policy": policy, "service": spec.service,
                     "quantity": quantity, "analytic": exact, "simulated": sim, "se": se,
                     "z": None if se is None else _z(sim, se, exact)})

    if spec.mode in ("obs", "both"):
        n = spec.threshold if spec.threshold is not None else socially_optimal_threshold(params, cost)
        res = simulate_observable(SimConfig(threshold=n, **base))
        exact_pmf = occupancy_distribution(rho, n).probs
        policy = f"n={n}"
        add("obs", policy, "tv_time_average", 0.0, total_variation(res.occupancy_pmf, exact_pmf), None)
        add("obs", policy, "tv_arrival_seen", 0.0, total_variation(res.arrival_pmf, exact_pmf), None)
        add("obs", policy, "mean_occupancy", expected_occupancy(rho, n),
            res.mean_occupancy, res.mean_occupancy_se)
        add("obs", policy, "welfare", social_welfare(params, cost, n),
            res.welfare_estimate, res.welfare_se)
        if n >= 1:
            add("obs", policy, "revenue", revenue(params, cost, n),
                res.revenue_estimate, res.revenue_se)
    if spec.mode in ("unobs", "both"):
        q = optimal_join_prob(params, cost).q
        res = simulate_unobservable(SimConfig(join_prob=q, **base))
        policy = f"q={q!r}"
        add("unobs", policy, "mean_occupancy", rho * q, res.mean_occupancy, res.mean_occupancy_se)
        add("unobs", policy, "revenue", revenue_unobservable(params, cost, q),
            res.revenue_estimate, res.revenue_se)
    return rows


def _validate(args) -> list[dict]:
    return validate_point(*args)


def run_validation(spec: SweepSpec) -> tuple[str, str, bool]:
    """Simulate every grid point; returns ``(csv_text, summary, ok)``.

    ``ok`` is false when any |z| exceeds ``Z_LIMIT``.
    """
    jobs = [(spec, rho) for rho in spec.grid()]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = [r for chunk in pool.map(_validate, jobs) for r in chunk]
    else:
        rows = [r for job in jobs for r in _validate(job)]
    text = to_csv(rows, VALIDATION_COLUMNS)
    if spec.out:
        write_text(spec.out, text)
    zs = [abs(r["z"]) for r in rows if r["z"] is not None]
    tvs = [r for r in rows if r["quantity"].startswith("tv_")]
    ok = all(z <= Z_LIMIT for z in zs)
    lines = [f"validated {len(jobs)} grid point(s), service = {spec.service}"]
    if tvs:
        worst = max(r["simulated"] for r in tvs)
        verdict = "pass" if worst < TV_LIMIT else "FAIL"
        lines.append(f"max total-variation distance {worst:.5f} (insensitivity {verdict} at {TV_LIMIT})")
    if zs:
        lines.append(f"max |z| {max(zs):.3f} (limit {Z_LIMIT})")
    for r in rows:
        if r["z"] is not None and abs(r["z"]) > Z_LIMIT:
            lines.append(f"  FAIL rho={r['rho']!r} {r['model']} {r['quantity']}: z = {r['z']:.3f}")
    lines.append("status: " + ("ok" if ok else "FAILED"))
    return text, "\n".join(lines) + "\n", ok


def with_overrides(spec: SweepSpec, **changes) -> SweepSpec:
    return replace(spec, **changes).validate()
