"""Maximization of Bell violations, bisection for critical efficiencies,
curve fitting, and order-preserving parameter sweeps.

The workhorse is multi-start Nelder-Mead over bounded boxes.  Bisection
probes are warm-started from the optima of neighbouring probes, which is
what lets the search track the vanishing-amplitude ridge down to the
threshold, where violations shrink below 1e-6.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

VIOLATION_TOL = 1e-9  # below threshold the supremum is exactly 0, so sign
                      # tests must tolerate rounding dust around it

DEFAULT_RESTARTS = 32
DEFAULT_TOL = 5e-4


@dataclass(frozen=True)
class OptimizationProblem:
    """A Bell expression to maximize over state and setting parameters.

    violation(x, eta, n_max) must return (inequality value - classical
    bound) and be deterministic.  alpha_indices marks which entries of x
    are displacement amplitudes, for robustness scans.
    """

    name: str
    param_names: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]
    violation: Callable[[np.ndarray, float, int], float]
    inequality_name: str
    uses_truncation: bool = False
    symmetric: bool = True
    alpha_indices: tuple[int, ...] = ()
    start_bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if len(self.bounds) != len(self.param_names):
            raise ValueError("one bound per parameter required")
        if not self.param_names:
            raise ValueError("need at least one free parameter")
        for lo, hi in self.bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bad bound ({lo}, {hi})")
        if self.start_bounds is None:
            object.__setattr__(self, "start_bounds", self.bounds)
        elif len(self.start_bounds) != len(self.bounds):
            raise ValueError("one start bound per parameter required")

    def params_dict(self, x: np.ndarray) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.param_names, x)}


@dataclass
class MaximizeResult:
    value: float
    x: np.ndarray
    n_evaluations: int
    all_converged: bool


@dataclass
class ThresholdResult:
    """Critical efficiency with the trace of the search that produced it."""

    eta_critical: float
    optimal_params: dict[str, float]
    bisection_trace: list[tuple[float, float]]
    n_max_used: int
    converged: bool
    bracket: tuple[float, float]
    violation_above: float
    truncation_delta: float | None = None
    notes: tuple[str, ...] = ()

    def trace_changes_sign_once(self, violation_tol: float = VIOLATION_TOL) -> bool:
        ordered = sorted(self.bisection_trace)
        flags = [v > violation_tol for _, v in ordered]
        return flags == sorted(flags)


def _nm_options(n_params: int, maxfev: int | None):
    if maxfev is None:
        maxfev = 400 if n_params <= 3 else 250 * n_params
    return {
        "maxfev": maxfev,
        "xatol": 1e-9,
        "fatol": 1e-14,
        "adaptive": n_params > 4,
    }


def maximize_violation(
    problem: OptimizationProblem,
    eta: float,
    *,
    n_max: int = 20,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    warm_starts: Sequence[np.ndarray] = (),
    maxfev: int | None = None,
) -> MaximizeResult:
    """Best found (violation, parameters) at fixed efficiency.

    Runs Nelder-Mead from `restarts` uniform draws over the bounded box plus
    any warm starts, then polishes the winner once more.  Deterministic for
    a given seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0x7FFFFFFF, 17]))
    lo = np.array([b[0] for b in problem.bounds])
    hi = np.array([b[1] for b in problem.bounds])
    start_lo = np.array([b[0] for b in problem.start_bounds])
    start_hi = np.array([b[1] for b in problem.start_bounds])

    def objective(x):
        return -problem.violation(x, eta, n_max)

    starts = [np.asarray(w, dtype=float) for w in warm_starts]
    starts += [rng.uniform(start_lo, start_hi) for _ in range(restarts)]

    options = _nm_options(len(lo), maxfev)
    best_x, best_f = None, math.inf
    n_eval = 0
    all_ok = True
    for x0 in starts:
        res = minimize(
            objective,
            np.clip(x0, lo, hi),
            method="Nelder-Mead",
            bounds=problem.bounds,
            options=options,
        )
        n_eval += res.nfev
        all_ok = all_ok and bool(res.success)
        if res.fun < best_f:
            best_f, best_x = res.fun, res.x
    # polish the winner from a fresh simplex
    res = minimize(
        objective,
        best_x,
        method="Nelder-Mead",
        bounds=problem.bounds,
        options=options,
    )
    n_eval += res.nfev
    if res.fun < best_f:
        best_f, best_x = res.fun, res.x
    return MaximizeResult(-best_f, np.asarray(best_x), n_eval, all_ok)


def find_threshold(
    problem: OptimizationProblem,
    eta_lo: float,
    eta_hi: float,
    *,
    tol: float = DEFAULT_TOL,
    n_max: int = 20,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    probe_restarts: int = 8,
    violation_tol: float = VIOLATION_TOL,
    verify: bool = True,
    global_starts: Sequence[np.ndarray] = (),
) -> ThresholdResult:
    """Bisect the efficiency axis for the onset of violation.

    The bracket ends get the full multi-start treatment; interior probes are
    warm-started from the nearest probes on both sides plus a few fresh
    random starts, which is both faster and more reliable near the threshold
    where the optimum parameters shrink towards zero.  global_starts are
    extra candidate settings injected into every probe (e.g. from a direct
    threshold minimization).
    """
    if not (0.0 <= eta_lo < eta_hi <= 1.0):
        raise ValueError(f"bad bracket ({eta_lo}, {eta_hi})")

    trace: list[tuple[float, float]] = []
    optima: list[tuple[float, np.ndarray]] = []
    notes: list[str] = []
    probe_index = 0

    def probe(eta, n_restarts):
        nonlocal probe_index
        near = sorted(optima, key=lambda p: abs(p[0] - eta))[:4]
        warm = [x for _, x in near] + [np.asarray(g) for g in global_starts]
        result = maximize_violation(
            problem,
            eta,
            n_max=n_max,
            restarts=n_restarts,
            seed=seed * 1_000_003 + probe_index,
            warm_starts=warm,
        )
        probe_index += 1
        trace.append((float(eta), float(result.value)))
        optima.append((float(eta), result.x))
        return result

    low = probe(eta_lo, restarts)
    if low.value > violation_tol:
        raise ValueError(
            f"bracket invalid: violation {low.value:.3e} already at eta = {eta_lo}"
        )
    high = probe(eta_hi, restarts)
    if high.value <= violation_tol:
        raise ValueError(
            f"bracket invalid: no violation found at eta = {eta_hi} "
            f"(best {high.value:.3e})"
        )

    lo, hi = eta_lo, eta_hi
    hi_result = high
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        result = probe(mid, probe_restarts)
        if result.value > violation_tol:
            hi, hi_result = mid, result
        else:
            lo = mid

    eta_tilde = 0.5 * (lo + hi)
    converged = True

    if verify:
        # post-hoc monotonicity spot checks around the reported threshold
        below = [eta_tilde - 5 * tol, eta_tilde - tol]
        above = [eta_tilde + tol, eta_tilde + 5 * tol, eta_tilde + 25 * tol]
        below_vals = [probe(max(e, 0.0), probe_restarts).value for e in below]
        above_vals = [probe(min(e, 1.0), probe_restarts).value for e in above]
        if any(v > violation_tol for v in below_vals):
            converged = False
            notes.append("violation found below the reported threshold")
        if any(v <= violation_tol for v in above_vals):
            converged = False
            notes.append("violation lost above the reported threshold")
        if any(b > a + 1e-7 for a, b in zip(above_vals[1:], above_vals[:-1])):
            converged = False
            notes.append("violation not monotone above the threshold")

    result = ThresholdResult(
        eta_critical=float(eta_tilde),
        optimal_params=problem.params_dict(hi_result.x),
        bisection_trace=trace,
        n_max_used=n_max,
        converged=converged,
        bracket=(lo, hi),
        violation_above=float(hi_result.value),
        notes=tuple(notes),
    )
    if not result.trace_changes_sign_once(violation_tol):
        result.converged = False
        result.notes = result.notes + ("bisection trace not monotone",)
    return result


def pauli_threshold_formula(n_parties: int) -> float:
    """Critical efficiency 2 / (3 - 1/N) for ideal qubit measurements."""
    return 2.0 / (3.0 - 1.0 / n_parties)


def fit_threshold_curve(points: Sequence[tuple[int, float]]):
    """Least-squares fit of eta(N) = a / (b - 1/N); returns (a, b, rms)."""
    if len(points) < 3:
        raise ValueError("need at least three points to fit")
    ns = np.array([float(n) for n, _ in points])
    etas = np.array([e for _, e in points])

    def residual(p):
        a, b = p
        return a / (b - 1.0 / ns) - etas

    fit = least_squares(residual, x0=(2.0, 3.0))
    if not fit.success:
        raise RuntimeError(f"threshold-curve fit failed: {fit.message}")
    a, b = fit.x
    rms = float(np.sqrt(np.mean(residual(fit.x) ** 2)))
    return float(a), float(b), rms


@dataclass
class RobustnessResult:
    baseline: float
    perturbed: float
    shift: float
    perturbation: float


def robustness_scan(
    problem: OptimizationProblem,
    perturbation: float,
    *,
    eta_lo: float,
    eta_hi: float,
    tol: float = DEFAULT_TOL,
    n_max: int = 20,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    probe_restarts: int = 8,
) -> RobustnessResult:
    """Threshold shift when every displacement amplitude is off by +-perturbation.

    At each probed efficiency the problem is optimized as usual and the
    optimum is then evaluated with all amplitudes scaled by
    (1 + s * perturbation) for every sign pattern s; the worst pattern
    counts and nothing is re-optimized (the working point is simply off).
    The unperturbed threshold runs through the same machinery with scale 1,
    so a zero perturbation yields a shift of exactly zero.
    """
    if not problem.alpha_indices:
        raise ValueError("problem declares no displacement amplitudes to perturb")
    idx = np.array(problem.alpha_indices)
    scales = sorted(
        {
            tuple(1.0 + (2.0 * np.array(bits) - 1.0) * perturbation)
            for bits in np.ndindex(*(2 for _ in idx))
        }
    )

    def pinned_value(eta, x_base, scale):
        pinned = x_base.copy()
        pinned[idx] = pinned[idx] * np.array(scale)
        return problem.violation(pinned, eta, n_max)

    def bisect(worst_case: bool) -> float:
        optima: list[tuple[float, np.ndarray]] = []
        probe_index = 0
        active_scales = scales if worst_case else [tuple(1.0 for _ in idx)]

        def probe(eta):
            nonlocal probe_index
            near = sorted(optima, key=lambda p: abs(p[0] - eta))[:4]
            result = maximize_violation(
                problem,
                eta,
                n_max=n_max,
                restarts=restarts if probe_index < 2 else probe_restarts,
                seed=seed * 1_000_003 + probe_index,
                warm_starts=[x for _, x in near],
            )
            probe_index += 1
            optima.append((float(eta), result.x))
            return min(pinned_value(eta, result.x, s) for s in active_scales)

        if probe(eta_lo) > VIOLATION_TOL:
            raise ValueError(f"violation already present at eta = {eta_lo}")
        if probe(eta_hi) <= VIOLATION_TOL:
            raise ValueError(f"no violation at eta = {eta_hi}")
        lo, hi = eta_lo, eta_hi
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if probe(mid) > VIOLATION_TOL:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    baseline = bisect(worst_case=False)
    perturbed = bisect(worst_case=True)
    return RobustnessResult(
        baseline=baseline,
        perturbed=perturbed,
        shift=perturbed - baseline,
        perturbation=perturbation,
    )


def sweep(points: Sequence, evaluator: Callable, workers: int = 1) -> list[dict]:
    """Evaluate all grid points, preserving input order.

    Individual failures are recorded per point and never abort the sweep.
    With workers > 1 the points run in a process pool; the evaluator and the
    points must then be picklable.
    """
    results = [None] * len(points)

    def pack(point, value=None, error=None):
        return {"point": point, "value": value, "error": error}

    if workers <= 1 or len(points) <= 1:
        for i, point in enumerate(points):
            try:
                results[i] = pack(point, value=evaluator(point))
            except Exception as exc:  # noqa: BLE001 - recorded, not raised
                results[i] = pack(point, error=repr(exc))
        return results

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {i: pool.submit(evaluator, p) for i, p in enumerate(points)}
        for i, future in futures.items():
            try:
                results[i] = pack(points[i], value=future.result())
            except Exception as exc:  # noqa: BLE001
                results[i] = pack(points[i], error=repr(exc))
    return results
