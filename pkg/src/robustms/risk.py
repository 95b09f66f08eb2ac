"""Monte Carlo and closed-form risk of the filters and of the selected estimator.

All losses are computed in the coefficient domain through Parseval, so a
replicate's integrated squared error is exact given its noise draw.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Callable, Sequence

import numpy as np

from . import _seeding
from .noise import NoisePanel
from .selection import (
    WeightGrid,
    WeightSequence,
    default_rho,
    grid_costs,
    oracle_weight_alpha0,
    tau,
    weight_grid,
)
from .signal import PeriodicSignal, make_test_signal, sobolev_weight, worst_case_coordinate
from .spectral import simulate_spectral_noise

log = logging.getLogger(__name__)


# ----------------------------------------------------------------------------
# closed forms


def mise(estimate_coeffs, signal: PeriodicSignal) -> float:
    """||S_hat - S||^2 by Parseval.

    Exact when the estimate has no more coefficients than the signal; beyond
    the signal's stored coefficients the unknown tail is treated as orthogonal
    to the estimate (see ``mise_interval`` for rigorous bounds).
    """
    c = np.asarray(estimate_coeffs, dtype=float)
    L = max(c.size, signal.J)
    cc = np.zeros(L)
    cc[: c.size] = c
    return math.fsum((cc - signal.padded(L)) ** 2) + signal.tail_bound


def mise_interval(estimate_coeffs, signal: PeriodicSignal) -> tuple:
    """Lower and upper bounds on ||S_hat - S||^2 given only the tail bound."""
    c = np.asarray(estimate_coeffs, dtype=float)
    J = signal.J
    head_c = np.zeros(J)
    head_c[: min(J, c.size)] = c[:J]
    head = math.fsum((head_c - signal.coeffs) ** 2)
    extra = math.sqrt(math.fsum(c[J:] ** 2)) if c.size > J else 0.0
    root_tail = math.sqrt(signal.tail_bound)
    lo = head + max(0.0, extra - root_tail) ** 2
    hi = head + (extra + root_tail) ** 2
    return lo, hi


def _gamma_vector(gamma, n: int) -> np.ndarray:
    if isinstance(gamma, WeightSequence):
        return gamma.values(n)
    g = np.asarray(gamma, dtype=float)
    out = np.zeros(n)
    out[: g.size] = g[:n]
    return out


def gaussian_risk_exact(signal: PeriodicSignal, gamma, sigma_star: float, n: int) -> float:
    """Risk of the filter under white noise of intensity sigma*.

    sum_j (1 - gamma_j)^2 theta_j^2 + (sigma*/n) sum_j gamma_j^2, plus the
    signal's tail energy (the filters vanish there).
    """
    g = _gamma_vector(gamma, n)
    theta = signal.padded(n)
    bias = math.fsum((1.0 - g) ** 2 * theta**2) + signal.tail_bound
    return bias + sigma_star / n * math.fsum(g**2)


def pinsker_constant(k: int, r: float, sigma_star: float) -> float:
    """((2k+1) r)^{1/(2k+1)} (sigma* k / ((k+1) pi))^{2k/(2k+1)}."""
    if k < 1 or not r > 0 or not sigma_star > 0:
        raise ValueError("need k >= 1, r > 0, sigma* > 0")
    p = 1.0 / (2 * k + 1)
    return ((2 * k + 1) * r) ** p * (sigma_star * k / ((k + 1) * math.pi)) ** (2 * k * p)


def oracle_coefficient(rho: float) -> float:
    """(1 + 3 rho - 2 rho^2) / (1 - 3 rho)."""
    if not 0 < rho < 1.0 / 3.0:
        raise ValueError("rho must lie in (0, 1/3)")
    return (1.0 + 3.0 * rho - 2.0 * rho * rho) / (1.0 - 3.0 * rho)


def worst_case_signal(gamma, k: int, r: float, n: int) -> PeriodicSignal:
    """Boundary signal on W^k_r maximizing the filter's bias.

    Puts all ellipsoid mass on the single coordinate maximizing
    (1 - gamma_j)^2 / a_j, which attains the supremum of the bias term.
    """
    g = _gamma_vector(gamma, n)
    j = worst_case_coordinate(g, k)
    return make_test_signal("boundary_ellipsoid", J=n, k=k, r=r, coords=[j], label=f"worst(j={j})")


@dataclass(frozen=True)
class UpperBoundTerms:
    upsilon1_star: float
    upsilon2_star: float
    reconstruction: float
    pinsker: float
    upsilon1_n: float | None = None
    upsilon2_n: float | None = None


def upper_bound_terms(k: int, r: float, sigma_star: float, n: int | None = None, eps: float | None = None):
    """Limits of the bias and variance parts of the pilot filter's risk.

    Returns Upsilon*_1 = r^{1/(2k+1)} / (pi^{2k} tau_k^{2k/(2k+1)}),
    Upsilon*_2 = 2 tau_k^{1/(2k+1)} k^2 / ((k+1)(2k+1)) and their recombination
    sigma*^{2k/(2k+1)} Upsilon*_1 + sigma* (r/sigma*)^{1/(2k+1)} Upsilon*_2,
    which equals the Pinsker constant. With ``n`` given, also the finite-n
    counterparts for the pilot filter: the normalized worst bias
    r * n^{2k/(2k+1)} sup_{j > j0} (1 - gamma_0(j))^2 / a_j and
    n^{-1/(2k+1)} sum gamma_0(j)^2.
    """
    p = 1.0 / (2 * k + 1)
    tk = tau(k)
    u1 = r**p / (math.pi ** (2 * k) * tk ** (2 * k * p))
    u2 = 2.0 * tk**p * k * k / ((k + 1) * (2 * k + 1))
    recon = sigma_star ** (2 * k * p) * u1 + sigma_star * (r / sigma_star) ** p * u2
    u1n = u2n = None
    if n is not None:
        eps = 1.0 / math.log(n + 1) if eps is None else eps
        g0 = oracle_weight_alpha0(k, r, sigma_star, n, eps).gamma
        g = g0.values(max(n, g0.support + 2))
        a = sobolev_weight(np.arange(1, g.size + 1), k)
        u1n = r * n ** (2 * k * p) * float(np.max((1.0 - g) ** 2 / a))
        u2n = n ** (-p) * math.fsum(g[:n] ** 2)
    return UpperBoundTerms(u1, u2, recon, pinsker_constant(k, r, sigma_star), u1n, u2n)


# ----------------------------------------------------------------------------
# Monte Carlo engine


@dataclass(frozen=True)
class FixedGamma:
    gamma: WeightSequence


@dataclass(frozen=True)
class ModelSelect:
    grid: WeightGrid
    rho: float


@dataclass
class _Batch:
    """Per-replicate losses for one noise model: axes (signal, replicate, filter)."""

    fixed: np.ndarray
    selected: np.ndarray
    chosen: np.ndarray


def _replicate_block(signals, model, n, reps, master_seed, gammas, grid, rho):
    # gammas: F x n filter matrix; when a grid is given its members are the first rows
    S, F = len(signals), gammas.shape[0]
    fixed = np.empty((S, len(reps), F))
    selected = np.full((S, len(reps)), np.nan)
    chosen = np.full((S, len(reps)), -1, dtype=np.int64)
    thetas = [s.padded(n) for s in signals]
    tails = [s.tail_bound for s in signals]
    sqrt_n = math.sqrt(n)
    G = gammas
    for r_i, rep in enumerate(reps):
        xi = simulate_spectral_noise(model, n, n, _seeding.replicate_seed(master_seed, n, rep))
        for s_i, theta in enumerate(thetas):
            theta_hat = theta + xi / sqrt_n
            diff = G * theta_hat - theta
            losses = np.einsum("ij,ij->i", diff, diff) + tails[s_i]
            fixed[s_i, r_i] = losses
            if grid is not None:
                idx = int(np.argmin(grid_costs(theta_hat, grid, rho)))
                chosen[s_i, r_i] = idx
                selected[s_i, r_i] = losses[idx]
    return fixed, selected, chosen


def _chunks(replicates: int, workers: int):
    size = max(1, math.ceil(replicates / (4 * workers)))
    return [range(a, min(a + size, replicates)) for a in range(0, replicates, size)]


def _simulate(signals, model, n, replicates, master_seed, gammas, grid=None, rho=None, workers=1) -> _Batch:
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    args = (signals, model, n)
    tail = (master_seed, gammas, grid, rho)
    if workers <= 1:
        parts = [_replicate_block(*args, range(replicates), *tail)]
    else:
        with ProcessPoolExecutor(workers, mp_context=get_context("spawn")) as pool:
            futs = [pool.submit(_replicate_block, *args, ch, *tail) for ch in _chunks(replicates, workers)]
            parts = [f.result() for f in futs]
    return _Batch(
        np.concatenate([p[0] for p in parts], axis=1),
        np.concatenate([p[1] for p in parts], axis=1),
        np.concatenate([p[2] for p in parts], axis=1),
    )


def _mean_se(x: np.ndarray) -> tuple:
    """Mean (compensated sum in replicate order) and standard error along the last axis."""
    x = np.asarray(x, dtype=float)
    R = x.shape[-1]
    flat = x.reshape(-1, R)
    means = np.array([math.fsum(row) / R for row in flat])
    sd = np.array([math.sqrt(math.fsum((row - m) ** 2) / (R - 1)) for row, m in zip(flat, means)])
    shape = x.shape[:-1]
    return means.reshape(shape), (sd / math.sqrt(R)).reshape(shape)


@dataclass(frozen=True)
class MCRisk:
    mean: float
    std_error: float
    replicates: int
    selection_frequency: dict = field(default_factory=dict)


def mc_risk(signal, model, estimator, n, replicates, master_seed, workers=1) -> MCRisk:
    """Monte Carlo MISE of a fixed filter or of the selection procedure."""
    if isinstance(estimator, FixedGamma):
        G = estimator.gamma.values(n)[None, :]
        batch = _simulate([signal], model, n, replicates, master_seed, G, workers=workers)
        m, se = _mean_se(batch.fixed[0, :, 0])
        return MCRisk(float(m), float(se), replicates)
    if isinstance(estimator, ModelSelect):
        grid = estimator.grid
        batch = _simulate([signal], model, n, replicates, master_seed, grid.matrix, grid, estimator.rho, workers)
        m, se = _mean_se(batch.selected[0])
        return MCRisk(float(m), float(se), replicates, selection_frequency(batch.chosen[0], grid))
    raise TypeError(f"unknown estimator {estimator!r}")


def selection_frequency(chosen: np.ndarray, grid: WeightGrid) -> dict:
    idx, counts = np.unique(chosen, return_counts=True)
    return {grid.members[i].alpha: int(c) for i, c in zip(idx, counts)}


@dataclass(frozen=True)
class RobustRisk:
    max_risk: float
    std_error: float
    argmax_model: str
    table: tuple  # (model name, mean, se)


def robust_risk(signal, panel: NoisePanel, estimator, n, replicates, seed, workers=1) -> RobustRisk:
    """Largest Monte Carlo risk over the panel members."""
    rows = []
    for model in panel:
        res = mc_risk(signal, model, estimator, n, replicates, seed, workers)
        rows.append((model.name, res.mean, res.std_error))
    best = max(range(len(rows)), key=lambda i: (rows[i][1], -i))
    name, mean, se = rows[best]
    return RobustRisk(mean, se, name, tuple(rows))


@dataclass
class RiskReport:
    """Risk of every grid filter and of the selected estimator over a panel.

    ``per_model_gamma`` and ``per_model_selected`` keep the per-member means and
    standard errors; the robust figures are maxima over members.
    """

    n: int
    signal_label: str
    sigma_star: float
    rho: float
    seed: int
    replicates: int
    grid: WeightGrid
    model_names: tuple
    gamma_mean: np.ndarray  # (model, filter)
    gamma_se: np.ndarray
    selected_mean: np.ndarray  # (model,)
    selected_se: np.ndarray
    selection_counts: dict  # model name -> {alpha: count}

    @property
    def robust_gamma(self):
        """Per filter: (max mean over models, its se, argmax model index)."""
        arg = np.argmax(self.gamma_mean, axis=0)
        cols = np.arange(self.gamma_mean.shape[1])
        return self.gamma_mean[arg, cols], self.gamma_se[arg, cols], arg

    @property
    def robust_selected(self):
        i = int(np.argmax(self.selected_mean))
        return float(self.selected_mean[i]), float(self.selected_se[i]), self.model_names[i]

    def per_gamma_rows(self):
        mean, se, _ = self.robust_gamma
        for g, m, s in zip(self.grid.members, mean, se):
            yield {"n": self.n, "beta": g.beta, "t": g.t, "mean": float(m), "se": float(s), "reps": self.replicates}


def risk_report(signal, panel, grid, rho, n, replicates, seed, workers=1) -> RiskReport:
    gm, gs, sm, ss, counts = [], [], [], [], {}
    for model in panel:
        batch = _simulate([signal], model, n, replicates, seed, grid.matrix, grid, rho, workers)
        m, s = _mean_se(batch.fixed[0].T)
        gm.append(m)
        gs.append(s)
        m, s = _mean_se(batch.selected[0])
        sm.append(float(m))
        ss.append(float(s))
        counts[model.name] = selection_frequency(batch.chosen[0], grid)
        log.info("n=%d model=%s selected risk %.6g +- %.2g", n, model.name, sm[-1], ss[-1])
    return RiskReport(
        n, signal.label, panel.sigma_star, rho, seed, replicates, grid,
        tuple(m.name for m in panel), np.array(gm), np.array(gs), np.array(sm), np.array(ss), counts,
    )


@dataclass(frozen=True)
class OracleReport:
    n: int
    rho: float
    coefficient: float
    lhs: float
    lhs_se: float
    min_robust: float
    min_robust_se: float
    best_alpha: tuple
    rhs_main: float
    slack: float
    allowance: float
    combined_se: float
    verdict: str
    report: RiskReport = field(repr=False)

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"


def oracle_check(signal, panel, grid, rho, n, replicates, seed, workers=1, slack_constant=None) -> OracleReport:
    """Compare the robust risk of the selected estimator with the oracle bound.

    The check passes when LHS <= coef * min_Gamma robust risk + C/n + 3 SE,
    with C = 10 sigma* unless given; C/n stands in for the unspecified remainder.
    """
    rep = risk_report(signal, panel, grid, rho, n, replicates, seed, workers)
    coef = oracle_coefficient(rho)
    lhs, lhs_se, _ = rep.robust_selected
    mean, se, _ = rep.robust_gamma
    i = int(np.argmin(mean))
    base, base_se = float(mean[i]), float(se[i])
    rhs = coef * base
    C = 10.0 * panel.sigma_star if slack_constant is None else slack_constant
    allowance = C / n
    comb = math.hypot(lhs_se, coef * base_se)
    ok = lhs <= rhs + allowance + 3.0 * comb
    return OracleReport(
        n, rho, coef, lhs, lhs_se, base, base_se, grid.members[i].alpha, rhs,
        lhs - rhs, allowance, comb, "consistent" if ok else "violated", rep,
    )


# ----------------------------------------------------------------------------
# efficiency against the Pinsker constant


@dataclass(frozen=True)
class EfficiencyRow:
    n: int
    ratio: float
    bound_side: str  # "upper" (selected estimator) or "pilot" (gamma_0)
    std_error: float = 0.0
    signal_label: str = ""

    def __post_init__(self):
        if not self.ratio > 0:
            raise ValueError("efficiency ratio must be positive")


def default_family(k: int, r: float, sigma_star: float, n: int) -> list:
    """Boundary signals of W^k_r used for the efficiency runs.

    For any fixed filter the bias is linear in theta^2, so the supremum over
    the ball sits on a single coordinate. The family holds every
    single-coordinate boundary signal up to one past the pilot cutoff (this
    includes the pilot's least favourable point) and one signal spread evenly
    over those coordinates.
    """
    eps = 1.0 / math.log(n + 1)
    g0 = oracle_weight_alpha0(k, r, sigma_star, n, eps).gamma
    # (1 - gamma)^2 / a_j peaks no later than the first zero weight, support + 1
    last = max(3, g0.support + 1)
    family = [
        make_test_signal("boundary_ellipsoid", J=n, k=k, r=r, coords=[j], label=f"coord(j={j})")
        for j in range(1, last + 1)
    ]
    family.append(make_test_signal("boundary_ellipsoid", J=n, k=k, r=r, coords=list(range(2, last + 1)), label="spread"))
    return family


def pilot_ratio(k, r, sigma_star, n, family=None) -> EfficiencyRow:
    """n^{2k/(2k+1)} max_family risk(gamma_0) / R*, from the exact Gaussian risk."""
    eps = 1.0 / math.log(n + 1)
    g0 = oracle_weight_alpha0(k, r, sigma_star, n, eps).gamma
    signals = default_family(k, r, sigma_star, n) if family is None else family(n)
    risks = [(gaussian_risk_exact(s, g0, sigma_star, n), s.label) for s in signals]
    best, label = max(risks)
    scale = n ** (2 * k / (2 * k + 1)) / pinsker_constant(k, r, sigma_star)
    return EfficiencyRow(n, best * scale, "pilot", 0.0, label)


def efficiency_curve(
    k: int,
    r: float,
    panel: NoisePanel,
    n_list: Sequence[int],
    replicates: int,
    seed: int,
    rho_rule: Callable[[int], float] | float | None = None,
    family: Callable[[int], list] | None = None,
    grid_overrides: dict | None = None,
    workers: int = 1,
) -> list:
    """Normalized worst-case risks of the selected estimator and of the pilot filter."""
    if list(n_list) != sorted(set(n_list)):
        raise ValueError("n_list must be strictly increasing")
    s_star = panel.sigma_star
    rows = []
    for n in n_list:
        rho = default_rho(n) if rho_rule is None else (rho_rule(n) if callable(rho_rule) else float(rho_rule))
        grid = weight_grid(n, **(grid_overrides or {}))
        signals = default_family(k, r, s_star, n) if family is None else family(n)
        mean = np.full((len(panel), len(signals)), -np.inf)
        se = np.zeros_like(mean)
        for m_i, model in enumerate(panel):
            batch = _simulate(signals, model, n, replicates, seed, grid.matrix, grid, rho, workers)
            mean[m_i], se[m_i] = _mean_se(batch.selected)
        # worst member for each signal, then worst signal
        worst = np.argmax(mean, axis=0)
        cols = np.arange(len(signals))
        robust, robust_se = mean[worst, cols], se[worst, cols]
        j = int(np.argmax(robust))
        scale = n ** (2 * k / (2 * k + 1)) / pinsker_constant(k, r, s_star)
        rows.append(EfficiencyRow(n, float(robust[j] * scale), "upper", float(robust_se[j] * scale), signals[j].label))
        rows.append(pilot_ratio(k, r, s_star, n, family))
        log.info("n=%d upper ratio %.4f (+- %.3f), pilot %.4f", n, rows[-2].ratio, rows[-2].std_error, rows[-1].ratio)
    return rows
