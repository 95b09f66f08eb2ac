"""Bayes lower bound built from a Gaussian prior on localized smooth bumps.

The construction: a C-infinity bump V on [-1, 1], its convolution I_eta with the
indicator of [-1 + eta, 1 - eta], blocks of width 2h on [0, 1] each carrying
N trigonometric functions on [-1, 1] multiplied by I_eta, independent Gaussian
coefficients with variances sigma* y_j / (n h), and the van Trees inequality
for each coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre

from . import _seeding
from .risk import pinsker_constant


class DomainError(ValueError):
    """Parameters for which the construction does not exist (e.g. n too small)."""


# ----------------------------------------------------------------------------
# mollifier and smoothed indicator


def _bump(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    safe = np.where(inside, 1.0 - x * x, 1.0)
    return np.where(inside, np.exp(-1.0 / safe), 0.0)


@lru_cache(maxsize=None)
def mollifier_constant() -> float:
    """c with c * int_{-1}^{1} exp(-1/(1-x^2)) dx = 1."""
    mass, _ = quad(lambda x: float(_bump(x)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 1.0 / mass


def mollifier(x):
    """V(x) = c exp(-1/(1-x^2)) on |x| < 1, zero elsewhere."""
    out = mollifier_constant() * _bump(x)
    return out if np.ndim(out) else float(out)


_GL_NODES, _GL_WEIGHTS = roots_legendre(128)


def mollifier_cdf(s):
    """int_{-1}^{s} V(x) dx, Gauss-Legendre on [-1, min(s, 1)]."""
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    flat = s.ravel()
    half = (flat + 1.0) / 2.0
    x = -1.0 + half[:, None] * (_GL_NODES + 1.0)
    vals = half * (_bump(x) @ _GL_WEIGHTS) * mollifier_constant()
    vals = np.where(flat >= 1.0, 1.0, vals)
    return vals.reshape(s.shape) if s.ndim else float(vals[0])


def smoothed_indicator(x, eta: float):
    """I_eta(x) = eta^{-1} int 1{|u| <= 1 - eta} V((u - x)/eta) du.

    Substituting s = (u - x)/eta turns this into a difference of the
    mollifier's distribution function.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    near = np.abs(x) < 1.0
    inner = np.abs(x) <= 1.0 - 2.0 * eta
    out[inner] = 1.0
    edge = near & ~inner
    if np.any(edge):
        xe = x[edge]
        out[edge] = mollifier_cdf((1.0 - eta - xe) / eta) - mollifier_cdf((-1.0 + eta - xe) / eta)
    return out if out.ndim else float(out)


def local_basis(j: int, v):
    """e_1 = 1/sqrt(2), e_j(v) = cos(pi [j/2] v) (j even) or sin(pi [j/2] v) (j odd)."""
    if j < 1:
        raise ValueError("j must be >= 1")
    v = np.asarray(v, dtype=float)
    if j == 1:
        return np.full(v.shape, 1.0 / math.sqrt(2.0)) if v.ndim else 1.0 / math.sqrt(2.0)
    arg = math.pi * (j // 2) * v
    return np.cos(arg) if j % 2 == 0 else np.sin(arg)


def _piecewise_gl(g: Callable, periods: int, points=(), nodes: int = 96) -> float:
    # int_{-1}^{1} g with one segment per period plus the given breakpoints
    edges = set(np.linspace(-1.0, 1.0, max(1, periods) + 1).tolist())
    edges.update(p for p in points if -1.0 < p < 1.0)
    edges = np.array(sorted(edges))
    x, w = roots_legendre(nodes)
    a, b = edges[:-1, None], edges[1:, None]
    v = 0.5 * (b - a) * x + 0.5 * (a + b)
    vals = np.asarray(g(v), dtype=float)
    return math.fsum((0.5 * (b - a)[:, 0]) * (vals @ w))


def K_functional(j: int, f: Callable, points=None, nodes: int = 96) -> float:
    """K_j(f) = int_{-1}^{1} e_j(v)^2 f(v) dv by piecewise Gauss-Legendre.

    ``f`` must accept arrays. ``points`` are the places where f is not smooth;
    with one segment per period of e_j^2 the integrand is smooth on each piece.
    """
    return _piecewise_gl(lambda v: local_basis(j, v) ** 2 * f(v), max(2, j // 2), points or (), nodes)


def indicator_breakpoints(eta: float) -> list:
    return [-1.0 + eta, -1.0 + 2.0 * eta, 1.0 - 2.0 * eta, 1.0 - eta]


def _grid_size(eta: float) -> int:
    return max(1 << 14, 1 << math.ceil(math.log2(2048.0 / eta)))


@lru_cache(maxsize=8)
def _cosine_table(eta: float, power: int) -> np.ndarray:
    # C_m = int_{-1}^{1} cos(2 pi m v) I_eta(v)^power dv for m < L/4 by the
    # periodic trapezoid rule; I_eta is smooth and vanishes to all orders at
    # +-1, so the rule is spectrally accurate. Beyond L/4 the coefficients sit
    # below V's Fourier decay at frequency ~ 3000/eta and are set to zero.
    L = _grid_size(eta)
    v = -1.0 + 2.0 * np.arange(L) / L
    f = smoothed_indicator(v, eta) ** power
    spec = np.fft.rfft(f).real * (2.0 / L)
    return spec[0 : L // 2 : 2].copy()  # index m -> FFT bin 2m


def k_functionals(eta: float, N: int, power: int = 1, start: int = 1) -> np.ndarray:
    """K_j(I_eta^power) for j = start .. start + N - 1, all at once."""
    table = _cosine_table(float(eta), int(power))
    j = np.arange(start, start + N)
    m = j // 2
    cm = np.where(m < table.size, table[np.minimum(m, table.size - 1)], 0.0)
    sign = np.where(j % 2 == 0, 1.0, -1.0)
    out = 0.5 * (table[0] + sign * cm)
    return np.where(j == 1, 0.5 * table[0], out)


# ----------------------------------------------------------------------------
# prior design


def paper_n_rule(n) -> int:
    """N_n = ceil(ln^4 n)."""
    return max(1, math.ceil(math.log(n) ** 4))


def n_rule_from_spec(spec) -> Callable:
    """Resolve an N_n rule: None/"paper", {"kind": "log_power", "power": p} or {"kind": "constant", "value": N}."""
    if spec is None or spec == "paper":
        return paper_n_rule
    if callable(spec):
        return spec
    kind = spec.get("kind")
    if kind == "log_power":
        p = float(spec["power"])
        return lambda n: max(1, math.ceil(math.log(n) ** p))
    if kind == "constant":
        value = int(spec["value"])
        return lambda n: value
    raise ValueError(f"unknown N_n rule {spec!r}")


def upsilon_eps(k: int, r: float, sigma_star: float, eps: float) -> float:
    """sigma* k pi^{2k} / ((1 - eps) r 2^{2k+1} (k+1)(2k+1))."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return sigma_star * k * math.pi ** (2 * k) / ((1 - eps) * r * 2 ** (2 * k + 1) * (k + 1) * (2 * k + 1))


def bandwidth(k: int, r: float, sigma_star: float, eps: float, n, N: int | None = None) -> float:
    """h = upsilon_eps^{1/(2k+1)} N_n n^{-1/(2k+1)}; raises DomainError when h >= 1/4."""
    N = paper_n_rule(n) if N is None else N
    p = 1.0 / (2 * k + 1)
    h = upsilon_eps(k, r, sigma_star, eps) ** p * N * float(n) ** (-p)
    if h >= 0.25:
        raise DomainError(f"bandwidth h={h:.4g} >= 1/4 at n={n:.4g}, N={N}: n is too small for the partition")
    return h


@dataclass(frozen=True)
class PriorDesign:
    k: int
    r: float
    sigma_star: float
    eps: float
    n: int
    h: float
    N: int
    M: int
    eta: float = 1e-3

    @classmethod
    def build(cls, k, r, sigma_star, eps, n, n_rule=None, eta: float = 1e-3) -> "PriorDesign":
        N = n_rule_from_spec(n_rule)(n)
        h = bandwidth(k, r, sigma_star, eps, n, N)
        M = int(math.floor(1.0 / (2.0 * h))) - 1
        if M < 1:
            raise DomainError(f"no block fits for h={h:.4g}")
        return cls(k, r, sigma_star, eps, n, h, N, M, eta)

    @property
    def y_star(self) -> np.ndarray:
        """y*_j = N^k j^{-k} - 1, j = 1..N."""
        j = np.arange(1, self.N + 1, dtype=float)
        return (self.N / j) ** self.k - 1.0

    @property
    def t(self) -> np.ndarray:
        """Prior standard deviations sqrt(sigma* y*_j / (n h)); identical across blocks."""
        return np.sqrt(self.sigma_star * self.y_star / (float(self.n) * self.h))

    def centers(self) -> np.ndarray:
        return 2.0 * self.h * np.arange(1, self.M + 1)

    def D(self, m: int, j: int, x, eta: float | None = None):
        """D_{m,j}(x) = e_j(v_m(x)) I_eta(v_m(x)), v_m(x) = (x - 2hm)/h."""
        eta = self.eta if eta is None else eta
        v = (np.asarray(x, dtype=float) - 2.0 * self.h * m) / self.h
        return local_basis(j, v) * smoothed_indicator(v, eta)


def _power_sum(N: int, k: int) -> int:
    """sum_{j=1}^{N} j^k, exact, via Faulhaber's formula."""
    # Bernoulli numbers with B_1 = +1/2
    B = [Fraction(1)]
    for m in range(1, k + 1):
        B.append(1 - sum(Fraction(math.comb(m, i), m - i + 1) * B[i] for i in range(m)))
    total = sum(math.comb(k + 1, i) * B[i] * Fraction(N) ** (k + 1 - i) for i in range(k + 1))
    total /= k + 1
    assert total.denominator == 1
    return int(total)


def limit_sum(N: int, k: int) -> float:
    """sum_{j=1}^{N} y*_j / (y*_j + 1) = N - N^{-k} sum j^k, exact rational arithmetic."""
    return float(N - Fraction(_power_sum(N, k), N**k))


@dataclass(frozen=True)
class LowerBound:
    bound: float  # (sigma*/2nh) sum_j tau_j(eta, y*_j)
    limit_form: float  # (sigma*/2nh) sum_j y*_j/(y*_j + 1)
    block_bound: float  # M (sigma*/n) sum_j tau_j(eta, y*_j): exact sum over the M blocks
    normalizer: float  # n^{2k/(2k+1)} / R*_{k,n}


def tau_terms(eta: float, y: np.ndarray, start: int = 1) -> np.ndarray:
    """tau_j(eta, y) = K_j(I)^2 y / (K_j(I^2) y + 1)."""
    k1 = k_functionals(eta, y.size, 1, start)
    k2 = k_functionals(eta, y.size, 2, start)
    return k1 * k1 * y / (k2 * y + 1.0)


def bayes_lower_bound(design: PriorDesign, eta: float | None = None, chunk: int = 1 << 20) -> LowerBound:
    eta = design.eta if eta is None else eta
    N, k = design.N, design.k
    parts = []
    for a in range(1, N + 1, chunk):
        j = np.arange(a, min(a + chunk, N + 1), dtype=float)
        y = (N / j) ** k - 1.0
        parts.append(float(np.sum(tau_terms(eta, y, a))))
    tau_sum = math.fsum(parts)
    n = float(design.n)
    scale = design.sigma_star / (2.0 * n * design.h)
    norm = n ** (2 * k / (2 * k + 1)) / pinsker_constant(k, design.r, design.sigma_star)
    return LowerBound(
        bound=scale * tau_sum,
        limit_form=scale * limit_sum(N, k),
        block_bound=design.M * design.sigma_star / n * tau_sum,
        normalizer=norm,
    )


def min_feasible_n(k, r, sigma_star, eps, n_rule=None) -> int:
    """Smallest integer n on the decreasing branch of h(n) with h(n) < 1/4.

    h(n) grows with n while ln n < 4(2k+1) under the default rule, so the
    search starts at the peak and bisects in ln n.
    """
    rule = n_rule_from_spec(n_rule)

    def ok(n):
        try:
            bandwidth(k, r, sigma_star, eps, n, rule(n))
            return True
        except DomainError:
            return False

    lo = max(2, int(math.exp(4 * (2 * k + 1))))
    if ok(lo):
        return lo
    hi = lo
    while not ok(hi):
        hi *= 10
        if hi > 10**300:
            raise DomainError("no feasible n below 1e300")
    # ceil(N_n) makes h(n) a fine sawtooth; bisection returns the crossing it brackets
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class LimitRow:
    n: int
    h: float
    N: int
    M: int
    bound: float  # normalized, eta form
    limit_form: float  # normalized, eta -> 0 form
    target: float
    gap: float  # |limit_form / target - 1|


def pinsker_limit_check(k, r, sigma_star, eps, n_list, n_rule=None, eta: float | None = 1e-3) -> list:
    """Normalized lower-bound sums against their limit (1 - eps)^{1/(2k+1)}.

    The sums are multiplied by n^{2k/(2k+1)} / R*_{k,n}, the same
    normalization as the risk; without it they vanish like n^{-2k/(2k+1)}.
    With ``eta=None`` the eta form is skipped and reported equal to the limit form.
    """
    target = (1.0 - eps) ** (1.0 / (2 * k + 1))
    rows = []
    for n in n_list:
        design = PriorDesign.build(k, r, sigma_star, eps, n, n_rule, eta if eta is not None else 1e-3)
        if eta is None:
            n_f = float(n)
            norm = n_f ** (2 * k / (2 * k + 1)) / pinsker_constant(k, r, sigma_star)
            limit = norm * sigma_star / (2 * n_f * design.h) * limit_sum(design.N, k)
            bound = limit
        else:
            lb = bayes_lower_bound(design, eta)
            limit = lb.normalizer * lb.limit_form
            bound = lb.normalizer * lb.bound
        rows.append(LimitRow(n, design.h, design.N, design.M, bound, limit, target, abs(limit / target - 1.0)))
    return rows


# ----------------------------------------------------------------------------
# van Trees inequality and the Gaussian parametric model


def van_trees_bound(fisher_energy: float, B: float, I: float, sigma_star: float) -> float:
    """sigma* B^2 / (int S_j^2 + sigma* I_j)."""
    if not I > 0:
        raise ValueError("prior Fisher information must be positive")
    if fisher_energy < 0:
        raise ValueError("fisher_energy must be nonnegative")
    return sigma_star * B * B / (fisher_energy + sigma_star * I)


def gaussian_bayes_risk(fisher_energy: float, t2: float, sigma_star: float) -> float:
    """Posterior variance sigma* t^2 / (t^2 E + sigma*) for z ~ N(0, t^2), dy = z S dt + sqrt(sigma*) dw."""
    return sigma_star * t2 / (t2 * fisher_energy + sigma_star)


def mc_gaussian_bayes_risk(fisher_energy, t2, sigma_star, replicates, seed) -> tuple:
    """Monte Carlo Bayes risk of the posterior mean in the scalar conjugate model.

    The sufficient statistic X = int S dy = z E + sqrt(sigma* E) N(0, 1).
    Returns (mean squared error, standard error).
    """
    rng = _seeding.generator(_seeding.as_seed_sequence(seed), 0)
    z = math.sqrt(t2) * rng.standard_normal(replicates)
    x = z * fisher_energy + math.sqrt(sigma_star * fisher_energy) * rng.standard_normal(replicates)
    post_mean = t2 * x / (t2 * fisher_energy + sigma_star)
    err = (post_mean - z) ** 2
    return float(err.mean()), float(err.std(ddof=1) / math.sqrt(replicates))


def project_ball(coeffs, r: float) -> np.ndarray:
    """Radial projection onto {c : sum c_j^2 <= r}."""
    if not r > 0:
        raise ValueError("r must be positive")
    c = np.asarray(coeffs, dtype=float)
    norm2 = float(np.dot(c, c))
    if norm2 <= r:
        return c.copy()
    return c * math.sqrt(r / norm2)


# ----------------------------------------------------------------------------
# small-scale exact and simulated Bayes risk over the bump prior


def _block_matrices(design: PriorDesign, eta: float):
    # Gram W_ab = int D_a D_b over one block / h and the coefficient map
    # P_ab = int D_b G_a / sqrt(h); both are integrals over v in [-1, 1]
    N = design.N
    pts = indicator_breakpoints(eta)
    W = np.empty((N, N))
    P = np.empty((N, N))
    I = lambda v: smoothed_indicator(v, eta)
    for a in range(1, N + 1):
        for b in range(a, N + 1):
            periods = max(2, a // 2 + b // 2)
            prod = lambda v: local_basis(a, v) * local_basis(b, v)
            w = _piecewise_gl(lambda v: prod(v) * I(v) ** 2, periods, pts)
            p = _piecewise_gl(lambda v: prod(v) * I(v), periods, pts)
            W[a - 1, b - 1] = W[b - 1, a - 1] = w
            P[a - 1, b - 1] = P[b - 1, a - 1] = p
    return W, P


@dataclass(frozen=True)
class ToyBayesRisk:
    exact: float  # Bayes risk of the posterior mean for the G-coefficients
    mc_mean: float
    mc_se: float
    block_bound: float  # sum of the per-coefficient van Trees bounds


def simulate_bayes_risk(design: PriorDesign, eta: float | None, replicates: int, seed) -> ToyBayesRisk:
    """Bayes risk sum_{m,j} E(g_hat_{m,j} - g_{m,j}(kappa))^2 at toy scale.

    Observing dy = S_kappa dt + sqrt(sigma*) dw on [0, n] reduces, block by
    block, to X = n h W kappa + sqrt(sigma* n h) W^{1/2} Z. The posterior mean
    is the Bayes estimator, so its exact risk is the smallest achievable and
    must dominate the van Trees bound.
    """
    eta = design.eta if eta is None else eta
    if design.M > 4 or design.N > 8:
        raise ValueError("toy simulation is limited to M <= 4, N <= 8")
    W, P = _block_matrices(design, eta)
    h, n, s = design.h, float(design.n), design.sigma_star
    t2 = design.t**2
    keep = t2 > 0
    # coefficients with zero prior variance are known to be 0
    Wk, Pk, t2k = W[np.ix_(keep, keep)], P[:, keep], t2[keep]
    precision = np.diag(1.0 / t2k) + n * h * Wk / s
    cov = np.linalg.inv(precision)
    g_scale = math.sqrt(h)
    exact_block = g_scale**2 * float(np.trace(Pk @ cov @ Pk.T))
    exact = design.M * exact_block

    rng = _seeding.generator(_seeding.as_seed_sequence(seed), 0)
    chol_W = np.linalg.cholesky(Wk)
    R = replicates
    kappa = rng.standard_normal((R, design.M, t2k.size)) * np.sqrt(t2k)
    noise = rng.standard_normal((R, design.M, t2k.size)) @ chol_W.T * math.sqrt(s * n * h)
    X = n * h * kappa @ Wk.T + noise
    post = (X / s) @ cov.T
    err = g_scale * (post - kappa) @ Pk.T
    per_rep = np.sum(err**2, axis=(1, 2))
    k1 = k_functionals(eta, design.N, 1)
    k2 = k_functionals(eta, design.N, 2)
    y = design.y_star
    block = design.M * s / n * float(np.sum(k1**2 * y / (k2 * y + 1.0)))
    return ToyBayesRisk(exact, float(per_rep.mean()), float(per_rep.std(ddof=1) / math.sqrt(R)), block)
