"""Penalized selection over a finite family of Pinsker-type shrinkage filters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .signal import ConfigurationError
from .spectral import SpectralObservation


def tau(beta: int) -> float:
    """tau_beta = (beta + 1)(2 beta + 1) / (pi^{2 beta} beta)."""
    return (beta + 1) * (2 * beta + 1) / (math.pi ** (2 * beta) * beta)


@dataclass(frozen=True)
class WeightSequence:
    """gamma(j) = 1 on j <= j0, 1 - (j/omega)^beta on j0 < j <= omega, 0 beyond."""

    beta: int
    t: float
    omega: float
    j0: int

    def __call__(self, j):
        j = np.asarray(j, dtype=float)
        g = np.where(j <= self.omega, 1.0 - (j / self.omega) ** self.beta, 0.0)
        g = np.where(j <= self.j0, 1.0, g)
        return g if g.ndim else float(g)

    def values(self, length: int) -> np.ndarray:
        """gamma(1), ..., gamma(length)."""
        return self(np.arange(1, length + 1))

    @property
    def support(self) -> int:
        """Largest j with gamma(j) > 0."""
        return int(math.floor(self.omega))

    @property
    def alpha(self) -> tuple:
        return (self.beta, self.t)


def weight_sequence(beta: int, t: float, n: int) -> WeightSequence:
    if beta < 1 or not t > 0 or n < 2:
        raise ValueError(f"need beta >= 1, t > 0, n >= 2 (got {beta}, {t}, {n})")
    omega = (tau(beta) * t * n) ** (1.0 / (2 * beta + 1))
    j0 = int(math.floor(omega / (1.0 + math.log(n))))
    return WeightSequence(int(beta), float(t), omega, j0)


@dataclass(frozen=True)
class WeightGrid:
    n: int
    k_star: int
    eps: float
    m: int
    members: tuple = field(repr=False)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @cached_property
    def matrix(self) -> np.ndarray:
        """|Gamma| x n array of gamma values, rows in (beta, t) order."""
        mat = np.vstack([g.values(self.n) for g in self.members])
        mat.setflags(write=False)
        return mat

    @cached_property
    def squared_norms(self) -> np.ndarray:
        return np.sum(self.matrix**2, axis=1)


def default_eps(n: int) -> float:
    return 1.0 / math.log(n + 1)


def default_k_star(n: int) -> int:
    return max(1, int(math.floor(math.sqrt(math.log(n + 1)))))


def default_rho(n: int) -> float:
    return 1.0 / (3.0 + math.log(n))


def weight_grid(n: int, eps: float | None = None, k_star: int | None = None) -> WeightGrid:
    """All gamma_alpha for alpha in {1..k*} x {eps, 2 eps, ..., m eps}, m = [1/eps^2]."""
    if n < 3:
        raise ValueError("weight grid needs n >= 3")
    eps = default_eps(n) if eps is None else float(eps)
    k_star = default_k_star(n) if k_star is None else int(k_star)
    if not 0 < eps < 1:
        raise ConfigurationError(f"grid eps must lie in (0, 1), got {eps}")
    if k_star < 1:
        raise ConfigurationError(f"grid k_star must be >= 1, got {k_star}")
    m = int(math.floor(1.0 / eps**2))
    members = tuple(
        weight_sequence(beta, i * eps, n) for beta in range(1, k_star + 1) for i in range(1, m + 1)
    )
    for g in members:
        # cost sums stop at j = n, which is exact only while the filter ends first
        if g.omega > n:
            raise ConfigurationError(f"omega={g.omega:.3f} exceeds n={n} for alpha={g.alpha}")
    return WeightGrid(n, k_star, eps, m, members)


def sigma_hat(obs) -> float:
    """sum_{j=l}^{n} theta_hat_j^2 with l = [sqrt(n)] + 1."""
    theta_hat = obs.theta_hat if isinstance(obs, SpectralObservation) else np.asarray(obs)
    n = theta_hat.size
    l = math.isqrt(n) + 1
    if l > n:
        return 0.0
    return math.fsum(theta_hat[l - 1 :] ** 2)


def _check_rho(rho: float) -> None:
    if not 0 < rho < 1.0 / 3.0:
        raise ValueError(f"rho must lie in (0, 1/3), got {rho}")


def cost(obs, gamma, rho: float) -> float:
    """Penalized empirical risk J_n(gamma).

    sum gamma^2 theta_hat^2 - 2 sum gamma (theta_hat^2 - sigma_hat/n)
    + rho sigma_hat |gamma|^2 / n. ``gamma`` is a WeightSequence or an explicit
    vector of weights for j = 1..n.
    """
    _check_rho(rho)
    theta_hat = obs.theta_hat if isinstance(obs, SpectralObservation) else np.asarray(obs, float)
    n = theta_hat.size
    g = gamma.values(n) if isinstance(gamma, WeightSequence) else np.asarray(gamma, float)
    s = sigma_hat(theta_hat)
    sq = theta_hat**2
    tilde = sq - s / n
    norm2 = math.fsum(g**2)
    return math.fsum(g**2 * sq) - 2.0 * math.fsum(g * tilde) + rho * s * norm2 / n


def grid_costs(theta_hat: np.ndarray, grid: WeightGrid, rho: float) -> np.ndarray:
    """Cost of every grid member, vectorized; rows follow ``grid.members``."""
    _check_rho(rho)
    n = grid.n
    s = sigma_hat(theta_hat)
    sq = theta_hat**2
    G = grid.matrix
    return (G**2) @ sq - 2.0 * (G @ sq - (s / n) * G.sum(axis=1)) + rho * s * grid.squared_norms / n


@dataclass(frozen=True)
class SelectionResult:
    gamma_hat: WeightSequence
    index: int
    cost_value: float
    estimate_coeffs: np.ndarray
    sigma_hat: float
    rho: float


def select(obs, grid: WeightGrid, rho: float) -> SelectionResult:
    """Minimize the cost over the grid.

    Members are stored in (beta, t) order and ``argmin`` returns the first
    minimum, so ties go to the smallest beta and then the smallest t.
    """
    theta_hat = obs.theta_hat if isinstance(obs, SpectralObservation) else np.asarray(obs, float)
    if len(grid) == 0:
        raise ValueError("empty grid")
    costs = grid_costs(theta_hat, grid, rho)
    i = int(np.argmin(costs))
    return SelectionResult(
        gamma_hat=grid.members[i],
        index=i,
        cost_value=float(costs[i]),
        estimate_coeffs=grid.matrix[i] * theta_hat,
        sigma_hat=sigma_hat(theta_hat),
        rho=rho,
    )


@dataclass(frozen=True)
class PilotWeight:
    gamma: WeightSequence
    clamped: bool
    in_grid: bool


def oracle_weight_alpha0(k: int, r: float, sigma_star: float, n: int, eps: float) -> PilotWeight:
    """Smoothness-aware filter alpha_0 = (k, t0) with t0 = [(r/sigma*)/eps] eps.

    t0 is clamped up to eps when r/sigma* < eps. ``in_grid`` records whether
    alpha_0 is a member of the default grid of this n.
    """
    steps = int(math.floor((r / sigma_star) / eps))
    clamped = steps == 0
    steps = max(steps, 1)
    t0 = steps * eps
    in_grid = k <= default_k_star(n) and steps <= int(math.floor(1.0 / eps**2))
    return PilotWeight(weight_sequence(k, t0, n), clamped, in_grid)
