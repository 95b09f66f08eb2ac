"""Periodic target functions on [0, 1] stored by their trigonometric coefficients.

Basis convention: phi_1 = 1, phi_j(x) = sqrt(2) cos(2 pi [j/2] x) for even j and
sqrt(2) sin(2 pi [j/2] x) for odd j >= 3. Coefficients are indexed from j = 1;
a numpy vector ``coeffs`` holds theta_j at position ``j - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SQRT2 = math.sqrt(2.0)


class ConfigurationError(ValueError):
    """Raised for unknown generators or invalid experiment settings."""


def basis_eval(j, x):
    """Evaluate the j-th trigonometric basis function at ``x``.

    ``j`` may be an integer array; ``x`` broadcasts against it.
    """
    j_arr = np.asarray(j)
    if np.any(j_arr < 1):
        raise ValueError(f"basis index must be >= 1, got {j}")
    x = np.asarray(x, dtype=float)
    freq = j_arr // 2
    arg = 2.0 * np.pi * freq * x
    out = np.where(j_arr % 2 == 0, SQRT2 * np.cos(arg), SQRT2 * np.sin(arg))
    out = np.where(j_arr == 1, 1.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def sobolev_weight(j, k: int):
    """Ellipsoid weight a_j = sum_{i=0}^{k} (2 pi [j/2])^{2i}, with 0**0 = 1."""
    if k < 1:
        raise ValueError("smoothness order k must be >= 1")
    j_arr = np.asarray(j)
    if np.any(j_arr < 1):
        raise ValueError("index j must be >= 1")
    w = (2.0 * np.pi * (j_arr // 2)) ** 2
    total = np.zeros(np.shape(w), dtype=float)
    term = np.ones(np.shape(w), dtype=float)
    for _ in range(k + 1):
        total = total + term
        term = term * w
    if total.ndim == 0:
        return float(total)
    return total


@dataclass(frozen=True)
class SobolevBall:
    k: int
    r: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.r > 0:
            raise ValueError("r must be positive")

    def weights(self, J: int) -> np.ndarray:
        return sobolev_weight(np.arange(1, J + 1), self.k)


@dataclass(frozen=True)
class PeriodicSignal:
    """Coefficients theta_1..theta_J plus a bound on the energy beyond J."""

    coeffs: np.ndarray
    tail_bound: float = 0.0
    label: str = ""

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).ravel()
        if c.size < 1:
            raise ValueError("a signal needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        if self.tail_bound < 0:
            raise ValueError("tail_bound must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "tail_bound", float(self.tail_bound))

    @property
    def J(self) -> int:
        return self.coeffs.size

    def padded(self, length: int) -> np.ndarray:
        """Coefficient vector zero-padded (or checked) to ``length``."""
        if length < self.J:
            raise ValueError(f"signal has {self.J} coefficients, cannot fit into {length}")
        out = np.zeros(length)
        out[: self.J] = self.coeffs
        return out

    def energy(self) -> float:
        """||S||^2 over the stored coefficients (tail excluded)."""
        return math.fsum(self.coeffs**2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        j = np.arange(1, self.J + 1)
        vals = basis_eval(j[:, None], x.ravel()[None, :])
        return (self.coeffs @ vals).reshape(x.shape)


def ellipsoid_functional(signal: PeriodicSignal, k: int) -> float:
    """sum_j a_j theta_j^2 over the stored coefficients."""
    a = sobolev_weight(np.arange(1, signal.J + 1), k)
    return math.fsum(a * signal.coeffs**2)


@dataclass(frozen=True)
class BallMembership:
    value: float
    r: float
    inside: bool
    approximate: bool = field(default=False)


def in_sobolev_ball(signal: PeriodicSignal, ball: SobolevBall) -> BallMembership:
    """Membership verdict for W^k_r.

    When the signal carries an unknown tail the verdict only covers the stored
    coordinates and is flagged approximate.
    """
    value = ellipsoid_functional(signal, ball.k)
    return BallMembership(
        value=value,
        r=ball.r,
        inside=value <= ball.r,
        approximate=signal.tail_bound > 0,
    )


def _finite_fourier(J: int | None, theta: Sequence[float], label: str | None = None):
    theta = np.asarray(theta, dtype=float)
    if J is not None and J > theta.size:
        theta = np.concatenate([theta, np.zeros(J - theta.size)])
    return PeriodicSignal(theta, 0.0, label or "finite_fourier")


def _boundary_ellipsoid(
    J: int | None,
    k: int,
    r: float,
    coords: Sequence[int] = (2,),
    profile: Sequence[float] | None = None,
    label: str | None = None,
):
    # theta_j proportional to profile on the given coordinates, scaled onto sum a_j theta_j^2 = r
    ball = SobolevBall(int(k), float(r))
    coords = [int(c) for c in coords]
    if not coords or min(coords) < 1:
        raise ConfigurationError("boundary_ellipsoid needs coordinates >= 1")
    size = max(coords) if J is None else J
    if size < max(coords):
        raise ConfigurationError(f"J={size} is smaller than coordinate {max(coords)}")
    prof = np.ones(len(coords)) if profile is None else np.asarray(profile, dtype=float)
    if prof.shape != (len(coords),):
        raise ConfigurationError("profile must match coords")
    theta = np.zeros(size)
    a = sobolev_weight(np.asarray(coords), ball.k)
    scale = math.sqrt(ball.r / math.fsum(a * prof**2))
    theta[np.asarray(coords) - 1] = prof * scale
    return PeriodicSignal(theta, 0.0, label or f"boundary(k={k},r={r},j={coords})")


def _smooth_analytic(J: int | None, q: float, amplitude: float = 1.0, label: str | None = None):
    if not 0 < abs(q) < 1:
        raise ConfigurationError("smooth_analytic needs 0 < |q| < 1")
    if J is None:
        raise ConfigurationError("smooth_analytic needs J")
    j = np.arange(1, J + 1)
    theta = amplitude * q**j
    # sum_{j>J} (c q^j)^2 = c^2 q^{2(J+1)} / (1 - q^2)
    tail = amplitude**2 * q ** (2 * (J + 1)) / (1.0 - q * q)
    return PeriodicSignal(theta, tail, label or f"analytic(q={q})")


GENERATORS = {
    "finite_fourier": _finite_fourier,
    "boundary_ellipsoid": _boundary_ellipsoid,
    "smooth_analytic": _smooth_analytic,
}


def make_test_signal(generator: str, J: int | None = None, **params) -> PeriodicSignal:
    """Build a signal from one of the named generator families.

    ``finite_fourier(theta=[...])``, ``boundary_ellipsoid(k, r, coords, profile)``
    and ``smooth_analytic(q, amplitude)``.
    """
    try:
        fn = GENERATORS[generator]
    except KeyError:
        raise ConfigurationError(
            f"unknown signal generator {generator!r}; expected one of {sorted(GENERATORS)}"
        ) from None
    try:
        return fn(J, **params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {generator}: {exc}") from None


def worst_case_coordinate(gamma_values: np.ndarray, k: int) -> int:
    """Coordinate j maximising (1 - gamma(j))^2 / a_j.

    The bias sum_j (1-gamma_j)^2 theta_j^2 is linear in theta^2, so over the
    ellipsoid sum a_j theta_j^2 <= r its supremum sits on one coordinate.
    ``gamma_values`` must extend past the filter support so the first zero
    weight is visible.
    """
    g = np.asarray(gamma_values, dtype=float)
    a = sobolev_weight(np.arange(1, g.size + 1), k)
    return int(np.argmax((1.0 - g) ** 2 / a)) + 1
