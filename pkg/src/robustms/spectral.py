"""Exact frequency-domain synthesis of the normalized noise integrals.

For the 1-periodic trigonometric basis, int_0^n phi_i phi_j dt = n delta_ij, so
the Brownian part of xi_{j,n} = n^{-1/2} int_0^n phi_j d xi is i.i.d.
N(0, rho1^2) across j, and the compound-Poisson part is a finite sum over jump
times. Nothing is discretized. ``simulate_path_integrals`` is an independent
time-grid construction kept only to validate this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _seeding
from .noise import MarkLaw, NoiseModel
from .signal import PeriodicSignal, basis_eval

# frequency block width for the jump sums; fixed so results do not depend on J
_BLOCK = 64
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SpectralObservation:
    theta_hat: np.ndarray
    n: int
    model_id: str
    seed: tuple

    def __post_init__(self):
        if self.theta_hat.shape != (self.n,):
            raise ValueError("theta_hat must have length n")


def seed_record(seq: np.random.SeedSequence) -> tuple:
    return (seq.entropy, tuple(seq.spawn_key))


def sample_jumps(model: NoiseModel, n: int, seq: np.random.SeedSequence):
    """Jump positions reduced mod 1 and their marks for one replicate on [0, n]."""
    rng = _seeding.generator(seq, _seeding.JUMPS)
    if not model.has_jumps:
        return np.empty(0), np.empty(0)
    count = rng.poisson(model.lam * n)
    times = rng.uniform(0.0, n, size=count)
    if model.mark_law is MarkLaw.RADEMACHER:
        marks = 2.0 * rng.integers(0, 2, size=count) - 1.0
    else:
        marks = rng.standard_normal(count)
    # phi_j is 1-periodic: reducing first avoids large trig arguments
    return times - np.floor(times), marks


def jump_integrals(u: np.ndarray, marks: np.ndarray, J: int) -> np.ndarray:
    """sum_k phi_j(u_k) Y_k for j = 1..J.

    The complex sums sum_k Y_k exp(2 pi i f u_k) for every frequency f are
    computed as one matrix product by splitting f = a * B + b, which keeps the
    work at O(K * J) multiply-adds in BLAS with only O(K * sqrt(J)) trig calls.
    """
    out = np.zeros(J)
    if u.size == 0:
        return out
    out[0] = np.sum(marks)
    F = J // 2
    if F == 0:
        return out
    A = F // _BLOCK + 1
    coarse = np.arange(A) * _BLOCK
    phase_hi = np.outer(u, coarse)
    phase_hi -= np.floor(phase_hi)
    left = marks[:, None] * np.exp(1j * _TWO_PI * phase_hi)
    right = np.exp(1j * _TWO_PI * np.outer(u, np.arange(_BLOCK)))
    sums = (left.T @ right).ravel()[1 : F + 1]
    # j = 2f -> sqrt2 cos, j = 2f + 1 -> sqrt2 sin
    out[1 : 2 * F : 2] = math.sqrt(2.0) * sums.real
    n_odd = (J - 1) // 2
    out[2 : 2 + 2 * n_odd : 2] = math.sqrt(2.0) * sums.imag[:n_odd]
    return out


def simulate_spectral_noise(model: NoiseModel, n: int, J: int, seed) -> np.ndarray:
    """(xi_{1,n}, ..., xi_{J,n}) for one replicate."""
    if not 1 <= J <= n:
        raise ValueError(f"need 1 <= J <= n, got J={J}, n={n}")
    seq = _seeding.as_seed_sequence(seed)
    xi = np.zeros(J)
    if model.rho1 > 0:
        xi += model.rho1 * _seeding.generator(seq, _seeding.GAUSS).standard_normal(J)
    if model.has_jumps:
        u, marks = sample_jumps(model, n, seq)
        xi += (model.rho2 / math.sqrt(n)) * jump_integrals(u, marks, J)
    return xi


def simulate_path_integrals(model: NoiseModel, n: int, indices, dt: float, seed) -> np.ndarray:
    """Time-domain construction of xi_{j,n} for the requested basis indices.

    Brownian integrals are left-endpoint Ito sums on a grid of step ``dt``
    (rounded so that n / dt is an integer); jumps are summed exactly over the
    same realization that ``simulate_spectral_noise`` draws for this seed.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > 0.01:
        raise ValueError("dt must be <= 0.01")
    idx = np.asarray(list(indices), dtype=int)
    if idx.size == 0 or idx.min() < 1:
        raise ValueError("indices must be >= 1")
    seq = _seeding.as_seed_sequence(seed)
    xi = np.zeros(idx.size)
    if model.rho1 > 0:
        steps = int(round(n / dt))
        h = n / steps
        rng = _seeding.generator(seq, _seeding.PATH)
        acc = np.zeros(idx.size)
        chunk = 1 << 15
        for start in range(0, steps, chunk):
            stop = min(start + chunk, steps)
            t = np.arange(start, stop) * h
            dw = rng.standard_normal(stop - start) * math.sqrt(h)
            acc += basis_eval(idx[:, None], (t - np.floor(t))[None, :]) @ dw
        xi += model.rho1 * acc / math.sqrt(n)
    if model.has_jumps:
        u, marks = sample_jumps(model, n, seq)
        sums = jump_integrals(u, marks, int(idx.max()))
        xi += (model.rho2 / math.sqrt(n)) * sums[idx - 1]
    return xi


def observe(signal: PeriodicSignal, model: NoiseModel, n: int, seed) -> SpectralObservation:
    """theta_hat_j = theta_j + xi_{j,n} / sqrt(n) for j = 1..n."""
    seq = _seeding.as_seed_sequence(seed)
    theta = signal.padded(n)
    xi = simulate_spectral_noise(model, n, n, seq)
    return SpectralObservation(theta + xi / math.sqrt(n), n, model.name, seed_record(seq))
