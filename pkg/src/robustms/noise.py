"""Brownian plus compound-Poisson noise laws and the admissible-family checks.

The noise is xi_t = rho1 * w_t + rho2 * z_t, where z_t is a compound Poisson
process with intensity ``lam`` and standardized marks Y (E Y = 0, E Y^2 = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

# relative slack when checking the variance budget; sqrt() round-off otherwise
# rejects models built exactly on the boundary
_BUDGET_RTOL = 1e-12


class MarkLaw(str, Enum):
    RADEMACHER = "rademacher"
    STANDARD_GAUSSIAN = "standard_gaussian"

    @property
    def fourth_moment(self) -> float:
        return 1.0 if self is MarkLaw.RADEMACHER else 3.0


class MembershipError(ValueError):
    """A panel member falls outside the admissible noise family."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class NoiseModel:
    rho1: float
    rho2: float
    lam: float
    sigma_star: float
    mark_law: MarkLaw = MarkLaw.RADEMACHER
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mark_law", MarkLaw(self.mark_law))
        for attr in ("rho1", "rho2", "lam"):
            v = getattr(self, attr)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{attr} must be finite and nonnegative, got {v}")
        if not self.sigma_star > 0:
            raise ValueError("sigma_star must be positive")
        if self.variance > self.sigma_star * (1 + _BUDGET_RTOL):
            raise ValueError(
                f"rho1^2 + rho2^2*lam = {self.variance} exceeds the budget sigma*={self.sigma_star}"
            )
        if not self.name:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self) -> str:
        if self.rho2 == 0 or self.lam == 0:
            return f"gauss(rho1={self.rho1:g})"
        return f"levy(rho1={self.rho1:g},rho2={self.rho2:g},lam={self.lam:g},{self.mark_law.value})"

    @property
    def variance(self) -> float:
        return noise_variance(self)

    @property
    def has_jumps(self) -> bool:
        return self.rho2 > 0 and self.lam > 0

    @classmethod
    def gaussian(cls, sigma_star: float, name: str = "Q0") -> "NoiseModel":
        """The pure white-noise law Q_0: rho1 = sqrt(sigma*), no jumps."""
        return cls(math.sqrt(sigma_star), 0.0, 0.0, sigma_star, MarkLaw.RADEMACHER, name)

    def is_q0(self) -> bool:
        return not self.has_jumps and math.isclose(self.rho1**2, self.sigma_star, rel_tol=1e-12)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rho1": self.rho1,
            "rho2": self.rho2,
            "lambda": self.lam,
            "mark_law": self.mark_law.value,
        }


def noise_variance(model: NoiseModel) -> float:
    """sigma(Q) = rho1^2 + rho2^2 * lambda."""
    return model.rho1**2 + model.rho2**2 * model.lam


def c2_bound(model: NoiseModel) -> float:
    """Upper bound 4 sigma (sigma + rho2^2 E Y^4) on the second noise functional.

    The first functional vanishes identically for this family.
    """
    s = noise_variance(model)
    return 4.0 * s * (s + model.rho2**2 * model.mark_law.fourth_moment)


def c1_bound(model: NoiseModel) -> float:
    return 0.0


@dataclass(frozen=True)
class LnRule:
    """Slowly increasing sequence l_n = scale * (offset + ln n)."""

    scale: float = 1.0
    offset: float = 1.0

    def __call__(self, n) -> float:
        if n < 1:
            raise ValueError("n must be >= 1")
        return self.scale * (self.offset + math.log(n))


@dataclass(frozen=True)
class Membership:
    passed: bool
    l_n: float
    budget_margin: float
    jump_margin: float
    family_margin: float
    failures: tuple = field(default=())


def family_membership(model: NoiseModel, n: int, l_n_rule=None) -> Membership:
    """Check the three inequalities that place ``model`` in the admissible family.

    (i) rho1^2 + rho2^2 lam <= sigma*, (ii) rho2^2 <= sqrt(l_n) and
    (iii) 4 sigma* (sigma* + sqrt(l_n) E Y^4) <= l_n. Margins are
    right-hand side minus left-hand side; failures are reported, never raised.
    """
    rule = l_n_rule if l_n_rule is not None else LnRule()
    l_n = rule(n) if callable(rule) else float(rule)
    s = model.sigma_star
    m1 = s - noise_variance(model)
    m2 = math.sqrt(l_n) - model.rho2**2
    m3 = l_n - 4.0 * s * (s + math.sqrt(l_n) * model.mark_law.fourth_moment)
    failures = []
    if m1 < -_BUDGET_RTOL * s:
        failures.append("variance budget")
    if m2 < 0:
        failures.append("jump scale")
    if m3 < 0:
        failures.append("family growth")
    return Membership(not failures, l_n, m1, m2, m3, tuple(failures))


@dataclass(frozen=True)
class NoisePanel:
    """Finite stand-in for the admissible noise family; always holds Q_0."""

    models: tuple
    l_n_rule: LnRule = LnRule()

    def __post_init__(self):
        models = tuple(self.models)
        if not models:
            raise ValueError("panel must not be empty")
        s = {m.sigma_star for m in models}
        if len(s) != 1:
            raise ValueError(f"panel members must share sigma*, got {sorted(s)}")
        if not any(m.is_q0() for m in models):
            raise ValueError("panel must contain the Gaussian member Q0")
        names = [m.name for m in models]
        if len(set(names)) != len(names):
            raise ValueError(f"panel member names must be unique: {names}")
        object.__setattr__(self, "models", models)

    @property
    def sigma_star(self) -> float:
        return self.models[0].sigma_star

    @property
    def q0(self) -> NoiseModel:
        return next(m for m in self.models if m.is_q0())

    def __len__(self):
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def membership(self, n: int) -> dict:
        return {m.name: family_membership(m, n, self.l_n_rule) for m in self.models}

    def validate(self, n: int) -> None:
        report = self.membership(n)
        bad = {k: v.failures for k, v in report.items() if not v.passed}
        if bad:
            raise MembershipError(f"panel members outside the family at n={n}: {bad}", report)


def default_panel(sigma_star: float = 1.0, l_n_rule: LnRule | None = None) -> NoisePanel:
    """Q_0 plus two jump laws that spend the whole variance budget.

    The default rule l_n = 50 (1 + ln n) keeps all members admissible for
    n >= 100 when sigma* = 1; the unscaled 1 + ln n cannot satisfy the family
    growth condition at any practical n.
    """
    s = float(sigma_star)
    models = (
        NoiseModel.gaussian(s),
        NoiseModel(math.sqrt(s / 2), math.sqrt(s) / 2, 2.0, s, MarkLaw.RADEMACHER, "mixed"),
        NoiseModel(0.0, math.sqrt(s), 1.0, s, MarkLaw.STANDARD_GAUSSIAN, "pure_jump"),
    )
    return NoisePanel(models, l_n_rule or LnRule(scale=50.0))
