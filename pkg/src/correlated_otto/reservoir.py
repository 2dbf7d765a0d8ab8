"""Effective temperature imposed on the cavity by a thermal or correlated-atom reservoir."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .correlations import thermal_state
from .errors import DomainError


class ReservoirKind(str, enum.Enum):
    THERMAL_BOSON = "thermal-boson"
    CORRELATED_PAIR_ONE_ATOM = "correlated-pair-one-atom"
    CORRELATED_PAIR_TWO_ATOMS = "correlated-pair-two-atoms"


@dataclass(frozen=True)
class ReservoirSpec:
    kind: ReservoirKind
    beta: float
    omega: float
    xi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ReservoirKind(self.kind))
        for name in ("beta", "omega", "xi"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.beta <= 0 or self.omega <= 0:
            raise DomainError(f"need beta > 0 and omega > 0, got {self.beta}, {self.omega}")
        if self.xi < 0:
            raise DomainError(f"xi must be >= 0, got {self.xi}")
        if self.kind is ReservoirKind.THERMAL_BOSON and self.xi != 0:
            raise DomainError("a thermal boson reservoir has no pair coupling (xi must be 0)")


@dataclass(frozen=True)
class EffectiveReservoir:
    r1: float
    r2: float
    beta_eff: float
    n_occ: float
    omega: float

    @property
    def bose_occupation(self) -> float:
        """Mean photon number 1/(exp(beta_eff omega) - 1), without the zero-point half."""
        return self.n_occ - 0.5

    @property
    def boltzmann_ratio(self) -> float:
        return self.r1 / self.r2


def half_coth(x: float) -> float:
    """coth(x/2)/2, the mean of a†a + 1/2 at reduced inverse temperature x."""
    if x == math.inf:
        return 0.5
    return 0.5 / math.tanh(0.5 * x)


def _log_cosh(x: float) -> float:
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def beta_eff_closed_form(kind, beta: float, omega: float, xi: float) -> float:
    """Effective inverse temperature from the closed-form detailed-balance solutions."""
    kind = ReservoirKind(kind)
    a = beta * omega
    x = beta * xi
    if kind is ReservoirKind.THERMAL_BOSON:
        return beta
    if kind is ReservoirKind.CORRELATED_PAIR_ONE_ATOM:
        lc = _log_cosh(x)
        num = np.logaddexp(0.0, a + lc)       # ln(1 + e^a cosh x)
        den = np.logaddexp(a, lc)             # ln(e^a + cosh x)
        return beta - float(num - den) / omega
    num = np.logaddexp(0.0, a - x)            # ln(1 + e^{a - x})
    den = np.logaddexp(a, -x)                 # ln(e^a + e^{-x})
    return beta - float(num - den) / omega


def arrival_rates(spec: ReservoirSpec) -> tuple[float, float]:
    """Emission-side and absorption-side arrival weights (r1, r2)."""
    if spec.kind is ReservoirKind.THERMAL_BOSON:
        q = math.exp(-spec.beta * spec.omega)
        nbar = q / (1.0 - q)
        return nbar, nbar + 1.0
    st = thermal_state(spec.beta, spec.omega, spec.xi)
    if spec.kind is ReservoirKind.CORRELATED_PAIR_ONE_ATOM:
        return st.rho_e + st.rho_d, st.rho_g + st.rho_d
    sym = st.symmetric_population
    return st.rho_e + sym, st.rho_g + sym


def effective_reservoir(spec: ReservoirSpec) -> EffectiveReservoir:
    r1, r2 = arrival_rates(spec)
    if not r1 < r2:
        raise DomainError(
            f"population inversion: r1={r1!r} >= r2={r2!r}, no positive effective temperature")
    if spec.kind is ReservoirKind.THERMAL_BOSON:
        beta_eff = spec.beta
    else:
        beta_eff = -math.log(r1 / r2) / spec.omega
    return EffectiveReservoir(
        r1=r1, r2=r2, beta_eff=beta_eff,
        n_occ=half_coth(beta_eff * spec.omega), omega=spec.omega)
