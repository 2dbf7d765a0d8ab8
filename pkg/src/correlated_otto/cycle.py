"""Closed-form Otto-cycle observables and their characteristic-function cross-checks.

Sign conventions: ``w`` is the work done on the cavity over one cycle, heats are
counted positive when absorbed by the cavity, so the work output is ``-w``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .correlations import xi_for_discord, discord_of
from .errors import BranchCutError, DomainError, NormalizationError
from .fock_dynamics import nonadiabatic_factor_analytic
from .reservoir import EffectiveReservoir, ReservoirKind, ReservoirSpec, effective_reservoir

MODE_ZERO_TOL = 1e-12


class Variant(str, enum.Enum):
    HOT_NONTHERMAL = "hot-nonthermal"
    COLD_NONTHERMAL = "cold-nonthermal"


class Mode(str, enum.Enum):
    ENGINE = "engine"
    REFRIGERATOR = "refrigerator"
    HEATER = "heater"
    BOUNDARY = "boundary"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class CycleConfig:
    omega_c: float
    omega_h: float
    beta_c: float
    beta_h: float
    xi: float
    tau_dri: float
    variant: Variant = Variant.HOT_NONTHERMAL

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        values = (self.omega_c, self.omega_h, self.beta_c, self.beta_h, self.xi, self.tau_dri)
        if not all(map(math.isfinite, values)):
            raise DomainError("cycle parameters must be finite")
        if not self.omega_h > self.omega_c > 0:
            raise DomainError(f"need omega_h > omega_c > 0, got {self.omega_h}, {self.omega_c}")
        if not self.beta_c > self.beta_h > 0:
            raise DomainError(f"need beta_c > beta_h > 0, got {self.beta_c}, {self.beta_h}")
        if self.tau_dri <= 0:
            raise DomainError("tau_dri must be positive")
        if self.xi < 0:
            raise DomainError("xi must be non-negative")

    @property
    def tau_cyc(self) -> float:
        return 2.0 * self.tau_dri

    def pair_parameters(self) -> tuple[float, float]:
        """(beta, omega) of the correlated atom pairs for this variant."""
        if self.variant is Variant.HOT_NONTHERMAL:
            return self.beta_h, self.omega_h
        return self.beta_c, self.omega_c

    def discord(self) -> float:
        beta, omega = self.pair_parameters()
        return discord_of(beta, omega, self.xi)

    def with_discord(self, q: float) -> "CycleConfig":
        beta, omega = self.pair_parameters()
        return replace(self, xi=xi_for_discord(q, beta, omega))

    def with_(self, **changes) -> "CycleConfig":
        return replace(self, **changes)


def reservoirs(config: CycleConfig) -> tuple[EffectiveReservoir, EffectiveReservoir]:
    """(cold, hot) effective reservoirs seen by the cavity."""
    if config.variant is Variant.HOT_NONTHERMAL:
        cold = ReservoirSpec(ReservoirKind.THERMAL_BOSON, config.beta_c, config.omega_c)
        hot = ReservoirSpec(ReservoirKind.CORRELATED_PAIR_ONE_ATOM, config.beta_h, config.omega_h, config.xi)
    else:
        cold = ReservoirSpec(ReservoirKind.CORRELATED_PAIR_TWO_ATOMS, config.beta_c, config.omega_c, config.xi)
        hot = ReservoirSpec(ReservoirKind.THERMAL_BOSON, config.beta_h, config.omega_h)
    return effective_reservoir(cold), effective_reservoir(hot)


def phi_of(config: CycleConfig) -> float:
    return nonadiabatic_factor_analytic(config.tau_dri, config.omega_c, config.omega_h)


# ---------------------------------------------------------------------------
# characteristic function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _CharParams:
    omega_c: float
    omega_h: float
    phi: float
    a: float   # beta_c_eff * omega_c
    b: float   # beta_h_eff * omega_h

    @classmethod
    def of(cls, config):
        cold, hot = reservoirs(config)
        return cls(config.omega_c, config.omega_h, phi_of(config),
                   cold.beta_eff * config.omega_c, hot.beta_eff * config.omega_h)


def _radicands(p: _CharParams, u, v):
    u0 = u * (p.omega_c - p.omega_h) + v * p.omega_h
    v0 = u * (p.omega_c + p.omega_h) - v * p.omega_h
    dc = (1 + p.phi) * np.cosh(p.a - 1j * u0) + (1 - p.phi) * np.cosh(p.a - 1j * v0) - 2.0
    dh = (1 + p.phi) * np.cosh(p.b + 1j * u0) + (1 - p.phi) * np.cosh(p.b - 1j * v0) - 2.0
    return dc, dh


def _check_branch(p, u, v, samples=65):
    s = np.linspace(0.0, 1.0, samples)
    for d in _radicands(p, s * u, s * v):
        angle = np.unwrap(np.angle(d))
        if np.any(np.abs(angle) >= math.pi) or np.any(np.abs(d) == 0):
            raise BranchCutError(f"square-root argument winds across the cut between 0 and (u={u}, v={v})")


def _log_g(p: _CharParams, u, v):
    dc, dh = _radicands(p, u, v)
    log_norm = math.log(4.0 * math.sinh(0.5 * p.a) * math.sinh(0.5 * p.b))
    return log_norm - 0.5 * (np.log(dc) + np.log(dh))


def characteristic_function(u: float, v: float, config: CycleConfig) -> complex:
    """G(u, v) = < exp(-i v q_h - i u w) > over the two-point-measurement cycle statistics.

    Built from the generating function of parametric-oscillator transition
    probabilities, evaluated with the reservoirs' effective temperatures.
    """
    p = _CharParams.of(config)
    norm = complex(np.exp(_log_g(p, 0.0, 0.0)))
    if abs(norm - 1.0) > 1e-12:
        raise NormalizationError(f"G(0,0) = {norm!r}")
    _check_branch(p, u, v)
    return complex(np.exp(_log_g(p, u, v)))


def _d1(f, h):
    return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)


def _second_taylor(f, radius, n_nodes=64):
    """Taylor coefficient c_2 of f at 0 from the trapezoid rule on a circle.

    Converges geometrically in n_nodes for f analytic on a disc larger than
    `radius`, and has no difference cancellation.
    """
    theta = 2.0 * math.pi * np.arange(n_nodes) / n_nodes
    vals = f(radius * np.exp(1j * theta))
    return np.mean(vals * np.exp(-2j * theta)) / radius ** 2


@dataclass(frozen=True)
class LogCharDerivatives:
    mean_w: float
    mean_qh: float
    var_w: float
    step_first: float
    radius_second: float
    error_first: float
    error_second: float


def log_char_derivatives(config: CycleConfig) -> LogCharDerivatives:
    """Moments from numerical derivatives of ln G at the origin.

    First derivatives: 4th-order central differences with h = 1e-4/max(omega_h, 1).
    Second derivative: contour integral around u = 0 with radius a quarter of
    min(a, b, 1)/(omega_c + omega_h), the scale on which the square-root
    arguments can vanish.  Error estimates compare against half the step/radius.
    """
    p = _CharParams.of(config)
    fu = lambda z: _log_g(p, z, 0.0)
    fv = lambda z: _log_g(p, 0.0, z)
    h = 1e-4 / max(config.omega_h, 1.0)
    du, du_half = _d1(fu, h), _d1(fu, h / 2)
    dv, dv_half = _d1(fv, h), _d1(fv, h / 2)
    r = 0.25 * min(p.a, p.b, 1.0) / (config.omega_c + config.omega_h)
    c2, c2_half = _second_taylor(fu, r), _second_taylor(fu, 0.5 * r)
    return LogCharDerivatives(
        mean_w=float((1j * du).real),
        mean_qh=float((1j * dv).real),
        var_w=float((-2.0 * c2).real),
        step_first=h,
        radius_second=r,
        error_first=float(max(abs(du - du_half), abs(dv - dv_half))),
        error_second=float(2.0 * abs(c2 - c2_half)),
    )


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def mean_work(omega_c, omega_h, phi, n_c, n_h):
    return omega_h * (phi * n_c - n_h) + omega_c * (phi * n_h - n_c)


def mean_hot_heat(omega_h, phi, n_c, n_h):
    return omega_h * (n_h - phi * n_c)


def work_variance_closed_form(omega_c, omega_h, phi, n_c, n_h):
    g = 2 * phi ** 2 - 1
    return (omega_h ** 2 * (-0.5 + g * n_c ** 2 + n_h ** 2)
            + omega_c ** 2 * (-0.5 + n_c ** 2 + g * n_h ** 2)
            + omega_h * omega_c * phi * (1 - 2 * n_c ** 2 - 2 * n_h ** 2))


def efficiency_closed_form(omega_c, omega_h, phi, n_c, n_h):
    r = omega_c / omega_h
    return 1 - r - r * (phi - 1) * (n_h + n_c) / (n_h - phi * n_c)


def classify(minus_w: float, mean_qh: float, mean_qc: float, zero_tol: float = MODE_ZERO_TOL) -> Mode:
    if min(abs(minus_w), abs(mean_qh), abs(mean_qc)) <= zero_tol:
        return Mode.BOUNDARY
    if minus_w > 0 and mean_qh > 0 and mean_qc < 0:
        return Mode.ENGINE
    if minus_w < 0 and mean_qh < 0 and mean_qc > 0:
        return Mode.REFRIGERATOR
    if minus_w < 0 and mean_qc < 0:
        return Mode.HEATER
    return Mode.UNCLASSIFIED


def inverse_x_tanh_x(s: float) -> float:
    """Positive root x of x tanh(x) = s."""
    if not s > 0:
        raise DomainError(f"x tanh x = s needs s > 0, got {s}")
    hi = max(s, math.sqrt(s)) + 1.0
    return brentq(lambda x: x * math.tanh(x) - s, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                  maxiter=500)


def tur_bound(sigma_mean: float) -> float:
    """Lower bound csch(f(sigma)) on the coefficient of variation of power."""
    if not (sigma_mean > 0 and math.isfinite(sigma_mean)):
        raise DomainError(f"entropy production must be positive and finite, got {sigma_mean}")
    x = inverse_x_tanh_x(sigma_mean)
    if x > 700:
        return 0.0
    return 1.0 / math.sinh(x)


@dataclass(frozen=True)
class CycleMoments:
    mean_w: float
    var_w: float
    mean_qh: float
    mean_qc: float
    w_adi: float
    w_fric: float
    eta_th: float | None
    cop: float | None
    power: float
    sigma_mean: float
    mode: Mode
    cv_power: float
    tur_bound: float | None
    phi: float
    n_c: float
    n_h: float
    beta_c_eff: float
    beta_h_eff: float
    var_w_closed_form: float
    var_w_fd_error: float
    mean_w_fd: float
    mean_qh_fd: float

    @property
    def work_output(self) -> float:
        return -self.mean_w

    @property
    def generalized_carnot(self) -> float:
        return 1.0 - self.beta_h_eff / self.beta_c_eff


def cycle_moments(config: CycleConfig) -> CycleMoments:
    cold, hot = reservoirs(config)
    phi = phi_of(config)
    n_c, n_h = cold.n_occ, hot.n_occ
    wc, wh = config.omega_c, config.omega_h

    w = mean_work(wc, wh, phi, n_c, n_h)
    qh = mean_hot_heat(wh, phi, n_c, n_h)
    qc = -w - qh
    deriv = log_char_derivatives(config)
    var_w = deriv.var_w
    mode = classify(-w, qh, qc)
    sigma = -hot.beta_eff * qh - cold.beta_eff * qc
    eta = -w / qh if mode is Mode.ENGINE else None
    cop = qc / w if mode is Mode.REFRIGERATOR else None
    bound = tur_bound(sigma) if sigma > 0 else None
    return CycleMoments(
        mean_w=w, var_w=var_w, mean_qh=qh, mean_qc=qc,
        w_adi=(wh - wc) * (n_h - n_c),
        w_fric=(phi - 1) * (wh * n_c + wc * n_h),
        eta_th=eta, cop=cop,
        power=-w / config.tau_cyc,
        sigma_mean=sigma, mode=mode,
        cv_power=math.sqrt(max(var_w, 0.0)) / abs(w) if w != 0 else math.inf,
        tur_bound=bound, phi=phi, n_c=n_c, n_h=n_h,
        beta_c_eff=cold.beta_eff, beta_h_eff=hot.beta_eff,
        var_w_closed_form=work_variance_closed_form(wc, wh, phi, n_c, n_h),
        var_w_fd_error=deriv.error_second,
        mean_w_fd=deriv.mean_w, mean_qh_fd=deriv.mean_qh,
    )


def efficiency(config: CycleConfig) -> float:
    """Thermal efficiency -<w>/<q_h>; only defined in engine mode."""
    m = cycle_moments(config)
    if m.mode is not Mode.ENGINE:
        raise DomainError(
            f"machine operates as {m.mode.value}, efficiency is undefined; "
            f"use the coefficient of performance <q_c>/<w> for a refrigerator")
    return m.eta_th
