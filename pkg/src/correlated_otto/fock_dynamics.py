"""Truncated Fock-space numerics for the cavity mode.

Two independent pieces live here:

* the micromaser-type master equation for the cavity in contact with a stream
  of atoms, integrated to its steady state (and, separately, solved as a null
  space problem);
* the unitary frequency ramps, propagated in the instantaneous eigenbasis of
  the oscillator so that transition probabilities between the initial and the
  final number states come straight out of the propagator.

In the instantaneous eigenbasis the oscillator p^2/2 + w(t)^2 x^2/2 obeys

    H_eff(t) = w(t) (n + 1/2) - i r'(t) (a^2 - a†^2)/2,   r(t) = ln(w(t))/2,

which is propagated with a fourth-order Magnus integrator.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .errors import ConvergenceError, DiagnosticError, DomainError, TruncationError
from .reservoir import EffectiveReservoir

DEFAULT_DIM = 64
DEFAULT_GUARD = 16
DEFAULT_GAMMA_TAU = 0.05
TAIL_TOL = 1e-12
LEAK_TOL = 1e-6


@dataclass
class TruncatedFockOperator:
    entries: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.entries))


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


# ---------------------------------------------------------------------------
# master equation
# ---------------------------------------------------------------------------

def _dissipator(L, eye):
    # row-major vectorization: vec(A X B) = kron(A, B^T) vec(X)
    LdL = (L.conj().T @ L).tocsr()
    return sp.kron(L, L.conj()) - 0.5 * sp.kron(LdL, eye) - 0.5 * sp.kron(eye, LdL.T)


def lindblad_generator(r1: float, r2: float, gamma_tau: float, dim: int) -> sp.csc_matrix:
    """Liouvillian acting on row-major vec(rho).

    r1 weights photon emission into the cavity (jump operator a†), r2 photon
    absorption (jump operator a).
    """
    a = sp.csr_matrix(annihilation(dim))
    eye = sp.identity(dim, format="csr")
    g2 = gamma_tau ** 2
    gen = g2 * r1 * _dissipator(a.T.tocsr(), eye) + g2 * r2 * _dissipator(a, eye)
    return gen.tocsc()


def analytic_steady_state(reservoir: EffectiveReservoir, dim: int) -> np.ndarray:
    """Geometric steady state (1 - q) q^n on the first dim levels, q = r1/r2.

    Not renormalized: the mass beyond the cutoff is the tail q^dim.
    """
    q = reservoir.r1 / reservoir.r2
    n = np.arange(dim)
    return np.diag((1.0 - q) * q ** n).astype(complex)


def required_dim_for_tail(ratio: float, tail_tol: float = TAIL_TOL) -> int:
    if ratio <= 0:
        return 1
    return int(math.ceil(math.log(tail_tol) / math.log(ratio))) + 1


def _check_tail(reservoir, dim, tail_tol):
    q = reservoir.r1 / reservoir.r2
    if q > 0 and q ** dim >= tail_tol:
        need = required_dim_for_tail(q, tail_tol)
        raise TruncationError(
            f"steady-state tail q^dim = {q ** dim:.3e} exceeds {tail_tol:g} at dim={dim}; "
            f"need dim >= {need}", required_dim=need)


def coherent_state(alpha: complex, dim: int) -> np.ndarray:
    n = np.arange(dim)
    amp = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * gammaln(n + 1)) * np.power(complex(alpha), n)
    amp /= np.linalg.norm(amp)
    return np.outer(amp, amp.conj())


def check_density_matrix(rho: np.ndarray, tol: float = 1e-9) -> dict:
    herm = float(np.abs(rho - rho.conj().T).max())
    tr = complex(np.trace(rho))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    ok = herm <= tol and abs(tr - 1.0) <= tol and min_eig >= -tol
    return {"hermiticity": herm, "trace_error": abs(tr - 1.0), "min_eigenvalue": min_eig, "ok": ok}


def lindblad_steady_state(reservoir: EffectiveReservoir, gamma_tau: float = DEFAULT_GAMMA_TAU,
                          dim: int = DEFAULT_DIM, rho0: np.ndarray | None = None,
                          residual_tol: float = 1e-10, tail_tol: float = TAIL_TOL,
                          max_chunks: int = 40, samples_per_chunk: int = 8) -> TruncatedFockOperator:
    """Integrate the master equation until ||d rho/dt|| < residual_tol.

    Trace, Hermiticity and positivity are audited at the sampled output times of
    every integration chunk; any excursion beyond 1e-9 raises DiagnosticError.
    """
    if gamma_tau <= 0:
        raise DomainError("gamma_tau must be positive")
    _check_tail(reservoir, dim, tail_tol)
    gen = lindblad_generator(reservoir.r1, reservoir.r2, gamma_tau, dim)
    rho = coherent_state(1.0, dim) if rho0 is None else np.asarray(rho0, dtype=complex)
    y = rho.ravel().astype(complex)

    rate = gamma_tau ** 2 * max(reservoir.r2 - reservoir.r1, 1e-300)
    t, horizon = 0.0, 1.0 / rate
    worst = {"hermiticity": 0.0, "trace_error": 0.0, "min_eigenvalue": 0.0}
    residual = float(np.linalg.norm(gen @ y))
    chunks = 0
    while residual >= residual_tol:
        if chunks >= max_chunks:
            raise ConvergenceError(
                f"master equation not stationary after {chunks} chunks (residual {residual:.3e})")
        t_end = t + horizon
        sol = solve_ivp(lambda _t, v: gen @ v, (t, t_end), y, method="BDF", jac=gen,
                        rtol=1e-10, atol=1e-14,
                        t_eval=np.linspace(t, t_end, samples_per_chunk + 1)[1:])
        if sol.status != 0:
            raise ConvergenceError(f"integrator failed: {sol.message}")
        for k in range(sol.y.shape[1]):
            audit = check_density_matrix(sol.y[:, k].reshape(dim, dim))
            if not audit.pop("ok"):
                raise DiagnosticError(f"density matrix left the physical set at t={sol.t[k]:.6g}: {audit}")
            worst["hermiticity"] = max(worst["hermiticity"], audit["hermiticity"])
            worst["trace_error"] = max(worst["trace_error"], audit["trace_error"])
            worst["min_eigenvalue"] = min(worst["min_eigenvalue"], audit["min_eigenvalue"])
        y = sol.y[:, -1]
        t = t_end
        horizon *= 2.0
        chunks += 1
        residual = float(np.linalg.norm(gen @ y))

    rho = y.reshape(dim, dim)
    return TruncatedFockOperator(rho, info={"t_final": t, "residual": residual,
                                            "chunks": chunks, "audit": worst})


def lindblad_steady_state_nullspace(reservoir: EffectiveReservoir,
                                    gamma_tau: float = DEFAULT_GAMMA_TAU,
                                    dim: int = DEFAULT_DIM,
                                    tail_tol: float = TAIL_TOL) -> TruncatedFockOperator:
    """Steady state as the trace-one null vector of the Liouvillian (sparse LU)."""
    _check_tail(reservoir, dim, tail_tol)
    gen = lindblad_generator(reservoir.r1, reservoir.r2, gamma_tau, dim).tolil()
    trace_row = np.zeros(dim * dim)
    trace_row[:: dim + 1] = 1.0
    gen[0, :] = trace_row
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    y = spla.spsolve(gen.tocsc(), rhs)
    rho = y.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    return TruncatedFockOperator(rho, info={"method": "nullspace"})


# ---------------------------------------------------------------------------
# unitary strokes
# ---------------------------------------------------------------------------

class Direction(str, enum.Enum):
    COMPRESSION = "compression"
    EXPANSION = "expansion"


@dataclass(frozen=True)
class DrivingProtocol:
    """Frequency ramp with 1/w(t) linear in time.

    For a compression from w_c to w_h this is w_c w_h tau / [(w_c - w_h) t + w_h tau];
    the expansion is its time reverse.
    """
    omega_start: float
    omega_end: float
    tau: float
    direction: Direction

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if not (self.omega_start > 0 and self.omega_end > 0 and self.tau > 0):
            raise DomainError("frequencies and duration must be positive")
        if not all(map(math.isfinite, (self.omega_start, self.omega_end, self.tau))):
            raise DomainError("protocol parameters must be finite")
        expected = Direction.COMPRESSION if self.omega_end > self.omega_start else Direction.EXPANSION
        if self.omega_end != self.omega_start and self.direction is not expected:
            raise DomainError(f"{self.direction.value} protocol cannot go from "
                              f"{self.omega_start} to {self.omega_end}")

    @classmethod
    def compression(cls, omega_c, omega_h, tau):
        return cls(omega_c, omega_h, tau, Direction.COMPRESSION)

    @classmethod
    def expansion(cls, omega_c, omega_h, tau):
        return cls(omega_h, omega_c, tau, Direction.EXPANSION)

    def reversed(self) -> "DrivingProtocol":
        other = Direction.EXPANSION if self.direction is Direction.COMPRESSION else Direction.COMPRESSION
        return DrivingProtocol(self.omega_end, self.omega_start, self.tau, other)

    def _slope(self):
        return (1.0 / self.omega_end - 1.0 / self.omega_start) / self.tau

    def omega(self, t):
        return 1.0 / (1.0 / self.omega_start + self._slope() * np.asarray(t, dtype=float))

    def squeeze_rate(self, t):
        """r'(t) = w'(t) / (2 w(t)) for the instantaneous-eigenbasis frame."""
        return -0.5 * self.omega(t) * self._slope()


def _frame_operators(dim):
    a = annihilation(dim)
    number = np.arange(dim) + 0.5
    k_herm = -0.5j * (a @ a - a.T @ a.T)          # -i (a^2 - a†^2)/2, Hermitian
    comm = 1j * (number[:, None] - number[None, :]) * k_herm   # i [diag(number), k_herm]
    return number, k_herm, comm


_C1 = 0.5 - math.sqrt(3.0) / 6.0
_C2 = 0.5 + math.sqrt(3.0) / 6.0


def propagate(protocol: DrivingProtocol, dim: int, n_steps: int, batch: int = 256) -> np.ndarray:
    """Stroke propagator in the instantaneous number basis (fourth-order Magnus)."""
    number, k_herm, comm = _frame_operators(dim)
    h = protocol.tau / n_steps
    starts = np.arange(n_steps) * h
    t1, t2 = starts + _C1 * h, starts + _C2 * h
    w1, w2 = protocol.omega(t1), protocol.omega(t2)
    s1, s2 = protocol.squeeze_rate(t1), protocol.squeeze_rate(t2)
    diag_coef = 0.5 * h * (w1 + w2)
    k_coef = 0.5 * h * (s1 + s2)
    c_coef = math.sqrt(3.0) * h * h / 12.0 * (w1 * s2 - w2 * s1)

    U = np.eye(dim, dtype=complex)
    for lo in range(0, n_steps, batch):
        hi = min(lo + batch, n_steps)
        M = (k_coef[lo:hi, None, None] * k_herm + c_coef[lo:hi, None, None] * comm)
        idx = np.arange(dim)
        M[:, idx, idx] += diag_coef[lo:hi, None] * number
        evals, evecs = np.linalg.eigh(M)
        steps = (evecs * np.exp(-1j * evals)[:, None, :]) @ evecs.conj().transpose(0, 2, 1)
        for step in steps:
            U = step @ U
    return U


@dataclass(frozen=True)
class TransitionMatrix:
    """p[n, m] = |<m|U|n>|^2 restricted to the trusted band n, m < dim - guard."""
    probs: np.ndarray
    leak: np.ndarray
    dim: int
    guard: int
    n_steps: int
    protocol: DrivingProtocol

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    def energy_ratio(self, weights: np.ndarray) -> float:
        """sum_n w_n sum_m p[n,m] (m + 1/2) / sum_n w_n (n + 1/2)."""
        k = len(weights)
        levels = np.arange(self.size) + 0.5
        return float(weights @ (self.probs[:k] @ levels) / (weights @ levels[:k]))


def _vacuum_phi(probs):
    return float(np.sum(probs[0] * (2.0 * np.arange(probs.shape[1]) + 1.0)))


@functools.lru_cache(maxsize=512)
def _converged_propagator(protocol, dim, phi_tol, max_doublings):
    n = max(64, int(math.ceil(2.0 * protocol.tau * max(protocol.omega_start, protocol.omega_end))))
    U = propagate(protocol, dim, n)
    prev = _vacuum_phi(np.abs(U.T) ** 2)
    for _ in range(max_doublings):
        n *= 2
        U = propagate(protocol, dim, n)
        cur = _vacuum_phi(np.abs(U.T) ** 2)
        if abs(cur - prev) < phi_tol:
            U.setflags(write=False)
            return U, n
        prev = cur
    raise ConvergenceError(f"propagator not converged after {max_doublings} step doublings")


def unitary_transition_matrix(protocol: DrivingProtocol, dim: int = DEFAULT_DIM,
                              guard: int = DEFAULT_GUARD, row_weights=None,
                              leak_tol: float = LEAK_TOL, phi_tol: float = 1e-6,
                              max_doublings: int = 8) -> TransitionMatrix:
    """Transition probabilities between instantaneous number states across a stroke.

    The step count is doubled until the vacuum-row nonadiabatic factor changes
    by less than phi_tol.  Leak of row n is the probability that ends in the
    guard band.  Rows near the top of the trusted band always spill into it,
    so the check is made on weight_n * leak_n with the caller's ensemble
    weights (normalized to a maximum of one); without weights it covers the
    lower half of the trusted band with unit weight.
    """
    if guard < 0 or guard >= dim:
        raise DomainError(f"guard band {guard} incompatible with dim {dim}")
    size = dim - guard
    if row_weights is None:
        weights = np.zeros(size)
        weights[: max(1, size // 2)] = 1.0
    else:
        weights = np.asarray(row_weights, dtype=float)
        if weights.ndim != 1 or len(weights) > size or np.any(weights < 0):
            raise DomainError(f"row_weights must be non-negative with at most {size} entries")
        weights = np.pad(weights / weights.max(), (0, size - len(weights)))
    U, n_steps = _converged_propagator(protocol, dim, phi_tol, max_doublings)
    full = np.abs(U.T) ** 2
    probs = full[:size, :size].copy()
    leak = np.clip(1.0 - probs.sum(axis=1), 0.0, None)
    weighted = weights * leak
    worst = int(np.argmax(weighted))
    if weighted[worst] > leak_tol:
        raise TruncationError(
            f"row {worst} leaks {leak[worst]:.3e} (weighted {weighted[worst]:.3e} > {leak_tol:g}) "
            f"into the guard band (dim={dim}, guard={guard})",
            required_dim=dim + max(guard, dim // 2))
    probs.setflags(write=False)
    leak.setflags(write=False)
    return TransitionMatrix(probs=probs, leak=leak, dim=dim, guard=guard,
                            n_steps=n_steps, protocol=protocol)


def nonadiabatic_factor_numeric(tau_dri: float, omega_c: float, omega_h: float,
                                dim: int = DEFAULT_DIM, guard: int = DEFAULT_GUARD,
                                beta_omega: float = 2.0) -> float:
    """Energy amplification of a thermal ensemble across the compression stroke.

    The ensemble is thermal at reduced inverse temperature beta_omega (beta * omega_c);
    rows with weight below 1e-16 are dropped.
    """
    n_rows = min(dim - guard, int(math.ceil(-math.log(1e-16) / beta_omega)) + 1)
    weights = np.exp(-beta_omega * np.arange(n_rows))
    tm = unitary_transition_matrix(DrivingProtocol.compression(omega_c, omega_h, tau_dri),
                                   dim=dim, guard=guard, row_weights=weights)
    return tm.energy_ratio(weights)


def nonadiabatic_factor_analytic(tau_dri: float, omega_c: float, omega_h: float) -> float:
    if not (tau_dri > 0 and omega_c > 0 and omega_h > 0):
        raise DomainError("tau_dri and both frequencies must be positive")
    if omega_c == omega_h:
        raise DomainError("omega_c and omega_h must differ")
    zeta = (2.0 * tau_dri * omega_c * omega_h / (omega_h - omega_c)) ** 2
    log_ratio = math.log(omega_h / omega_c)
    eps = zeta - 1.0
    L2 = log_ratio ** 2
    if abs(eps) < 1e-6:
        return 1.0 + L2 / 2.0 - eps * L2 ** 2 / 24.0 + eps ** 2 * L2 ** 3 / 720.0
    if eps > 0:
        return 1.0 + (1.0 - math.cos(math.sqrt(eps) * log_ratio)) / eps
    return 1.0 + (math.cosh(math.sqrt(-eps) * log_ratio) - 1.0) / (-eps)
