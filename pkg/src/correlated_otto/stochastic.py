"""Exact two-point-measurement statistics of one engine cycle.

Every atom of the joint distribution sits on the integer lattice
``w = a*omega_c + b*omega_h``, ``q_h = -b*omega_h``; atoms are keyed by the
integer pair (a, b) so aggregation is exact.

Forward cycle, with cold start n, end of compression m, hot reset k and end
of expansion j::

    a = j - n,   b = m - k

The time-reversed (clockwise) cycle starts from the hot thermal state, runs the
compression backwards, resets on the cold side and runs the expansion
backwards.  Its transition matrices are the transposes of the forward ones.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .cycle import CycleConfig, phi_of, reservoirs
from .errors import DomainError, TruncationError
from .fock_dynamics import (
    DEFAULT_DIM, DEFAULT_GUARD, DrivingProtocol, required_dim_for_tail, unitary_transition_matrix,
)

LEAK_TOL = 1e-6
PROPAGATOR_PHI_TOL = 1e-10
MAX_SUGGESTED_DIM = 512      # beyond this the dense propagators stop being practical


class CycleDirection(str, enum.Enum):
    FORWARD = "forward"
    REVERSED = "reversed"


@dataclass(frozen=True)
class JointWorkHeatDistribution:
    a: np.ndarray
    b: np.ndarray
    prob: np.ndarray
    leak: float
    direction: CycleDirection
    omega_c: float
    omega_h: float

    @property
    def w(self) -> np.ndarray:
        return self.a * self.omega_c + self.b * self.omega_h

    @property
    def q_h(self) -> np.ndarray:
        return -self.b * self.omega_h

    @property
    def atoms(self) -> list[tuple[float, float, float]]:
        return list(zip(self.w.tolist(), self.q_h.tolist(), self.prob.tolist()))

    @property
    def total(self) -> float:
        return float(self.prob.sum())

    def expect(self, values) -> float:
        return float(np.dot(self.prob, values) / self.total)

    def mean_w(self) -> float:
        return self.expect(self.w)

    def mean_qh(self) -> float:
        return self.expect(self.q_h)

    def var_w(self) -> float:
        w = self.w
        mu = self.expect(w)
        return self.expect((w - mu) ** 2)

    def cv_power(self) -> float:
        return math.sqrt(self.var_w()) / abs(self.mean_w())

    def characteristic_function(self, u: float, v: float) -> complex:
        return complex(np.dot(self.prob, np.exp(-1j * v * self.q_h - 1j * u * self.w)))

    def probability(self, a: int, b: int) -> float:
        hit = np.nonzero((self.a == a) & (self.b == b))[0]
        return float(self.prob[hit[0]]) if len(hit) else 0.0


def _pair_sum(F, G):
    """S[x, y] = sum F[i, j] G[k, l] over l - i = x, j - k = y.

    Returned as a dense array indexed by (x + T - 1, y + T - 1).
    """
    T = F.shape[0]
    out = np.zeros((2 * T - 1, 2 * T - 1))
    Gt = G.T
    rows = np.arange(T)
    diag_index = (rows[None, :] - rows[:, None]) + (T - 1)   # (k - j) + T - 1 for M[j, k]
    for x in range(-(T - 1), T):
        lo, hi = max(0, -x), min(T, T - x)
        M = F[lo:hi].T @ Gt[lo + x:hi + x]
        sums = np.bincount(diag_index.ravel(), weights=M.ravel(), minlength=2 * T - 1)
        # offset k - j = -y
        out[x + T - 1] = sums[::-1]
    return out


def _thermal_weights(ratio, size):
    return (1.0 - ratio) * ratio ** np.arange(size)


def suggest_dim(config: CycleConfig, guard: int = DEFAULT_GUARD, tail: float = 1e-13) -> int:
    """Cutoff whose trusted band holds both thermal ensembles, before and after each
    stroke, to within `tail`.

    A stroke with nonadiabatic factor phi stretches one quadrature of the Gaussian
    state by lam = phi + sqrt(phi^2 - 1); a state whose largest quadrature variance
    is v (vacuum = 1) has a Fock tail decaying like ((v - 1)/(v + 1))^n.
    """
    cold, hot = reservoirs(config)
    phi = phi_of(config)
    lam = phi + math.sqrt(max(phi * phi - 1.0, 0.0))
    ratio = 0.0
    for res in (cold, hot):
        q = res.r1 / res.r2
        v = lam * (1.0 + q) / (1.0 - q)
        ratio = max(ratio, q, (v - 1.0) / (v + 1.0))
    dim = max(DEFAULT_DIM, int(8 * math.ceil((required_dim_for_tail(ratio, tail) + guard) / 8)))
    if dim > MAX_SUGGESTED_DIM:
        raise TruncationError(f"this configuration needs dim={dim}, above the automatic limit of "
                              f"{MAX_SUGGESTED_DIM}; pass an explicit dim to force it", required_dim=dim)
    return dim


@dataclass(frozen=True)
class _Ingredients:
    p_cold: np.ndarray
    p_hot: np.ndarray
    P_ch: np.ndarray
    P_hc: np.ndarray
    tail: float


def _ingredients(config, dim, guard, leak_tol):
    cold, hot = reservoirs(config)
    size = dim - guard
    if size < 2:
        raise TruncationError(f"dim={dim} leaves no trusted band above the guard of {guard}",
                              required_dim=guard + DEFAULT_DIM // 2)
    q_c, q_h = cold.r1 / cold.r2, hot.r1 / hot.r2
    tail = q_c ** size + q_h ** size
    if tail > leak_tol:
        need = required_dim_for_tail(max(q_c, q_h), leak_tol / 4) + guard
        raise TruncationError(f"thermal tail {tail:.3e} beyond the trusted band exceeds "
                              f"{leak_tol:g}; need dim >= {need}", required_dim=need)
    p_cold = _thermal_weights(q_c, size)
    p_hot = _thermal_weights(q_h, size)
    tm_ch = unitary_transition_matrix(
        DrivingProtocol.compression(config.omega_c, config.omega_h, config.tau_dri),
        dim=dim, guard=guard, row_weights=p_cold, leak_tol=leak_tol, phi_tol=PROPAGATOR_PHI_TOL)
    tm_hc = unitary_transition_matrix(
        DrivingProtocol.expansion(config.omega_c, config.omega_h, config.tau_dri),
        dim=dim, guard=guard, row_weights=p_hot, leak_tol=leak_tol, phi_tol=PROPAGATOR_PHI_TOL)
    # parity selection rule: odd-step transitions are exactly forbidden
    idx = np.arange(size)
    even = ((idx[:, None] + idx[None, :]) % 2) == 0
    return _Ingredients(p_cold, p_hot, np.where(even, tm_ch.probs, 0.0),
                        np.where(even, tm_hc.probs, 0.0), tail)


def _to_distribution(table, direction, config, dim, guard, leak_tol):
    T = (table.shape[0] + 1) // 2
    xs, ys = np.nonzero(table > 0)
    prob = table[xs, ys]
    leak = max(0.0, 1.0 - float(prob.sum()))
    if leak > leak_tol:
        need = dim + max(guard, dim // 2)
        raise TruncationError(f"{direction.value} distribution leaks {leak:.3e} > {leak_tol:g} "
                              f"at dim={dim}; need dim >= {need}", required_dim=need)
    return JointWorkHeatDistribution(
        a=xs - (T - 1), b=ys - (T - 1), prob=prob, leak=leak, direction=direction,
        omega_c=config.omega_c, omega_h=config.omega_h)


def build_joint_distribution(config: CycleConfig, dim: int = DEFAULT_DIM, guard: int = DEFAULT_GUARD,
                             leak_tol: float = LEAK_TOL) -> JointWorkHeatDistribution:
    ing = _ingredients(config, dim, guard, leak_tol)
    F = ing.p_cold[:, None] * ing.P_ch          # F[n, m]
    G = ing.p_hot[:, None] * ing.P_hc           # G[k, j]
    return _to_distribution(_pair_sum(F, G), CycleDirection.FORWARD, config, dim, guard, leak_tol)


def build_reversed_distribution(config: CycleConfig, dim: int = DEFAULT_DIM, guard: int = DEFAULT_GUARD,
                                leak_tol: float = LEAK_TOL) -> JointWorkHeatDistribution:
    ing = _ingredients(config, dim, guard, leak_tol)
    # reversed cycle: hot start m -> n (backward compression), cold reset j -> k (backward expansion)
    # a = n - j, b = k - m
    F = ing.p_cold[:, None] * ing.P_hc.T        # F[j, k]
    G = ing.p_hot[:, None] * ing.P_ch.T         # G[m, n]
    return _to_distribution(_pair_sum(F, G), CycleDirection.REVERSED, config, dim, guard, leak_tol)


def joint_from_matrices(config: CycleConfig, P_ch: np.ndarray, P_hc: np.ndarray,
                        direction=CycleDirection.FORWARD) -> JointWorkHeatDistribution:
    """Distribution for user-supplied stroke matrices (e.g. the adiabatic identity)."""
    cold, hot = reservoirs(config)
    size = P_ch.shape[0]
    p_cold = _thermal_weights(cold.r1 / cold.r2, size)
    p_hot = _thermal_weights(hot.r1 / hot.r2, size)
    if CycleDirection(direction) is CycleDirection.FORWARD:
        table = _pair_sum(p_cold[:, None] * P_ch, p_hot[:, None] * P_hc)
    else:
        table = _pair_sum(p_cold[:, None] * P_hc.T, p_hot[:, None] * P_ch.T)
    return _to_distribution(table, CycleDirection(direction), config, size, 0, 1.0)


def entropy_production_values(dist: JointWorkHeatDistribution, config: CycleConfig) -> np.ndarray:
    """sigma = (beta_c - beta_h) q_h + beta_c w with effective inverse temperatures."""
    cold, hot = reservoirs(config)
    return cold.beta_eff * config.omega_c * dist.a + hot.beta_eff * config.omega_h * dist.b


def entropy_production_distribution(dist: JointWorkHeatDistribution,
                                    config: CycleConfig) -> list[tuple[float, float]]:
    """(sigma, probability) pairs sorted by sigma, coincident values merged."""
    sigma = entropy_production_values(dist, config)
    order = np.argsort(sigma, kind="stable")
    out: list[list[float]] = []
    for s, p in zip(sigma[order], dist.prob[order]):
        if out and abs(s - out[-1][0]) <= 1e-12 * max(1.0, abs(s)):
            out[-1][1] += p
        else:
            out.append([float(s), float(p)])
    return [(s, p) for s, p in out]


@dataclass(frozen=True)
class FluctuationCheck:
    max_pointwise_error: float
    n_points: int
    slope: float
    intercept: float
    integral: float


def fluctuation_theorem_check(forward: JointWorkHeatDistribution, reverse: JointWorkHeatDistribution,
                              config: CycleConfig, min_prob: float = 1e-12) -> FluctuationCheck:
    """Compare ln[p(sigma) / p_R(-sigma)] with sigma on the shared support."""
    fwd = entropy_production_distribution(forward, config)
    rev = entropy_production_distribution(reverse, config)
    rev_sigma = np.array([s for s, _ in rev])
    rev_prob = np.array([p for _, p in rev])
    xs, ys, ws = [], [], []
    for s, p in fwd:
        if p <= min_prob:
            continue
        k = int(np.argmin(np.abs(rev_sigma + s)))
        if abs(rev_sigma[k] + s) > 1e-9 * max(1.0, abs(s)) or rev_prob[k] <= min_prob:
            continue
        xs.append(s)
        ys.append(math.log(p / rev_prob[k]))
        ws.append(p)
    if len(xs) < 2:
        raise DomainError("forward and reversed distributions share fewer than two points")
    xs, ys, ws = map(np.asarray, (xs, ys, ws))
    slope, intercept = np.polyfit(xs, ys, 1, w=np.sqrt(ws))
    sig_all = np.array([s for s, _ in fwd])
    p_all = np.array([p for _, p in fwd])
    return FluctuationCheck(
        max_pointwise_error=float(np.abs(ys - xs).max()),
        n_points=len(xs),
        slope=float(slope),
        intercept=float(intercept),
        integral=float(np.dot(p_all, np.exp(-sig_all))),
    )


@dataclass(frozen=True)
class SampleResult:
    counts: np.ndarray
    n_samples: int
    seed: int
    workers: int
    mean_w: float
    var_w: float
    mean_qh: float
    se_mean_w: float
    se_var_w: float
    se_mean_qh: float


def sample_trajectories(dist: JointWorkHeatDistribution, n_samples: int, seed: int,
                        workers: int = 1) -> SampleResult:
    """Inverse-CDF sampling of cycles from the retained atoms.

    The stream is split into `workers` chunks, each seeded by a child of
    SeedSequence(seed); output is reproducible for a fixed (seed, workers).
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    if workers < 1:
        raise DomainError("workers must be >= 1")
    cdf = np.cumsum(dist.prob)
    cdf /= cdf[-1]
    sizes = [n_samples // workers + (1 if i < n_samples % workers else 0) for i in range(workers)]
    counts = np.zeros(len(dist.prob), dtype=np.int64)
    for child, size in zip(np.random.SeedSequence(seed).spawn(workers), sizes):
        rng = np.random.default_rng(child)
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        counts += np.bincount(np.minimum(idx, len(cdf) - 1), minlength=len(cdf))

    n = n_samples
    freq = counts / n

    def stats(x):
        mu = float(np.dot(freq, x))
        centred = x - mu
        m2 = float(np.dot(freq, centred ** 2))
        m4 = float(np.dot(freq, centred ** 4))
        var = m2 * n / (n - 1) if n > 1 else 0.0
        return mu, var, math.sqrt(var / n), math.sqrt(max(m4 - m2 ** 2, 0.0) / n)

    mw, vw, se_mw, se_vw = stats(dist.w)
    mq, _, se_mq, _ = stats(dist.q_h)
    return SampleResult(counts=counts, n_samples=n, seed=seed, workers=workers,
                        mean_w=mw, var_w=vw, mean_qh=mq,
                        se_mean_w=se_mw, se_var_w=se_vw, se_mean_qh=se_mq)
