import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from correlated_otto import correlations as corr
from correlated_otto.errors import DomainError

ASINH1 = math.asinh(1.0)

# discord values from the Bloch-sphere brute-force oracle, frozen
FROZEN_DISCORD = {
    (0.3, 6.0, 2.0): 0.04235317636508751,
    (0.3, 6.0, 5.0): 0.22517858767480858,
    (0.3, 6.0, 8.0): 0.4551153981407209,
    (0.6, 2.0, 3.0): 0.3610548244276717,
}
# Wootters concurrence of the explicit 4x4 state, frozen
FROZEN_CONCURRENCE = {
    (0.3, 6.0, 4.0): 0.10358845446468323,
    (0.3, 6.0, 8.0): 0.5154677447220809,
}
# root-finder output for discord 0.031 at beta=0.3, omega=6 (regression pin)
XI_FOR_Q0031 = 1.702903482834132

betas = st.floats(0.05, 3.0)
omegas = st.floats(0.1, 10.0)


# --- thermal state -----------------------------------------------------------

def test_no_interaction_state():
    s = corr.thermal_state(0.3, 6.0, 0.0)
    assert s.rho_nd == 0.0
    assert s.Z == pytest.approx(2 * (math.cosh(1.8) + 1), rel=1e-14)
    assert s.rho_d == pytest.approx(1 / s.Z, rel=1e-14)


def test_boltzmann_ratio_matches_matrix_exponential():
    s = corr.thermal_state(0.3, 6.0, 2.0)
    rho = oracles.pair_state(0.3, 6.0, 2.0).real
    assert s.rho_g / s.rho_e == pytest.approx(math.exp(3.6), rel=1e-12)
    assert np.allclose(s.matrix(), rho, atol=1e-14, rtol=0)


@given(betas, omegas, st.floats(0.0, 10.0))
def test_state_invariants(beta, omega, xi):
    s = corr.thermal_state(beta, omega, xi)
    a, x = beta * omega, beta * xi
    if max(a, x) < 300:
        assert s.Z == pytest.approx(2 * (math.cosh(a) + math.cosh(x)), rel=1e-12)
    assert s.rho_g + s.rho_e + 2 * s.rho_d == pytest.approx(1.0, abs=1e-14)
    assert s.rho_nd <= 0.0
    assert abs(s.rho_nd) <= s.rho_d * (1 + 1e-15)
    assert 0.0 <= s.rho_e < 1.0 and 0.0 < s.rho_g <= 1.0 and 0.0 <= s.rho_d < 1.0


def test_state_extreme_arguments_stay_finite():
    s = corr.thermal_state(10.0, 100.0, 50.0)     # beta*omega = 1000
    assert math.isfinite(s.log_Z) and s.rho_g == pytest.approx(1.0)


@pytest.mark.parametrize("args", [(0, 1, 1), (-1, 1, 1), (1, 0, 1), (1, 1, -0.1),
                                  (math.nan, 1, 1), (1, math.inf, 1)])
def test_state_rejects_bad_input(args):
    with pytest.raises(DomainError):
        corr.thermal_state(*args)


# --- concurrence ------------------------------------------------------------------

def test_concurrence_zero_below_threshold():
    assert corr.concurrence(corr.thermal_state(1.0, 2.0, 0.5)) == 0.0
    assert corr.concurrence(corr.thermal_state(0.3, 6.0, 0.0)) == 0.0


@pytest.mark.parametrize("key", sorted(FROZEN_CONCURRENCE))
def test_concurrence_matches_wootters(key):
    value = corr.concurrence(corr.thermal_state(*key))
    assert value > 0
    assert value == pytest.approx(FROZEN_CONCURRENCE[key], abs=1e-13)
    assert value == pytest.approx(oracles.concurrence_wootters(oracles.pair_state(*key)), abs=1e-12)


@given(betas, omegas, st.floats(0.0, 10.0))
def test_concurrence_closed_form(beta, omega, xi):
    a, x = beta * omega, beta * xi
    c = corr.concurrence(corr.thermal_state(beta, omega, xi))
    assert 0.0 <= c <= 1.0
    if max(a, x) < 300:
        assert c == pytest.approx(max(0.0, (math.sinh(x) - 1) / (math.cosh(a) + math.cosh(x))), abs=1e-12)


@given(betas, omegas, st.floats(0.001, 0.999))
def test_separability_gap(beta, omega, frac):
    xi = frac * ASINH1 / beta
    s = corr.thermal_state(beta, omega, xi)
    assert corr.concurrence(s) == 0.0
    assert corr.discord_closed_form(s) > 0.0


# --- discord ---------------------------------------------------------------------------

@pytest.mark.parametrize("key", sorted(FROZEN_DISCORD))
def test_discord_frozen_oracle_values(key):
    res = corr.discord(corr.thermal_state(*key))
    assert res.discord == pytest.approx(FROZEN_DISCORD[key], abs=1e-9)
    assert res.optimal_theta == pytest.approx(math.pi / 4, abs=1e-4)
    assert res.phi_plus + res.phi_minus == pytest.approx(1.0, abs=1e-15)
    assert res.mutual_information - res.classical_correlations == pytest.approx(res.discord, abs=1e-15)


def test_discord_zero_without_interaction():
    res = corr.discord(corr.thermal_state(0.3, 6.0, 0.0))
    assert res.discord == 0.0
    assert res.mutual_information == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("beta,omega", [(1.0, 0.1), (0.5, 0.2)])
@pytest.mark.parametrize("bx", [0.01, 0.05, 0.1])
def test_high_temperature_limit(beta, omega, bx):
    q = corr.discord_of(beta, omega, bx / beta)
    assert abs(q - bx ** 2 / (8 * math.log(2))) / q < 0.05


@settings(max_examples=40, deadline=None)
@given(betas, omegas, st.floats(0.0, 8.0))
def test_discord_closed_form_equals_sweep(beta, omega, bx):
    res = corr.discord(corr.thermal_state(beta, omega, bx / beta))
    assert abs(res.discord - res.swept_discord) < 1e-9
    assert 0.0 <= res.discord <= 1.0


@settings(max_examples=25, deadline=None)
@given(betas, omegas, st.floats(0.0, 9.0), st.floats(0.01, 1.0))
def test_discord_monotone_in_xi(beta, omega, bx, dbx):
    lo = corr.thermal_state(beta, omega, bx / beta)
    hi = corr.thermal_state(beta, omega, (bx + dbx) / beta)
    assert corr.discord_closed_form(hi) > corr.discord_closed_form(lo)
    assert corr.concurrence(hi) >= corr.concurrence(lo)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.1, 20.0), st.floats(1e-3, 10.0))
def test_discord_precision_in_stiff_regimes(beta, omega, bx):
    # tiny discords at large beta*omega must not drown in cancellation
    ref = oracles.discord_mp(beta, omega, bx / beta)
    assert abs(corr.discord_closed_form(corr.thermal_state(beta, omega, bx / beta)) - ref) <= 1e-6 * ref


def test_discord_rejects_tiny_grid():
    with pytest.raises(DomainError):
        corr.discord(corr.thermal_state(1, 1, 1), theta_grid_size=2)


# --- inversion -----------------------------------------------------------------------------

def test_xi_for_zero_discord():
    assert corr.xi_for_discord(0.0, 0.3, 6.0) == 0.0


def test_xi_for_discord_pinned_separable_point():
    xi = corr.xi_for_discord(0.031, 0.3, 6.0)
    assert xi == pytest.approx(XI_FOR_Q0031, rel=1e-9)
    assert corr.concurrence(corr.thermal_state(0.3, 6.0, xi)) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.5, 8.0), st.floats(0.001, 0.9))
def test_xi_for_discord_roundtrip(beta, omega, frac):
    q = frac * corr.max_discord(beta, omega)
    xi = corr.xi_for_discord(q, beta, omega)
    assert abs(corr.discord_of(beta, omega, xi) - q) < 1e-10


def test_unreachable_discord_reports_maximum():
    with pytest.raises(DomainError, match="attainable maximum"):
        corr.xi_for_discord(1.0, 0.3, 6.0)
    with pytest.raises(DomainError):
        corr.xi_for_discord(-0.1, 0.3, 6.0)
