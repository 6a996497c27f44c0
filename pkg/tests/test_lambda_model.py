import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonon_hom.lambda_model import (
    E,
    G0,
    GA,
    LambdaParams,
    Mode,
    bare_hamiltonian,
    bose_occupation,
    dressed_system,
    phonon_operators,
    spectral_density,
    spectral_peak,
    thermal_frequency,
    thermal_rates,
)
from phonon_hom.numerics import hermitian_eigensystem

# Reference values from 40-digit mpmath evaluations of the closed forms,
# with k_B and hbar at their exact SI values.
THERMAL_298 = 39.01426105984272275
J_AT_CUTOFF = 0.010576386781902498
J_AT_HALF = 3.2050972456298299e-4
N_AT_HALF = 77.529590102301953
DOWN_AT_HALF = 0.025169497293732754
UP_AT_HALF = 0.024848987569169771
PEAK = 2.6944387170614959
RAMAN_LAMBDA_MINUS = -0.020761493398643017
RAMAN_LAMBDA_PLUS = 6.0207614933986430
RAMAN_GAP = 6.0415229867972860
RAMAN_E_MINUS = 3.4364668385792301e-3

couplings = st.floats(0.01, 20.0)


def test_thermal_frequency_room_temperature():
    assert thermal_frequency(298.0) == pytest.approx(THERMAL_298, rel=1e-14)


def test_spectral_density_values():
    assert spectral_density(0.0) == 0.0
    assert spectral_density(2.2) == pytest.approx(J_AT_CUTOFF, rel=1e-13)
    assert spectral_density(0.5) == pytest.approx(J_AT_HALF, rel=1e-13)


def test_spectral_density_peak():
    assert spectral_peak() == pytest.approx(PEAK, rel=1e-15)
    w = np.linspace(0.01, 8, 20001)
    assert w[np.argmax(spectral_density(w))] == pytest.approx(PEAK, abs=1e-3)


def test_spectral_density_rejects_negative_frequency():
    with pytest.raises(ValueError):
        spectral_density(-0.1)


def test_bose_occupation_values():
    w_ln2 = math.log(2) * thermal_frequency(298.0)
    assert bose_occupation(w_ln2) == pytest.approx(1.0, rel=1e-13)
    assert bose_occupation(THERMAL_298) == pytest.approx(1 / (math.e - 1), rel=1e-13)
    assert bose_occupation(0.5) == pytest.approx(N_AT_HALF, rel=1e-12)


def test_bose_occupation_classical_limit():
    w = 1e-4
    assert bose_occupation(w) == pytest.approx(thermal_frequency(298.0) / w, rel=1e-5)


@pytest.mark.parametrize("w", [0.0, -1.0])
def test_bose_occupation_pole_rejected(w):
    with pytest.raises(ValueError):
        bose_occupation(w)


def test_bare_hamiltonian_entries():
    h = bare_hamiltonian(LambdaParams(nu=6.0, omega=0.5, h=0.5))
    expected = np.zeros((3, 3))
    expected[E, E] = 6.0
    expected[E, G0] = expected[G0, E] = 0.25
    expected[E, GA] = expected[GA, E] = 0.25
    np.testing.assert_array_equal(h, expected)


def test_bare_hamiltonian_cavity_only():
    h = bare_hamiltonian(LambdaParams(nu=0.0, omega=0.0, h=1.0))
    assert h[E, GA] == h[GA, E] == 0.5
    assert np.count_nonzero(h) == 2


def test_numerical_eigenvalues_match_closed_form():
    vals, _ = hermitian_eigensystem(bare_hamiltonian(LambdaParams(nu=1.0, omega=1.0, h=1.0)))
    np.testing.assert_allclose(vals, [(1 - math.sqrt(3)) / 2, 0.0, (1 + math.sqrt(3)) / 2], atol=1e-14)


def test_raman_dressed_system():
    d = dressed_system(LambdaParams(nu=6.0, omega=0.5, h=0.5))
    assert d.lambda_minus == pytest.approx(RAMAN_LAMBDA_MINUS, rel=1e-14)
    assert d.lambda_plus == pytest.approx(RAMAN_LAMBDA_PLUS, rel=1e-15)
    assert d.gap == pytest.approx(math.sqrt(36.5), rel=1e-15)
    assert d.gap == pytest.approx(RAMAN_GAP, rel=1e-15)
    assert abs(d.psi_minus[E]) ** 2 == pytest.approx(RAMAN_E_MINUS, rel=1e-12)


def test_pulse_relax_dressed_system():
    d = dressed_system(LambdaParams(h=0.5, mode=Mode.PULSE_RELAX))
    assert d.gap == pytest.approx(0.5)
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(d.psi_plus, [0, s, s], atol=1e-15)
    np.testing.assert_allclose(d.psi_minus, [0, -s, s], atol=1e-15)
    np.testing.assert_allclose(d.psi0, [1, 0, 0], atol=1e-15)
    assert d.J == pytest.approx(J_AT_HALF, rel=1e-13)
    assert d.N == pytest.approx(N_AT_HALF, rel=1e-12)
    assert d.rate_down == pytest.approx(DOWN_AT_HALF, rel=1e-12)
    assert d.rate_up == pytest.approx(UP_AT_HALF, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(nu=st.floats(0.0, 40.0), omega=st.floats(0.0, 20.0), h=couplings)
def test_dressed_invariants(nu, omega, h):
    p = LambdaParams(nu=nu, omega=omega, h=h)
    d = dressed_system(p)
    assert d.lambda_plus + d.lambda_minus == pytest.approx(nu, abs=1e-10 * max(1, nu))
    assert d.lambda_plus * d.lambda_minus == pytest.approx(-(omega**2 + h**2) / 4, rel=1e-10)
    assert d.psi0[E] == 0
    for v in (d.psi0, d.psi_plus, d.psi_minus):
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    assert abs(np.vdot(d.psi0, d.psi_plus)) < 1e-12
    assert abs(np.vdot(d.psi0, d.psi_minus)) < 1e-12
    assert abs(np.vdot(d.psi_plus, d.psi_minus)) < 1e-12
    # eigenvector equations, relative to the operator scale
    ham = bare_hamiltonian(p)
    scale = np.linalg.norm(ham, 2)
    for lam, v in ((0.0, d.psi0), (d.lambda_plus, d.psi_plus), (d.lambda_minus, d.psi_minus)):
        assert np.linalg.norm(ham @ v - lam * v) <= 1e-12 * scale
    # phase convention: first nonzero of (g0, ga) amplitude real and non-negative
    for v in (d.psi0, d.psi_plus, d.psi_minus):
        lead = v[G0] if abs(v[G0]) > 0 else v[GA]
        assert lead.imag == 0 and lead.real >= 0
    assert d.gap > 0
    if d.rate_up > 0:
        assert d.rate_down / d.rate_up == pytest.approx(math.exp(p.beta * d.gap), rel=1e-12)
    p_op = d.projector()
    assert np.linalg.norm(p_op @ d.psi0) <= 1e-12
    assert np.linalg.norm(d.psi0.conj() @ p_op) <= 1e-12


def test_detailed_balance_operator_norms():
    d = dressed_system(LambdaParams())
    down, up = phonon_operators(d)
    ratio = np.linalg.norm(down.operator) ** 2 / np.linalg.norm(up.operator) ** 2
    assert ratio == pytest.approx(math.exp(d.beta * d.gap), rel=1e-12)
    assert down.rate == up.rate == 1.0


def test_phonon_operators_annihilate_dark_state():
    d = dressed_system(LambdaParams(nu=3.0, omega=0.7, h=0.4))
    for ch in phonon_operators(d):
        assert np.linalg.norm(ch.operator @ d.psi0) < 1e-15


def test_no_phonon_coupling_gives_zero_operators():
    d = dressed_system(LambdaParams(alpha=0.0))
    for ch in phonon_operators(d):
        assert not np.any(ch.operator)


@pytest.mark.parametrize("gap", [1e-7, 1e-8, 1e-10])
def test_rates_vanish_continuously(gap):
    p = LambdaParams()
    down, up = thermal_rates(gap, p)
    limit = p.alpha * gap**2 / p.beta
    assert up == pytest.approx(limit, rel=2 * gap * p.beta)
    assert down == pytest.approx(limit, rel=2 * gap * p.beta)
    assert thermal_rates(0.0, p) == (0.0, 0.0)


def test_raman_suppression_of_excited_state():
    admix = []
    for nu in (1, 10, 100, 1000):
        d = dressed_system(LambdaParams(nu=nu, omega=0.5, h=0.5))
        admix.append(min(abs(d.psi_plus[E]) ** 2, abs(d.psi_minus[E]) ** 2))
    assert all(b < a for a, b in zip(admix, admix[1:]))
    assert admix[-1] < 1e-6


def test_params_validation_and_defaults():
    p = LambdaParams(h=0.7)
    assert p.kappa == pytest.approx(2.1)
    pr = LambdaParams(omega=0.3, nu=4.0, mode="pulse-relax")
    assert pr.omega == 0 and pr.nu == 0 and pr.mode is Mode.PULSE_RELAX
    for bad in ({"h": 0}, {"kappa": -1}, {"gamma": -0.1}, {"alpha": -1}, {"omega_c": 0}, {"temperature": 0}):
        with pytest.raises(ValueError):
            LambdaParams(**bad)
    with pytest.raises(ValueError):
        LambdaParams(mode="continuous")
