import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad
from scipy.linalg import expm

from phonon_hom.lambda_model import LambdaParams, Mode
from phonon_hom.numerics import effective_hamiltonian
from phonon_hom.observables import final_probabilities
from phonon_hom.trajectories import (
    DIFF,
    ENV,
    INCOMPLETE,
    SAME,
    binomial_se,
    channel_weights,
    hom_process,
    jump,
    sample,
    sample_trajectories,
    two_level_process,
)

PULSE = LambdaParams(h=0.5, mode=Mode.PULSE_RELAX)


def test_seed_determinism():
    a = sample_trajectories(PULSE, 300, seed=42, keep=True)
    b = sample_trajectories(PULSE, 300, seed=42, keep=True)
    assert [t.events for t in a.trajectories] == [t.events for t in b.trajectories]
    assert (a.p_same, a.p_diff, a.p_env) == (b.p_same, b.p_diff, b.p_env)
    c = sample_trajectories(PULSE, 300, seed=43, keep=True)
    assert [t.events for t in a.trajectories] != [t.events for t in c.trajectories]


def test_streams_independent_of_batch_size():
    # trajectory i depends only on (seed, i)
    small = sample(hom_process(PULSE), 50, seed=5)
    large = sample(hom_process(PULSE), 200, seed=5)
    for a, b in zip(small, large):
        assert a.terminal == b.terminal
        assert [n for _, n in a.events] == [n for _, n in b.events]
        np.testing.assert_allclose([t for t, _ in a.events], [t for t, _ in b.events], rtol=1e-9)


def test_event_logs_consistent():
    est = sample_trajectories(PULSE, 500, seed=1, keep=True)
    for tr in est.trajectories:
        times = [t for t, _ in tr.events]
        assert all(b > a for a, b in zip(times, times[1:]))
        names = [n for _, n in tr.events if n in ("C+", "C-", "E1", "E2")]
        if tr.terminal == ENV:
            assert names[-1] in ("E1", "E2")
        else:
            assert len(names) == 2 and names[0] in ("C+", "C-")
            assert (names[0] == names[1]) == (tr.terminal == SAME)
        assert tr.end_time == times[-1]
    assert est.n_incomplete == 0


def test_exponential_first_emission():
    gamma, n = 0.4, 10_000
    trajs = sample(two_level_process(0.0, gamma), n, seed=2024)
    waits = np.array([t.first_event_time for t in trajs])
    ks = stats.kstest(waits, "expon", args=(0, 1 / gamma))
    assert ks.statistic < 1.628 / math.sqrt(n)  # 1% critical value


def test_jump_renormalises():
    rng = np.random.default_rng(9)
    ops = [rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)) for _ in range(3)]
    for _ in range(100):
        state = (rng.normal(size=6) + 1j * rng.normal(size=6)) * rng.uniform(0.01, 1)
        c, new = jump(state, ops, rng.random())
        assert c in (0, 1, 2)
        assert np.linalg.norm(new) == pytest.approx(1.0, abs=1e-12)


def test_jump_channel_frequencies():
    ops = [np.diag([1.0, 0.0]), np.diag([0.0, 2.0])]
    state = np.array([1.0, 1.0]) / math.sqrt(2)
    rng = np.random.default_rng(0)
    picks = np.array([jump(state, ops, rng.random())[0] for _ in range(20_000)])
    # weights 1/2 and 2 -> probabilities 0.2 and 0.8
    assert np.mean(picks == 1) == pytest.approx(0.8, abs=4 * math.sqrt(0.16 / 20_000))


def test_jump_without_weight():
    c, new = jump(np.array([2.0, 0.0]), [np.array([[0, 1], [0, 0]])], 0.5)
    assert c is None and np.linalg.norm(new) == pytest.approx(1.0)


def test_channel_weights_equal_norm_loss():
    proc = hom_process(LambdaParams())
    heff = effective_hamiltonian(proc.hamiltonian, proc.channels)
    scaled = [ch.scaled for ch in proc.channels]
    rng = np.random.default_rng(4)
    psi0 = rng.normal(size=25) + 1j * rng.normal(size=25)
    psi0 /= np.linalg.norm(psi0)
    t_end = 3.0

    def rate(t):
        return channel_weights(expm(-1j * heff * t) @ psi0, scaled).sum()

    loss = 1 - np.linalg.norm(expm(-1j * heff * t_end) @ psi0) ** 2
    assert quad(rate, 0, t_end, epsabs=1e-13, epsrel=1e-12)[0] == pytest.approx(loss, rel=1e-9)


def test_ideal_sources_always_bunch():
    est = sample_trajectories(PULSE.replace(alpha=0.0, gamma=0.0), 10_000, seed=3)
    assert est.p_same >= 1 - 3 * est.se_same
    assert est.p_diff == 0 and est.p_env == 0


def test_matches_semi_quantum_pulse_relax():
    n = 4000
    ref = final_probabilities(PULSE)
    est = sample_trajectories(PULSE, n, seed=11)
    for p, q in zip(ref, (est.p_same, est.p_diff, est.p_env)):
        assert abs(p - q) <= 3 * binomial_se(p, n)


def test_timeout_marks_incomplete():
    est = sample_trajectories(LambdaParams(nu=12.0), 50, seed=0, t_max=10.0)
    assert est.n_incomplete == 50
    assert est.p_same == est.p_diff == est.p_env == 0


def test_zero_rate_channels_dropped():
    proc = hom_process(LambdaParams(alpha=0.0, gamma=0.0))
    assert [ch.name for ch in proc.channels] == ["C+", "C-"]
    assert proc.terminals == frozenset({SAME, DIFF, ENV})
    assert INCOMPLETE not in proc.terminals


def test_needs_trajectories():
    with pytest.raises(ValueError):
        sample_trajectories(PULSE, 0)


def test_binomial_se():
    assert binomial_se(0.5, 100) == pytest.approx(0.05)
    assert binomial_se(0.0, 100) == 0.0
