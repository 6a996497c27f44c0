"""Quantum-jump Monte Carlo over the bare two-source system.

Trajectories follow the waiting-time scheme: draw u ~ U(0, 1), evolve the
unnormalised state under H_eff = H - (i/2) sum_k g_k L_k^dag L_k until
|psi|^2 = u, jump through channel k with probability proportional to
g_k |L_k psi|^2, renormalise and redraw.  H_eff is constant, so the no-jump
evolution uses fixed exact step propagators and the crossing is bracketed
by successive halving.  All live trajectories advance together as one batch.

Every trajectory owns a stream spawned from ``SeedSequence(seed)`` by its
index, so its random draws do not depend on how many trajectories run
alongside it (event times agree to floating-point roundoff).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .lambda_model import (
    LambdaParams,
    bare_hamiltonian,
    dressed_system,
    embed_local,
    initial_local_state,
    phonon_operators,
    photon_escape_operator,
    spontaneous_operator,
)
from .numerics import Channel, effective_hamiltonian

SAME, DIFF, ENV, INCOMPLETE = "SS-same", "SD-different", "ENV", "incomplete"


@dataclass
class Trajectory:
    seed: int
    events: list[tuple[float, str]] = field(default_factory=list)
    terminal: str = INCOMPLETE
    end_time: float = math.nan

    @property
    def first_event_time(self) -> float:
        return self.events[0][0] if self.events else math.inf


@dataclass
class JumpProcess:
    """A system with jump channels and a classical label driven by the jumps.

    ``transitions`` maps (label, channel name) to the next label; channels
    absent from the map leave the label unchanged.  Reaching a label in
    ``terminals`` ends the trajectory.
    """

    hamiltonian: np.ndarray
    channels: Sequence[Channel]
    psi0: np.ndarray
    transitions: Mapping[tuple[str, str], str]
    terminals: frozenset[str]
    initial_label: str = "0"


def batching_step(h_eff: np.ndarray) -> float:
    """Step for the batched no-jump evolution: 1/100 of the slowest decay time.

    Every step is exact, so this only trades batch overhead against the
    number of trajectories that need crossing refinement per step.
    """
    decay = -2 * np.linalg.eigvals(h_eff).imag
    decay = decay[decay > 1e-12]
    if decay.size == 0:
        return 1.0
    return float(np.clip(0.01 / decay.min(), 0.05, 1000.0))


def channel_weights(state: np.ndarray, scaled: Sequence[np.ndarray]) -> np.ndarray:
    """g_k |L_k psi|^2 for each channel; sums to -d|psi|^2/dt."""
    return np.array([np.vdot(op @ state, op @ state).real for op in scaled])


def jump(state: np.ndarray, scaled: Sequence[np.ndarray], r: float) -> tuple[int | None, np.ndarray]:
    """Pick a channel with probability proportional to its weight (r ~ U(0, 1)).

    Returns the channel index and the renormalised post-jump state, or
    (None, renormalised state) when no channel has weight.
    """
    weights = channel_weights(state, scaled)
    total = weights.sum()
    if total <= 0:
        return None, state / np.linalg.norm(state)
    c = int(np.searchsorted(np.cumsum(weights), r * total, side="right"))
    c = min(c, len(scaled) - 1)
    new = scaled[c] @ state
    return c, new / np.linalg.norm(new)


def sample(
    process: JumpProcess,
    n: int,
    seed: int = 0,
    t_max: float = 1e6,
    dt: float | None = None,
    refinements: int = 40,
) -> list[Trajectory]:
    """Run ``n`` trajectories of ``process``."""
    if n < 1:
        raise ValueError("need at least one trajectory")
    h_eff = effective_hamiltonian(np.asarray(process.hamiltonian, dtype=complex), process.channels)
    if dt is None:
        dt = batching_step(h_eff)
    prop = expm(-1j * h_eff * dt).T
    halves = [expm(-1j * h_eff * dt / 2**k).T for k in range(1, refinements + 1)]
    scaled = [ch.scaled for ch in process.channels]
    names = [ch.name for ch in process.channels]

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
    trajs = [Trajectory(seed=i) for i in range(n)]
    labels = [process.initial_label] * n
    psi = np.tile(np.asarray(process.psi0, dtype=complex), (n, 1))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    t = np.zeros(n)
    u = np.array([rng.random() for rng in streams])
    active = np.arange(n)
    finished = np.zeros(n, dtype=bool)

    while active.size:
        cand = psi[active] @ prop
        norms = np.einsum("ij,ij->i", cand.real, cand.real) + np.einsum("ij,ij->i", cand.imag, cand.imag)
        crossed = norms <= u[active]

        quiet = active[~crossed]
        psi[quiet] = cand[~crossed]
        t[quiet] += dt

        jumpers = active[crossed]
        if jumpers.size:
            phi = psi[jumpers]
            tj = t[jumpers].copy()
            uj = u[jumpers]
            for k, half in enumerate(halves, start=1):
                trial = phi @ half
                tn = np.sum(np.abs(trial) ** 2, axis=1)
                keep = tn > uj
                phi[keep] = trial[keep]
                tj[keep] += dt / 2**k
            for row, i in enumerate(jumpers):
                c, new = jump(phi[row], scaled, streams[i].random())
                psi[i] = new
                t[i] = tj[row]
                if c is None:
                    # norm loss without an available channel: numerical floor
                    u[i] = streams[i].random()
                    continue
                trajs[i].events.append((float(tj[row]), names[c]))
                labels[i] = process.transitions.get((labels[i], names[c]), labels[i])
                if labels[i] in process.terminals:
                    trajs[i].terminal = labels[i]
                    trajs[i].end_time = float(tj[row])
                    finished[i] = True
                else:
                    u[i] = streams[i].random()

        timed_out = active[(t[active] >= t_max) & ~finished[active]]
        for i in timed_out:
            trajs[i].end_time = float(t[i])
        finished[timed_out] = True
        active = active[~finished[active]]
    return trajs


# -- two sources at a beam splitter ------------------------------------------------


def _on_first(op):
    return np.kron(op, np.eye(op.shape[0]))


def _on_second(op):
    return np.kron(np.eye(op.shape[0]), op)


def hom_process(params: LambdaParams) -> JumpProcess:
    """Bare two-copy system; the label records the detection history."""
    h1 = embed_local(bare_hamiltonian(params))
    ham = _on_first(h1) + _on_second(h1)
    a = photon_escape_operator()
    sq = 1 / math.sqrt(2)
    chans = [
        Channel(sq * (_on_first(a) + _on_second(a)), params.kappa, "C+"),
        Channel(sq * (_on_first(a) - _on_second(a)), params.kappa, "C-"),
        Channel(_on_first(spontaneous_operator()), params.gamma, "E1"),
        Channel(_on_second(spontaneous_operator()), params.gamma, "E2"),
    ]
    for ch in phonon_operators(dressed_system(params)):
        op = embed_local(ch.operator)
        chans.append(Channel(_on_first(op), ch.rate, f"{ch.name},1"))
        chans.append(Channel(_on_second(op), ch.rate, f"{ch.name},2"))
    chans = [c for c in chans if c.rate > 0 and np.any(c.operator)]
    transitions = {
        ("0", "C+"): "+",
        ("0", "C-"): "-",
        ("+", "C+"): SAME,
        ("-", "C-"): SAME,
        ("+", "C-"): DIFF,
        ("-", "C+"): DIFF,
    }
    for lab in ("0", "+", "-"):
        transitions[(lab, "E1")] = ENV
        transitions[(lab, "E2")] = ENV
    local = initial_local_state(params.mode)
    return JumpProcess(
        hamiltonian=ham,
        channels=chans,
        psi0=np.kron(local, local),
        transitions=transitions,
        terminals=frozenset({SAME, DIFF, ENV}),
    )


@dataclass
class OracleEstimate:
    n: int
    p_same: float
    p_diff: float
    p_env: float
    se_same: float
    se_diff: float
    se_env: float
    n_incomplete: int
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def sample_trajectories(
    params: LambdaParams,
    n: int,
    seed: int = 0,
    t_max: float = 1e6,
    dt: float | None = None,
    keep: bool = False,
) -> OracleEstimate:
    """Monte Carlo estimate of (p_same, p_diff, p_env) with binomial standard errors."""
    trajs = sample(hom_process(params), n, seed=seed, t_max=t_max, dt=dt)
    counts = {SAME: 0, DIFF: 0, ENV: 0, INCOMPLETE: 0}
    for tr in trajs:
        counts[tr.terminal] += 1
    ps, pd, pe = counts[SAME] / n, counts[DIFF] / n, counts[ENV] / n
    return OracleEstimate(
        n=n,
        p_same=ps,
        p_diff=pd,
        p_env=pe,
        se_same=binomial_se(ps, n),
        se_diff=binomial_se(pd, n),
        se_env=binomial_se(pe, n),
        n_incomplete=counts[INCOMPLETE],
        trajectories=trajs if keep else [],
    )


def two_level_process(omega: float, gamma: float, start_excited: bool = True) -> JumpProcess:
    """Driven two-level system H = omega (|g><e| + |e><g|), emission |g><e|; stop at first emission."""
    ham = np.array([[0, omega], [omega, 0]], dtype=complex)
    jump = np.array([[0, 1], [0, 0]], dtype=complex)
    psi0 = np.array([0, 1] if start_excited else [1, 0], dtype=complex)
    return JumpProcess(
        hamiltonian=ham,
        channels=[Channel(jump, gamma, "J")],
        psi0=psi0,
        transitions={("0", "J"): "1"},
        terminals=frozenset({"1"}),
    )
