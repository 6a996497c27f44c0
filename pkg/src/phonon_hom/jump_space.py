"""Two identical sources feeding a beam splitter, tagged by detection history.

Process-states::

    P0 --C+--> P+ --C+--> PS        P0 --C- --> P- --C- --> PS
               P+ --C- --> PD                   P- --C+--> PD
    P0, P+, P- --E1, E2--> PE

PS, PD and PE only keep their population.  Composite kets list system 1 on
the left; each block enumerates the local levels in the order g0 < e < ga,
with the states where system 1 has already emitted (g1 on the left) first.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from .lambda_model import (
    E,
    G0,
    G1,
    GA,
    LOCAL_LEVELS,
    LambdaParams,
    bare_hamiltonian,
    dressed_system,
    embed_local,
    initial_local_state,
    phonon_operators,
    photon_escape_operator,
    spontaneous_operator,
)
from .numerics import Channel
from .process_states import Event, ExtendedGenerator, extend_with_process_states

P0, PPLUS, PMINUS, PS, PD, PE = "P0", "P+", "P-", "PS", "PD", "PE"
PROCESS_LABELS = (P0, PPLUS, PMINUS, PS, PD, PE)
SINKS = (PS, PD, PE)

_ACTIVE = (G0, E, GA)
_DIM = len(LOCAL_LEVELS)


def pair_index(a: int, b: int) -> int:
    return _DIM * a + b


def pair_name(index: int) -> str:
    a, b = divmod(index, _DIM)
    return f"{LOCAL_LEVELS[a]},{LOCAL_LEVELS[b]}"


PAIR_LABELS = tuple(pair_name(i) for i in range(_DIM * _DIM))

BLOCK_BASES = {
    P0: tuple(pair_index(a, b) for a, b in product(_ACTIVE, _ACTIVE)),
    PPLUS: tuple(pair_index(G1, b) for b in _ACTIVE) + tuple(pair_index(a, G1) for a in _ACTIVE),
    PMINUS: tuple(pair_index(G1, b) for b in _ACTIVE) + tuple(pair_index(a, G1) for a in _ACTIVE),
}


def on_first(op: np.ndarray) -> np.ndarray:
    return np.kron(op, np.eye(_DIM))


def on_second(op: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(_DIM), op)


def detection_operators() -> tuple[np.ndarray, np.ndarray]:
    """Beam-splitter outputs (C+, C-) including the 1/sqrt(2) factor."""
    s = photon_escape_operator()
    c_plus = (on_first(s) + on_second(s)) / math.sqrt(2)
    c_minus = (on_first(s) - on_second(s)) / math.sqrt(2)
    return c_plus, c_minus


def pair_hamiltonian(params: LambdaParams) -> np.ndarray:
    h = embed_local(bare_hamiltonian(params))
    return on_first(h) + on_second(h)


def build_extended_space(
    params: LambdaParams, swap_detectors: bool = False, prune: bool = False
) -> ExtendedGenerator:
    """Semi-quantum generator for two copies of the source, 24 Lindblad terms.

    ``swap_detectors`` relabels the beam-splitter outputs (+ <-> -); every
    figure of merit must be invariant under it.  ``prune`` replaces the fixed
    9/6/6 block bases by the states reachable from the initial state.
    """
    c_plus, c_minus = detection_operators()
    if swap_detectors:
        c_plus, c_minus = c_minus, c_plus
    kappa, gamma = params.kappa, params.gamma
    events = [
        Event(c_plus, kappa, P0, PPLUS, "detection+", "C+(0)"),
        Event(c_plus, kappa, PPLUS, PS, "detection+", "C+(+)"),
        Event(c_plus, kappa, PMINUS, PD, "detection+", "C+(-)"),
        Event(c_minus, kappa, P0, PMINUS, "detection-", "C-(0)"),
        Event(c_minus, kappa, PMINUS, PS, "detection-", "C-(-)"),
        Event(c_minus, kappa, PPLUS, PD, "detection-", "C-(+)"),
    ]
    s = spontaneous_operator()
    for src, tag in ((P0, "0"), (PPLUS, "+"), (PMINUS, "-")):
        events.append(Event(on_first(s), gamma, src, PE, "spontaneous", f"E1({tag})"))
        events.append(Event(on_second(s), gamma, src, PE, "spontaneous", f"E2({tag})"))

    u_down, u_up = phonon_operators(dressed_system(params))
    lindblads = []
    for ch in (u_down, u_up):
        op5 = embed_local(ch.operator[:3, :3])
        lindblads.append(Channel(on_first(op5), ch.rate, f"{ch.name},1", "phonon"))
        lindblads.append(Channel(on_second(op5), ch.rate, f"{ch.name},2", "phonon"))

    local = initial_local_state(params.mode)
    psi0 = np.kron(local, local)
    return extend_with_process_states(
        pair_hamiltonian(params),
        events,
        lindblads,
        labels=PROCESS_LABELS,
        initial_label=P0,
        initial_state=psi0,
        accumulators=SINKS,
        bases=None if prune else BLOCK_BASES,
        system_labels=PAIR_LABELS,
    )
