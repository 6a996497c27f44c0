"""Semi-quantum master equations: a quantum system tagged with classical process-states.

Every observable event (a detection, an emission into the environment) moves
the system between process-states.  Branches with different histories never
interfere, so the density matrix is block diagonal over process-states and
only one block per process-state is stored.  Process-states whose internal
state is irrelevant can be declared *accumulators*: they keep a single
population and absorb the trace of whatever flows into them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .numerics import BlockDensityMatrix, BlockLayout, Channel

_ZERO = 0.0


class CyclicJumpGraphError(ValueError):
    pass


class BasisClosureError(ValueError):
    """An operator maps a retained basis state outside its target subspace."""


@dataclass(frozen=True)
class Event:
    """An observable jump ``operator`` (system space) moving ``source`` -> ``target``."""

    operator: np.ndarray
    rate: float
    source: str
    target: str
    event_class: str = "event"
    name: str = ""


@dataclass(frozen=True)
class LindbladTerm:
    """A Lindblad term of the extended generator, in block coordinates.

    ``operator`` maps the ``source`` block into the ``target`` block.  When the
    target is an accumulator the rows of ``operator`` are a basis of the
    (discarded) image and only ``tr(L rho L^dag)`` is kept.
    """

    operator: np.ndarray
    rate: float
    event_class: str
    source: str
    target: str
    name: str = ""

    @cached_property
    def ldl(self) -> np.ndarray:
        return self.operator.conj().T @ self.operator

    @cached_property
    def adjoint(self) -> np.ndarray:
        return self.operator.conj().T


def topological_order(labels: Sequence[str], edges: Iterable[tuple[str, str]]) -> list[str]:
    """Kahn ordering of ``labels``; raises CyclicJumpGraphError on a cycle.

    Self-loops (events that leave the process-state unchanged) are allowed.
    """
    succ: dict[str, set[str]] = {lab: set() for lab in labels}
    indeg = {lab: 0 for lab in labels}
    for a, b in edges:
        if a not in succ or b not in succ:
            raise KeyError(f"event between unknown process-states {a!r} -> {b!r}")
        if a == b:
            continue
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    ready = [lab for lab in labels if indeg[lab] == 0]
    order = []
    while ready:
        lab = ready.pop(0)
        order.append(lab)
        for nxt in sorted(succ[lab], key=list(labels).index):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    if len(order) != len(labels):
        raise CyclicJumpGraphError("jump graph between process-states has a cycle")
    return order


def _support(op: np.ndarray, cols: Sequence[int], tol: float = 0.0) -> set[int]:
    if len(cols) == 0:
        return set()
    sub = np.abs(op[:, list(cols)])
    return set(np.nonzero(np.any(sub > tol, axis=1))[0].tolist())


@dataclass
class ExtendedGenerator:
    """Block-diagonal generator on system (x) process-states."""

    labels: tuple[str, ...]
    accumulators: frozenset[str]
    bases: dict[str, tuple[int, ...]]
    hamiltonians: dict[str, np.ndarray]
    terms: list[LindbladTerm]
    initial: BlockDensityMatrix
    system_labels: tuple[str, ...] | None = None
    _super: np.ndarray | None = field(default=None, repr=False)

    @property
    def layout(self) -> BlockLayout:
        return self.initial.layout

    @property
    def n_states(self) -> int:
        return self.layout.n_states

    @property
    def n_elements(self) -> int:
        return self.layout.size

    def basis_names(self, label: str) -> list[str]:
        if label in self.accumulators:
            return [label]
        if self.system_labels is None:
            return [str(i) for i in self.bases[label]]
        return [self.system_labels[i] for i in self.bases[label]]

    def apply(self, rho: BlockDensityMatrix) -> BlockDensityMatrix:
        """d(rho)/dt, computed block by block."""
        out = {lab: np.zeros_like(rho[lab]) for lab in self.labels}
        for lab, h in self.hamiltonians.items():
            r = rho[lab]
            out[lab] += -1j * (h @ r - r @ h)
        for term in self.terms:
            self._apply_term(term, rho, out)
        return BlockDensityMatrix(self.layout, out)

    def apply_term(self, term: LindbladTerm, rho: BlockDensityMatrix) -> BlockDensityMatrix:
        out = {lab: np.zeros_like(rho[lab]) for lab in self.labels}
        self._apply_term(term, rho, out)
        return BlockDensityMatrix(self.layout, out)

    def _apply_term(self, term: LindbladTerm, rho, out) -> None:
        r = rho[term.source]
        if term.rate == _ZERO:
            return
        ldl = term.ldl
        out[term.source] -= 0.5 * term.rate * (ldl @ r + r @ ldl)
        if term.target in self.accumulators:
            out[term.target] += term.rate * np.trace(ldl @ r)
        else:
            out[term.target] += term.rate * (term.operator @ r @ term.adjoint)

    def apply_vector(self, vec: np.ndarray) -> np.ndarray:
        return self.superoperator() @ vec

    def superoperator(self) -> np.ndarray:
        """Dense matrix of the generator on the flattened block vector."""
        if self._super is None:
            size = self.layout.size
            m = np.zeros((size, size), dtype=complex)
            unit = np.zeros(size, dtype=complex)
            for k in range(size):
                unit[k] = 1.0
                m[:, k] = self.apply(BlockDensityMatrix.from_vector(self.layout, unit)).to_vector()
                unit[k] = 0.0
            self._super = m
        return self._super

    def population_weights(self, labels: Iterable[str]) -> np.ndarray:
        return self.layout.population_weights(labels)

    def terms_by_class(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for t in self.terms:
            counts[t.event_class] = counts.get(t.event_class, 0) + 1
        return counts

    def without(self, *event_classes: str) -> "ExtendedGenerator":
        """Copy with every term of the given classes removed."""
        return ExtendedGenerator(
            labels=self.labels,
            accumulators=self.accumulators,
            bases=self.bases,
            hamiltonians=self.hamiltonians,
            terms=[t for t in self.terms if t.event_class not in event_classes],
            initial=self.initial,
            system_labels=self.system_labels,
        )

    def final_accumulator_populations(self, vec: np.ndarray) -> dict[str, float]:
        """Accumulator populations as t -> infinity, starting from ``vec``.

        Solves for the time integral of the transient blocks, so the result is
        exact for the linear dynamics (provided nothing stays trapped).
        """
        m = self.superoperator()
        sls = self.layout.slices()
        acc_idx = [sls[a].start for a in self.labels if a in self.accumulators]
        trans = np.ones(self.layout.size, dtype=bool)
        trans[acc_idx] = False
        m_tt = m[np.ix_(trans, trans)]
        m_at = m[np.ix_(~trans, trans)]
        y_t = vec[trans]
        integral = np.linalg.lstsq(m_tt, -y_t, rcond=None)[0]
        for _ in range(2):  # iterative refinement
            integral += np.linalg.lstsq(m_tt, -y_t - m_tt @ integral, rcond=None)[0]
        final = vec[~trans] + m_at @ integral
        acc_labels = [a for a in self.labels if a in self.accumulators]
        return {a: float(final[i].real) for i, a in enumerate(acc_labels)}


def extend_with_process_states(
    hamiltonian: np.ndarray,
    events: Sequence[Event],
    lindblads: Sequence[Channel],
    labels: Sequence[str],
    initial_label: str,
    initial_state: np.ndarray,
    accumulators: Iterable[str] = (),
    bases: Mapping[str, Sequence[int]] | None = None,
    system_labels: Sequence[str] | None = None,
) -> ExtendedGenerator:
    """Build the block-diagonal semi-quantum generator.

    ``hamiltonian`` and every ``Channel`` in ``lindblads`` act on the system in
    every non-accumulator process-state; each ``Event`` moves population from
    its source to its target process-state.  ``initial_state`` is a system
    ket or density matrix placed in ``initial_label``.

    Without explicit ``bases`` each block keeps only the system basis states
    reachable from the initial state; with ``bases`` the given states are used
    and checked for closure.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    dim = h.shape[0]
    labels = tuple(labels)
    acc = frozenset(accumulators)
    if initial_label not in labels or not acc <= set(labels):
        raise KeyError("initial label and accumulators must be process-state labels")
    if initial_label in acc:
        raise ValueError("the initial process-state cannot be an accumulator")
    for ev in events:
        if ev.source in acc:
            raise ValueError(f"event {ev.name!r} leaves accumulator {ev.source!r}")
    topological_order(labels, [(ev.source, ev.target) for ev in events])

    rho0 = np.asarray(initial_state, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    if rho0.shape != (dim, dim):
        raise ValueError("initial state does not match the system dimension")

    local_ops = [h] + [ch.operator for ch in lindblads]
    if bases is None:
        support = {lab: set() for lab in labels if lab not in acc}
        support[initial_label] = set(np.nonzero(np.any(np.abs(rho0) > 0, axis=1))[0].tolist())
        changed = True
        while changed:
            changed = False
            for lab in support:
                grown = set(support[lab])
                for op in local_ops:
                    grown |= _support(op, sorted(grown))
                if grown != support[lab]:
                    support[lab] = grown
                    changed = True
            for ev in events:
                if ev.target in acc:
                    continue
                reach = _support(ev.operator, sorted(support[ev.source]))
                if not reach <= support[ev.target]:
                    support[ev.target] |= reach
                    changed = True
        basis = {lab: tuple(sorted(s)) for lab, s in support.items()}
    else:
        basis = {lab: tuple(bases[lab]) for lab in labels if lab not in acc}

    # unreachable process-states keep a single inert slot in the layout
    dummy = {lab for lab in labels if lab not in acc and len(basis[lab]) == 0}
    for lab in dummy:
        basis[lab] = (0,)

    def closure(op, src, dst, what):
        out_of = _support(op, basis[src]) - set(basis[dst])
        if out_of:
            raise BasisClosureError(f"{what} maps {src!r} outside {dst!r}: states {sorted(out_of)}")

    hams = {}
    for lab in labels:
        if lab in acc:
            continue
        if lab in dummy:
            hams[lab] = np.zeros((1, 1), dtype=complex)
            continue
        closure(h, lab, lab, "hamiltonian")
        idx = list(basis[lab])
        hams[lab] = h[np.ix_(idx, idx)]

    terms: list[LindbladTerm] = []
    for ev in events:
        if ev.source in dummy:
            continue
        src = list(basis[ev.source])
        op = np.asarray(ev.operator, dtype=complex)
        if ev.target in acc:
            block = op[:, src]
            keep = np.any(np.abs(block) > 0, axis=1)
            block = block[keep] if keep.any() else np.zeros((1, len(src)), dtype=complex)
        else:
            closure(op, ev.source, ev.target, f"event {ev.name!r}")
            block = op[np.ix_(list(basis[ev.target]), src)]
        terms.append(LindbladTerm(block, ev.rate, ev.event_class, ev.source, ev.target, ev.name))
    for ch in lindblads:
        for lab in labels:
            if lab in acc or lab in dummy:
                continue
            closure(ch.operator, lab, lab, f"lindblad {ch.name!r}")
            idx = list(basis[lab])
            terms.append(
                LindbladTerm(
                    ch.operator[np.ix_(idx, idx)],
                    ch.rate,
                    ch.event_class or "lindblad",
                    lab,
                    lab,
                    f"{ch.name}({lab})" if ch.name else lab,
                )
            )

    dims = tuple(1 if lab in acc else len(basis[lab]) for lab in labels)
    layout = BlockLayout(labels, dims)
    init_idx = list(basis[initial_label])
    outside = np.ones(dim, dtype=bool)
    outside[init_idx] = False
    if np.any(np.abs(rho0[outside]) > 0):
        raise BasisClosureError("initial state has support outside its block basis")
    initial = BlockDensityMatrix(layout, {initial_label: rho0[np.ix_(init_idx, init_idx)]})
    return ExtendedGenerator(
        labels=labels,
        accumulators=acc,
        bases={lab: basis[lab] for lab in labels if lab not in acc},
        hamiltonians=hams,
        terms=terms,
        initial=initial,
        system_labels=tuple(system_labels) if system_labels is not None else None,
    )


def two_level_extension(omega: float, gamma: float, prune: bool = False, start_excited: bool = True):
    """Driven two-level emitter H = omega (|g><e| + |e><g|) tagged by first emission.

    Process-state "0" means no photon yet, "1" at least one.  Unpruned, the
    "1" block keeps the full two-level dynamics and the re-emission
    |g1><e1|; pruned, "1" shrinks to an accumulator, which leaves the
    first-emission distribution unchanged.
    """
    ham = np.array([[0, omega], [omega, 0]], dtype=complex)
    jump = np.array([[0, 1], [0, 0]], dtype=complex)
    events = [Event(jump, gamma, "0", "1", "emission", "J1")]
    if not prune:
        events.append(Event(jump, gamma, "1", "1", "emission", "J2"))
    psi0 = np.array([0, 1] if start_excited else [1, 0], dtype=complex)
    return extend_with_process_states(
        ham,
        events,
        [],
        labels=("0", "1"),
        initial_label="0",
        initial_state=psi0,
        accumulators=("1",) if prune else (),
        bases=None if prune else {"0": (0, 1), "1": (0, 1)},
        system_labels=("g", "e"),
    )
