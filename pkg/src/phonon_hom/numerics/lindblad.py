"""Plain dense Lindblad helpers for small systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Channel:
    """A jump operator with its rate (ps^-1)."""

    operator: np.ndarray
    rate: float = 1.0
    name: str = ""
    event_class: str = ""

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"negative rate for channel {self.name!r}")
        op = np.array(self.operator, dtype=complex)
        op.setflags(write=False)
        object.__setattr__(self, "operator", op)

    @property
    def scaled(self) -> np.ndarray:
        """sqrt(rate) * operator."""
        return np.sqrt(self.rate) * self.operator


def lindblad_rhs(rho: np.ndarray, hamiltonian: np.ndarray, channels) -> np.ndarray:
    """-i[H, rho] + sum_k rate_k D[L_k] rho."""
    out = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for ch in channels:
        op = ch.operator
        opd = op.conj().T
        ldl = opd @ op
        out += ch.rate * (op @ rho @ opd - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def lindblad_superoperator(hamiltonian: np.ndarray, channels) -> np.ndarray:
    """Matrix M with vec(d rho/dt) = M vec(rho), row-major vec."""
    d = hamiltonian.shape[0]
    eye = np.eye(d)
    m = -1j * (np.kron(hamiltonian, eye) - np.kron(eye, hamiltonian.T))
    for ch in channels:
        op = ch.operator
        ldl = op.conj().T @ op
        m += ch.rate * (
            np.kron(op, op.conj()) - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T))
        )
    return m


def effective_hamiltonian(hamiltonian: np.ndarray, channels) -> np.ndarray:
    """Non-Hermitian H - (i/2) sum rate L^dag L."""
    h = np.array(hamiltonian, dtype=complex)
    for ch in channels:
        h = h - 0.5j * ch.rate * (ch.operator.conj().T @ ch.operator)
    return h
