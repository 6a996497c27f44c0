"""A driven Lambda system in a cavity, dressed by its drive and coupled to phonons.

Bare basis ordering is ``(g0, e, ga)`` where ``ga`` is the ground state ``g1``
with one cavity photon.  Two further inert levels complete the local space used
by the two-source models: ``g1`` (photon gone) and ``g2`` (decayed outside the
Lambda system after spontaneous emission).

Units: hbar = 1, frequencies and rates in ps^-1 (rad/ps), times in ps,
temperature in K.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.constants as sc

from .numerics import Channel

G0, E, GA, G1, G2 = range(5)
LOCAL_LEVELS = ("g0", "e", "ga", "g1", "g2")
BARE_LEVELS = LOCAL_LEVELS[:3]

# k_B / hbar in ps^-1 K^-1
KB_OVER_HBAR = sc.k / sc.hbar * 1e-12

DEFAULT_ALPHA = 0.0027
DEFAULT_OMEGA_C = 2.2
DEFAULT_TEMPERATURE = 298.0
DEFAULT_GAMMA = 0.05


class Mode(str, enum.Enum):
    RAMAN = "raman"
    PULSE_RELAX = "pulse-relax"


@dataclass(frozen=True)
class LambdaParams:
    """Physical constants of one source.

    ``kappa`` defaults to ``3 h``.  Pulse-relax mode forces ``omega = nu = 0``.
    """

    h: float = 0.5
    omega: float = 0.5
    nu: float = 6.0
    kappa: float | None = None
    gamma: float = DEFAULT_GAMMA
    alpha: float = DEFAULT_ALPHA
    omega_c: float = DEFAULT_OMEGA_C
    temperature: float = DEFAULT_TEMPERATURE
    mode: Mode = Mode.RAMAN

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode is Mode.PULSE_RELAX:
            object.__setattr__(self, "omega", 0.0)
            object.__setattr__(self, "nu", 0.0)
        if self.kappa is None:
            object.__setattr__(self, "kappa", 3.0 * self.h)
        for name in ("h", "omega", "nu", "kappa", "gamma", "alpha", "omega_c", "temperature"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.h <= 0:
            raise ValueError("h must be > 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.gamma < 0 or self.alpha < 0:
            raise ValueError("gamma and alpha must be >= 0")
        if self.omega_c <= 0 or self.temperature <= 0:
            raise ValueError("omega_c and temperature must be > 0")

    @property
    def beta(self) -> float:
        """Inverse thermal frequency 1/(k_B T) in ps."""
        return 1.0 / (KB_OVER_HBAR * self.temperature)

    def replace(self, **changes) -> "LambdaParams":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return LambdaParams(**values)


def thermal_frequency(temperature: float) -> float:
    """k_B T / hbar in ps^-1."""
    return KB_OVER_HBAR * temperature


def bare_hamiltonian(params: LambdaParams) -> np.ndarray:
    """RWA Hamiltonian over (g0, e, ga)."""
    h = np.zeros((3, 3), dtype=complex)
    h[E, E] = params.nu
    h[E, G0] = h[G0, E] = params.omega / 2
    h[GA, E] = h[E, GA] = params.h / 2
    return h


def embed_local(op3: np.ndarray) -> np.ndarray:
    """Lift a (g0, e, ga) operator to the 5-level local space; g1, g2 are inert."""
    out = np.zeros((5, 5), dtype=complex)
    out[:3, :3] = op3
    return out


def spectral_density(omega, alpha: float = DEFAULT_ALPHA, omega_c: float = DEFAULT_OMEGA_C):
    """Super-ohmic deformation-potential spectral density alpha w^3 exp(-(w/w_c)^2)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    out = alpha * w**3 * np.exp(-((w / omega_c) ** 2))
    return float(out) if out.ndim == 0 else out


def spectral_peak(omega_c: float = DEFAULT_OMEGA_C) -> float:
    return omega_c * math.sqrt(1.5)


def bose_occupation(omega, temperature: float = DEFAULT_TEMPERATURE):
    """1 / (exp(beta w) - 1).  Diverges at w = 0, which is rejected."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0) or temperature <= 0:
        raise ValueError("bose occupation needs omega > 0 and T > 0")
    out = 1.0 / np.expm1(w / thermal_frequency(temperature))
    return float(out) if out.ndim == 0 else out


def thermal_rates(gap: float, params: LambdaParams) -> tuple[float, float]:
    """(J(N+1), J N) at the dressed gap; both vanish continuously as gap -> 0."""
    if gap <= 0:
        return 0.0, 0.0
    j = spectral_density(gap, params.alpha, params.omega_c)
    up = j / math.expm1(gap * params.beta)
    return j + up, up


@dataclass(frozen=True)
class DressedSystem:
    lambda0: float
    lambda_plus: float
    lambda_minus: float
    psi0: np.ndarray
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    gap: float
    J: float
    N: float
    rate_down: float
    rate_up: float
    beta: float = field(default=math.nan)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([self.lambda_minus, self.lambda0, self.lambda_plus])

    def projector(self) -> np.ndarray:
        """P = -|psi_-><psi_+|, the phonon transition operator."""
        return -np.outer(self.psi_minus, self.psi_plus.conj())


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def dressed_system(params: LambdaParams) -> DressedSystem:
    """Closed-form eigensystem of the RWA Hamiltonian plus phonon rates at the gap.

    Eigenvectors are unit-normalised, with the real, non-negative g0 (or, when
    the drive vanishes, ga) amplitude fixing the phase.
    """
    nu, om, h = params.nu, params.omega, params.h
    root = math.sqrt(nu * nu + om * om + h * h)
    lam_p = (nu + root) / 2
    # (nu - root)/2 rewritten to avoid cancellation at large detuning
    lam_m = -(om * om + h * h) / (2 * (nu + root)) if nu >= 0 else (nu - root) / 2
    psi0 = _unit([h, 0.0, -om])
    psi_p = _unit([om, 2 * lam_p, h])
    psi_m = _unit([om, 2 * lam_m, h])
    gap = lam_p - lam_m
    down, up = thermal_rates(gap, params)
    if gap > 0:
        j = spectral_density(gap, params.alpha, params.omega_c)
        n = 1.0 / math.expm1(gap * params.beta)
    else:
        j, n = 0.0, math.inf
    return DressedSystem(
        lambda0=0.0,
        lambda_plus=lam_p,
        lambda_minus=lam_m,
        psi0=psi0,
        psi_plus=psi_p,
        psi_minus=psi_m,
        gap=gap,
        J=j,
        N=n,
        rate_down=down,
        rate_up=up,
        beta=params.beta,
    )


def phonon_operators(d: DressedSystem) -> tuple[Channel, Channel]:
    """Phonon emission (psi_+ -> psi_-) and absorption (psi_- -> psi_+) operators.

    Rates are folded into the operators, so both channels carry unit rate.
    """
    down = math.sqrt(d.rate_down) * np.outer(d.psi_minus, d.psi_plus.conj())
    up = math.sqrt(d.rate_up) * np.outer(d.psi_plus, d.psi_minus.conj())
    return (
        Channel(down, 1.0, "U+", "phonon"),
        Channel(up, 1.0, "U-", "phonon"),
    )


def spontaneous_operator() -> np.ndarray:
    """|g2><e| on the 5-level local space."""
    out = np.zeros((5, 5), dtype=complex)
    out[G2, E] = 1.0
    return out


def photon_escape_operator() -> np.ndarray:
    """|g1><ga| on the 5-level local space."""
    out = np.zeros((5, 5), dtype=complex)
    out[G1, GA] = 1.0
    return out


def initial_local_state(mode: Mode) -> np.ndarray:
    psi = np.zeros(5, dtype=complex)
    psi[E if Mode(mode) is Mode.PULSE_RELAX else G0] = 1.0
    return psi
