"""Time propagation of linear master equations.

Two propagators share one control record and one result type:

* :func:`propagate` -- adaptive Dormand-Prince 5(4) with per-step error
  control, for any right-hand side.
* :func:`propagate_linear` -- exact stepping with the matrix exponential of a
  constant generator on a geometrically coarsening grid.  Used for the long
  (1e4 - 1e6 ps) production runs where an explicit method would need millions
  of steps to follow the fast optical oscillations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .blocks import BlockDensityMatrix, BlockLayout

log = logging.getLogger(__name__)

Observer = Callable[[float, np.ndarray], None]


class IntegrationError(RuntimeError):
    pass


class StepSizeUnderflow(IntegrationError):
    pass


@dataclass(frozen=True)
class OdeControl:
    """Integrator settings.  Times in ps."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    t_max: float = 1e6
    termination_threshold: float = 1e-4
    method: str = "exact"
    first_step: float | None = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise ValueError("tolerances and max_step must be positive")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.termination_threshold > 0:
            raise ValueError("termination_threshold must be positive")
        if self.method not in ("exact", "rk45"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class Solution:
    times: np.ndarray
    states: np.ndarray
    layout: BlockLayout | None = None
    terminated: bool = False
    error_estimate: float = 0.0
    n_steps: int = 0
    message: str = ""
    generator: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def block(self, i: int) -> BlockDensityMatrix:
        if self.layout is None:
            raise ValueError("solution carries no block layout")
        return BlockDensityMatrix.from_vector(self.layout, self.states[i])

    def evaluate(self, t: float) -> np.ndarray:
        """State at time ``t`` inside the solved interval.

        Exact when the solution came from :func:`propagate_linear`, linear
        interpolation otherwise.
        """
        if t < self.times[0] or t > self.times[-1]:
            raise ValueError(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 1)
        t0 = self.times[i]
        if t == t0:
            return self.states[i]
        if self.generator is not None:
            return expm(self.generator * (t - t0)) @ self.states[i]
        t1 = self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        return (1 - w) * self.states[i] + w * self.states[i + 1]


def _as_vector(rho0) -> tuple[np.ndarray, BlockLayout | None]:
    if isinstance(rho0, BlockDensityMatrix):
        return rho0.to_vector(), rho0.layout
    return np.asarray(rho0, dtype=complex).ravel(), None


def _as_rhs(generator) -> Callable[[float, np.ndarray], np.ndarray]:
    if hasattr(generator, "apply_vector"):
        return lambda t, y: generator.apply_vector(y)
    if isinstance(generator, np.ndarray):
        return lambda t, y: generator @ y
    return generator


# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array(
    [5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _B4


# DOPRI5 absolute stability reaches about 3.3 along the negative real axis
_STABLE_STEP = 3.0


def _stability_limit(generator) -> float:
    """Largest stable step for a known constant generator, inf otherwise.

    Without this cap the error controller lets steps grow past the stability
    boundary of fast, already decayed modes, and their roundoff (including
    the anti-Hermitian part of rho) is then amplified.
    """
    if hasattr(generator, "superoperator"):
        m = generator.superoperator()
    elif isinstance(generator, np.ndarray):
        m = generator
    else:
        return math.inf
    radius = float(np.max(np.abs(np.linalg.eigvals(m)))) if m.size else 0.0
    return _STABLE_STEP / radius if radius > 0 else math.inf


def _initial_step(f, t0, y0, f0, control: OdeControl) -> float:
    scale = control.abs_tol + control.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean(np.abs(y0 / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    if d1 < 1e-15:
        return min(control.max_step, control.t_max)
    h0 = 0.01 * d0 / d1 if d0 > 1e-5 else 1e-6
    y1 = y0 + h0 * f0
    d2 = np.sqrt(np.mean(np.abs((f(t0 + h0, y1) - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, control.max_step, control.t_max)


def propagate(
    rho0,
    generator,
    control: OdeControl = OdeControl(method="rk45"),
    monitor: Callable[[np.ndarray], float] | None = None,
    observers: Sequence[Observer] = (),
) -> Solution:
    """Adaptive Dormand-Prince integration of d(rho)/dt = generator(rho).

    Stops once ``monitor(y)`` drops below ``control.termination_threshold`` or
    at ``control.t_max``.  For a constant generator the step is also kept
    inside the stability region.  Every accepted step is stored and passed to the
    observers.  ``error_estimate`` is the sum of the accepted local error
    estimates (max-norm), a pessimistic bound on the global error.
    """
    y, layout = _as_vector(rho0)
    f = _as_rhs(generator)
    h_stable = _stability_limit(generator)
    t = 0.0
    k0 = f(t, y)
    h = control.first_step or _initial_step(f, t, y, k0, control)

    times = [t]
    states = [y.copy()]
    for obs in observers:
        obs(t, y)
    err_total = 0.0
    n_steps = 0
    terminated = bool(monitor is not None and monitor(y) < control.termination_threshold)
    k = np.empty((7, y.size), dtype=complex)

    while not terminated and t < control.t_max:
        h = min(h, control.max_step, h_stable, control.t_max - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t:.6g}")
        k[0] = k0
        for s in range(1, 7):
            ys = y + h * (np.array(_A[s]) @ k[:s])
            k[s] = f(t + _C[s] * h, ys)
        y_new = y + h * (_B[:6] @ k[:6])
        err = h * (_E @ k)
        scale = control.abs_tol + control.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))

        if err_norm <= 1.0:
            t += h
            y = y_new
            k0 = k[6].copy()  # first-same-as-last
            n_steps += 1
            err_total += float(np.max(np.abs(err)))
            times.append(t)
            states.append(y.copy())
            for obs in observers:
                obs(t, y)
            if monitor is not None and monitor(y) < control.termination_threshold:
                terminated = True
            fac = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
        else:
            fac = max(0.2, 0.9 * err_norm ** -0.2)
        h *= fac

    message = "terminated" if terminated else "t_max reached before termination"
    if not terminated and monitor is not None:
        log.info("propagate: %s (t=%.6g)", message, t)
    return Solution(
        times=np.array(times),
        states=np.array(states),
        layout=layout,
        terminated=terminated,
        error_estimate=err_total,
        n_steps=n_steps,
        message=message,
    )


def propagate_linear(
    rho0,
    generator,
    control: OdeControl = OdeControl(),
    monitor: Callable[[np.ndarray], float] | None = None,
    observers: Sequence[Observer] = (),
    steps_per_doubling: int = 32,
) -> Solution:
    """Exact propagation of d(y)/dt = M y for constant M.

    The grid starts at ``control.first_step`` (default ~0.1 / ||M||) and the
    step doubles every ``steps_per_doubling`` steps (the step propagator is
    squared), capped by ``control.max_step``.  Intermediate times are
    available exactly through :meth:`Solution.evaluate`.
    """
    y, layout = _as_vector(rho0)
    m = generator.superoperator() if hasattr(generator, "superoperator") else np.asarray(generator)
    norm = float(np.linalg.norm(m, 1))
    dt = control.first_step or (0.1 / norm if norm > 0 else control.t_max)
    dt = min(dt, control.max_step, control.t_max)
    step = expm(m * dt)

    t = 0.0
    times = [t]
    states = [y.copy()]
    for obs in observers:
        obs(t, y)
    terminated = bool(monitor is not None and monitor(y) < control.termination_threshold)
    n = 0
    while not terminated and t < control.t_max:
        if t + dt > control.t_max:
            y = expm(m * (control.t_max - t)) @ y
            t = control.t_max
        else:
            y = step @ y
            t += dt
        n += 1
        times.append(t)
        states.append(y.copy())
        for obs in observers:
            obs(t, y)
        if monitor is not None and monitor(y) < control.termination_threshold:
            terminated = True
        if n % steps_per_doubling == 0 and 2 * dt <= control.max_step:
            step = step @ step
            dt *= 2

    return Solution(
        times=np.array(times),
        states=np.array(states),
        layout=layout,
        terminated=terminated,
        error_estimate=n * 1e-15 * max(1.0, norm * dt),
        n_steps=n,
        message="terminated" if terminated else "t_max reached before termination",
        generator=m,
    )


def integrate(rho0, generator, control: OdeControl, monitor=None, observers=()) -> Solution:
    """Dispatch to the propagator selected by ``control.method``."""
    if control.method == "exact":
        return propagate_linear(rho0, generator, control, monitor, observers)
    return propagate(rho0, generator, control, monitor, observers)
