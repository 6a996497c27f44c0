"""Invariant checks on a configured parameter point, with measured values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jump_space import SINKS, build_extended_space
from .lambda_model import DressedSystem, LambdaParams, dressed_system
from .numerics import OdeControl, integrate
from .observables import final_probabilities, hom_visibility
from .process_states import two_level_extension
from .trajectories import binomial_se, sample_trajectories

TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-10
POSITIVITY_TOL = -1e-8
BALANCE_TOL = 1e-12
DARK_TOL = 1e-12
IDEAL_TOL = 1e-6
ANALYTIC_TOL = 1e-6
ORACLE_SIGMAS = 3.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    limit: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: measured={self.measured:.6g} limit={self.limit:.6g}"
        return f"{text} ({self.detail})" if self.detail else text


def propagation_checks(params: LambdaParams, control: OdeControl = OdeControl()) -> list[CheckResult]:
    """Trace, block Hermiticity and positivity along one full propagation."""
    gen = build_extended_space(params)
    sink_w = gen.population_weights(SINKS)
    sol = integrate(gen.initial, gen, control, monitor=lambda y: 1.0 - (sink_w @ y).real)
    tw = gen.layout.trace_weights()
    drift = float(np.max(np.abs(sol.states @ tw - 1.0)))
    herm, low = 0.0, math.inf
    for i in range(len(sol)):
        rho = sol.block(i)
        herm = max(herm, rho.hermiticity_defect())
        low = min(low, rho.min_eigenvalue())
    n = f"{len(sol)} samples"
    return [
        CheckResult("trace", drift <= TRACE_TOL, drift, TRACE_TOL, n),
        CheckResult("hermiticity", herm <= HERMITICITY_TOL, herm, HERMITICITY_TOL, n),
        CheckResult("positivity", low >= POSITIVITY_TOL, low, POSITIVITY_TOL, n),
    ]


def detailed_balance_check(d: DressedSystem) -> CheckResult:
    """rate_down / rate_up against exp(beta Lambda), relative deviation."""
    if d.rate_up == 0 and d.rate_down == 0:
        return CheckResult("detailed-balance", True, 0.0, BALANCE_TOL, "no phonon coupling")
    if d.rate_up == 0:
        return CheckResult("detailed-balance", False, math.inf, BALANCE_TOL, "upward rate vanishes")
    dev = abs((d.rate_down / d.rate_up) / math.exp(d.beta * d.gap) - 1.0)
    return CheckResult("detailed-balance", dev <= BALANCE_TOL, dev, BALANCE_TOL)


def dark_state_check(d: DressedSystem) -> CheckResult:
    p = d.projector()
    leak = max(np.linalg.norm(p @ d.psi0), np.linalg.norm(d.psi0.conj() @ p))
    return CheckResult("dark-state", leak <= DARK_TOL, float(leak), DARK_TOL)


def ideal_limit_check(params: LambdaParams) -> CheckResult:
    """With alpha = gamma = 0 the photons are perfect and never lost."""
    ps, pd, _ = final_probabilities(params.replace(alpha=0.0, gamma=0.0))
    dev = max(abs(hom_visibility(ps, pd) - 1.0), abs(ps + pd - 1.0))
    return CheckResult("ideal-limit", dev <= IDEAL_TOL, dev, IDEAL_TOL, "alpha=gamma=0")


def two_level_check(gamma: float = 0.05, points: int = 20) -> CheckResult:
    """Undriven two-level emitter: emission probability 1 - exp(-gamma t)."""
    gen = two_level_extension(0.0, gamma)
    horizon = 5.0 / gamma
    sol = integrate(gen.initial, gen, OdeControl(t_max=horizon, termination_threshold=1e-300))
    w = gen.population_weights(["1"])
    times = np.linspace(0.0, horizon, points)
    dev = max(abs((sol.evaluate(t) @ w).real - (1 - math.exp(-gamma * t))) for t in times)
    return CheckResult("two-level-emission", dev <= ANALYTIC_TOL, float(dev), ANALYTIC_TOL, f"{points} times")


def oracle_check(params: LambdaParams, trajectories: int, seed: int) -> CheckResult:
    """Largest |semi-quantum - Monte Carlo| in units of the binomial standard error."""
    ref = final_probabilities(params)
    est = sample_trajectories(params, trajectories, seed=seed)
    worst = 0.0
    for p, q in zip(ref, (est.p_same, est.p_diff, est.p_env)):
        se = binomial_se(p, trajectories)
        if se == 0:
            z = 0.0 if abs(p - q) < 1e-12 else math.inf
        else:
            z = abs(p - q) / se
        worst = max(worst, z)
    detail = f"n={trajectories} seed={seed} mc=({est.p_same:.4f}, {est.p_diff:.4f}, {est.p_env:.4f})"
    return CheckResult("oracle-agreement", worst <= ORACLE_SIGMAS, worst, ORACLE_SIGMAS, detail)


def run_checks(
    params: LambdaParams,
    control: OdeControl = OdeControl(),
    oracle: tuple[int, int] | None = None,
    dressed: DressedSystem | None = None,
) -> list[CheckResult]:
    """Full suite; ``oracle`` is (trajectories, seed) or None to skip sampling.

    ``dressed`` replaces the computed dressed system in the phonon checks.
    """
    d = dressed if dressed is not None else dressed_system(params)
    checks = propagation_checks(params, control)
    checks += [detailed_balance_check(d), dark_state_check(d), ideal_limit_check(params)]
    if oracle is not None:
        checks.append(oracle_check(params, *oracle))
    checks.append(two_level_check(params.gamma if params.gamma > 0 else 0.05))
    return checks
