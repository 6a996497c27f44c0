"""Figures of merit of a two-source HOM run: visibility, efficiency, completion time, rate."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .jump_space import PD, PE, PROCESS_LABELS, PS, SINKS, build_extended_space
from .lambda_model import LambdaParams, Mode
from .numerics import OdeControl, integrate

log = logging.getLogger(__name__)

COMPLETION_LEVEL = 0.99


class NoDetectionError(ValueError):
    pass


class IncompleteRunError(RuntimeError):
    def __init__(self, achieved: float, t_max: float):
        super().__init__(
            f"completed population reached only {achieved:.6g} < {COMPLETION_LEVEL} by t={t_max:g} ps"
        )
        self.achieved = achieved


class UnreachableTargetError(ValueError):
    def __init__(self, target: float, achievable: tuple[float, float], parameter: str):
        super().__init__(
            f"v_hom = {target} not reachable by tuning {parameter}; "
            f"branch covers [{achievable[0]:.8g}, {achievable[1]:.8g}]"
        )
        self.target = target
        self.achievable = achievable
        self.parameter = parameter


def hom_visibility(p_same: float, p_diff: float) -> float:
    if p_same < -1e-12 or p_diff < -1e-12:
        raise ValueError("probabilities must be non-negative")
    p_same, p_diff = max(p_same, 0.0), max(p_diff, 0.0)
    total = p_same + p_diff
    if total == 0:
        raise NoDetectionError("no coincidence detections: visibility undefined")
    return (p_same - p_diff) / total


@dataclass
class RunResult:
    params: LambdaParams
    times: np.ndarray
    populations: dict[str, np.ndarray]
    p_same: float
    p_diff: float
    p_env: float
    t_f: float
    complete: bool
    reset_time: float = 0.0
    error: str | None = None
    extras: dict = field(default_factory=dict)

    @property
    def efficiency(self) -> float:
        return self.p_same + self.p_diff

    @property
    def v_hom(self) -> float:
        return hom_visibility(self.p_same, self.p_diff)

    @property
    def combined(self) -> float:
        return self.v_hom * self.efficiency

    @property
    def r_f(self) -> float:
        if not math.isfinite(self.t_f):
            return math.nan
        return self.efficiency / (self.t_f + self.reset_time)

    def completed(self) -> np.ndarray:
        return sum(self.populations[s] for s in SINKS)


def final_probabilities(params: LambdaParams) -> tuple[float, float, float]:
    """(p_same, p_diff, p_env) as t -> infinity, without time stepping."""
    gen = build_extended_space(params)
    fin = gen.final_accumulator_populations(gen.initial.to_vector())
    return fin[PS], fin[PD], fin[PE]


def _crossing_time(sol, weights: np.ndarray, level: float) -> float:
    completed = (sol.states @ weights).real
    hit = np.nonzero(completed >= level)[0]
    if len(hit) == 0:
        return math.nan
    i = int(hit[0])
    if i == 0:
        return float(sol.times[0])
    t0, t1 = sol.times[i - 1], sol.times[i]
    if sol.generator is None:
        c0, c1 = completed[i - 1], completed[i]
        return float(t0 + (level - c0) * (t1 - t0) / (c1 - c0))
    return float(
        brentq(lambda t: (sol.evaluate(t) @ weights).real - level, t0, t1, xtol=1e-9 * t1, rtol=1e-12)
    )


def run_once(
    params: LambdaParams,
    control: OdeControl = OdeControl(),
    reset_time: float = 0.0,
    swap_detectors: bool = False,
) -> RunResult:
    """Propagate the two-source semi-quantum master equation to completion.

    Final probabilities are the exact long-time limits; the time series holds
    the propagated populations up to termination.
    """
    gen = build_extended_space(params, swap_detectors=swap_detectors)
    sink_w = gen.population_weights(SINKS)
    sol = integrate(gen.initial, gen, control, monitor=lambda y: 1.0 - (sink_w @ y).real)
    fin = gen.final_accumulator_populations(gen.initial.to_vector())
    pops = {
        lab: (sol.states @ gen.population_weights([lab])).real for lab in PROCESS_LABELS
    }
    t_f = _crossing_time(sol, sink_w, COMPLETION_LEVEL)
    return RunResult(
        params=params,
        times=sol.times,
        populations=pops,
        p_same=fin[PS],
        p_diff=fin[PD],
        p_env=fin[PE],
        t_f=t_f,
        complete=sol.terminated,
        reset_time=reset_time,
        error=None if math.isfinite(t_f) else sol.message,
        extras={"n_steps": sol.n_steps, "error_estimate": sol.error_estimate},
    )


def production_rate(result: RunResult, reset_time: float | None = None) -> float:
    """Pairs per ps, e_f / (t_f + reset time)."""
    if not math.isfinite(result.t_f):
        achieved = float(result.completed()[-1]) if len(result.times) else 0.0
        raise IncompleteRunError(achieved, float(result.times[-1]) if len(result.times) else 0.0)
    reset = result.reset_time if reset_time is None else reset_time
    return result.efficiency / (result.t_f + reset)


SWEEPABLE = ("h", "nu", "omega")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    template: LambdaParams = LambdaParams()
    kappa_tracks_h: bool = True

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.parameter!r}; choose from {SWEEPABLE}")
        vals = tuple(float(v) for v in self.values)
        if len(vals) == 0:
            raise ValueError("empty sweep grid")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        object.__setattr__(self, "values", vals)

    def point(self, value: float) -> LambdaParams:
        changes = {self.parameter: value}
        if self.parameter == "h" and self.kappa_tracks_h:
            changes["kappa"] = 3.0 * value
        return self.template.replace(**changes)

    def points(self) -> list[LambdaParams]:
        return [self.point(v) for v in self.values]


def _run_point(args) -> RunResult:
    params, control, reset = args
    try:
        return run_once(params, control, reset)
    except Exception as exc:  # recorded per point; the sweep carries on
        log.warning("sweep point %s failed: %s", params, exc)
        nan = math.nan
        return RunResult(params, np.zeros(0), {}, nan, nan, nan, nan, False, reset, error=str(exc))


def sweep(
    spec: SweepSpec, control: OdeControl = OdeControl(), workers: int = 1, reset_time: float = 0.0
) -> list[RunResult]:
    """One RunResult per grid value, in grid order."""
    jobs = [(p, control, reset_time) for p in spec.points()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_point, jobs))
    return [_run_point(j) for j in jobs]


# -- threshold search -------------------------------------------------------------

PULSE_RELAX_SCAN = tuple(np.geomspace(1e-4, 3.0, 31))
RAMAN_SCAN = tuple(np.arange(0.5, 20.01, 0.5))


@dataclass
class RateResult:
    target: float
    mode: Mode
    parameter: str
    value: float
    result: RunResult

    @property
    def r_f(self) -> float:
        return production_rate(self.result)


def _tuned(template: LambdaParams, mode: Mode, value: float) -> LambdaParams:
    if mode is Mode.PULSE_RELAX:
        return template.replace(mode=mode, h=value, kappa=3.0 * value)
    return template.replace(mode=mode, nu=value)


@lru_cache(maxsize=64)
def _branch(template: LambdaParams, mode: Mode, grid: tuple[float, ...]):
    vis = []
    for x in grid:
        ps, pd, _ = final_probabilities(_tuned(template, mode, x))
        vis.append(hom_visibility(ps, pd))
    vis = np.array(vis)
    slack = 1e-9
    if mode is Mode.PULSE_RELAX:
        # small-h branch, visibility falling towards the dip
        end = int(np.argmin(vis))
        xs, vs = np.array(grid[: end + 1]), vis[: end + 1]
    else:
        # large-detuning branch, visibility rising out of the last dip
        start = len(vis) - 1
        while start > 0 and vis[start - 1] < vis[start] + slack:
            start -= 1
        xs, vs = np.array(grid[start:]), vis[start:]
    return xs, vs


def rate_at_indistinguishability(
    target: float,
    mode: Mode | str,
    control: OdeControl = OdeControl(),
    template: LambdaParams | None = None,
    grid: Sequence[float] | None = None,
    tol: float = 1e-4,
) -> RateResult:
    """Tune the free parameter until v_hom = target, then report the pair rate.

    The free parameter is h (with kappa = 3 h) for pulse-relax and the
    detuning for Raman.  Only the monotone branch is searched.  The root is
    located to |v_hom - target| <= tol * (1 - target) so that targets close to
    one are resolved in infidelity.
    """
    if not 0 < target < 1:
        raise ValueError("target visibility must lie in (0, 1)")
    mode = Mode(mode)
    template = template or LambdaParams()
    template = template.replace(mode=mode)
    if grid is None:
        grid = PULSE_RELAX_SCAN if mode is Mode.PULSE_RELAX else RAMAN_SCAN
    grid = tuple(float(x) for x in grid)
    parameter = "h" if mode is Mode.PULSE_RELAX else "nu"
    xs, vs = _branch(template, mode, grid)

    lo_v, hi_v = float(vs.min()), float(vs.max())
    if not lo_v <= target <= hi_v:
        raise UnreachableTargetError(target, (lo_v, hi_v), parameter)
    above = vs >= target
    # first index where the branch is on the far side of the target
    if mode is Mode.PULSE_RELAX:
        k = int(np.nonzero(~above)[0][0]) if (~above).any() else len(vs) - 1
        a, b = xs[max(k - 1, 0)], xs[k]
    else:
        k = int(np.nonzero(above)[0][0])
        a, b = xs[max(k - 1, 0)], xs[k]

    def gap(logx):
        ps, pd, _ = final_probabilities(_tuned(template, mode, math.exp(logx)))
        return hom_visibility(ps, pd) - target

    if a == b:
        x = a
    else:
        x = math.exp(
            brentq(gap, math.log(a), math.log(b), xtol=1e-13, rtol=4 * np.finfo(float).eps)
        )
    result = run_once(_tuned(template, mode, x), control)
    miss = abs(result.v_hom - target)
    if miss > tol * (1 - target):
        log.warning("visibility search missed target %g by %.3g", target, miss)
    return RateResult(target, mode, parameter, x, result)
