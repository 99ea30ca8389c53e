"""Constrained gradient descent to critical points of the relaxed energy.

Preconditioned (Sobolev) projected descent with Armijo backtracking and a
Palais-Smale residual monitor. The combinatorics of the parameter surface
stay fixed for the whole flow; a step that would degenerate a face is
rejected and halved instead of remeshed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ambient import S3
from .errors import BadParam, DegenerateFace, LineSearchStall, OrientationError
from .geometry import energies
from .mesh import DiscreteImmersion, tangent_field
from .variation import FinslerMetric, dual_residual, grad_relaxed

logger = logging.getLogger("viscosurf")


@dataclass(frozen=True)
class FlowOptions:
    tol: float = 1e-3
    max_iters: int = 500
    armijo_c: float = 1e-4
    step_init: float = 1.0
    step_min: float = 1e-12
    precondition: bool = True

    def __post_init__(self):
        if self.tol <= 0.0:
            raise BadParam("tol must be positive")
        if not (0.0 < self.armijo_c < 1.0):
            raise BadParam("armijo_c must lie in (0, 1)")
        if self.step_min >= self.step_init:
            raise BadParam("step_min must be below step_init")


@dataclass
class CriticalPointResult:
    imm_final: DiscreteImmersion
    iterations: int
    residual_history: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)
    converged: bool = False


def _descent_direction(imm, grad, metric, precondition):
    if not precondition:
        return grad.copy()
    return tangent_field(imm, metric.solve(grad, check=False))


def armijo_step(imm, p, sigma, grad, direction, energy0, opts):
    """Backtracking line search on the relaxed energy.

    Returns (new immersion, step, new energy breakdown) or raises
    LineSearchStall. Trial states that degenerate a face are rejected and
    the step halved, keeping the combinatorics fixed.
    """
    slope = float(np.sum(grad * direction))
    if slope <= 0.0:
        raise LineSearchStall("descent direction has nonnegative slope")
    t = opts.step_init
    while t >= opts.step_min:
        try:
            trial = imm.with_coords(S3.retract(imm.coords, -t * direction))
            e = energies(trial, p, sigma)
        except (DegenerateFace, OrientationError):
            # Overshot into a degenerate or folded state: reject and halve.
            t *= 0.5
            continue
        if e.relaxed <= energy0 - opts.armijo_c * t * slope:
            return trial, t, e
        t *= 0.5
    raise LineSearchStall(f"no step above {opts.step_min} decreases the energy")


def descend(imm: DiscreteImmersion, p: float, sigma: float, opts: FlowOptions,
            stop_below_energy: float | None = None) -> CriticalPointResult:
    """Flow to a critical point of the relaxed energy at fixed sigma.

    ``stop_below_energy`` is the saddle guard used by the min-max driver:
    the flow stops (not converged) as soon as the energy drops below it.
    """
    if p <= 1.0 or sigma < 0.0:
        raise BadParam("need p > 1 and sigma >= 0")
    result = CriticalPointResult(imm_final=imm, iterations=0)
    e = energies(imm, p, sigma)
    result.energy_history.append(e)
    if math.isinf(opts.tol):
        result.converged = True
        result.residual_history.append(0.0)
        return result

    metric = FinslerMetric(imm)
    grad = grad_relaxed(imm, p, sigma)
    res = dual_residual(imm, grad, metric)
    result.residual_history.append(res)

    while result.iterations < opts.max_iters:
        if res <= opts.tol:
            result.converged = True
            return result
        direction = _descent_direction(imm, grad, metric, opts.precondition)
        try:
            imm, step, e = armijo_step(imm, p, sigma, grad, direction, e.relaxed, opts)
        except LineSearchStall as stall:
            stall.result = result
            raise
        result.iterations += 1
        result.imm_final = imm
        result.energy_history.append(e)
        result.step_history.append(step)
        metric = FinslerMetric(imm)
        grad = grad_relaxed(imm, p, sigma)
        res = dual_residual(imm, grad, metric)
        result.residual_history.append(res)
        logger.debug("iter %d: relaxed=%.9g residual=%.3e step=%.3e",
                     result.iterations, e.relaxed, res, step)
        if stop_below_energy is not None and e.relaxed < stop_below_energy:
            result.converged = res <= opts.tol
            return result

    result.converged = res <= opts.tol
    return result


def ps_probe(imm: DiscreteImmersion, p: float, sigma: float) -> float:
    """One-shot Palais-Smale residual at the given state."""
    return dual_residual(imm, grad_relaxed(imm, p, sigma))
