"""Sweep-outs, mountain-pass width, and Struwe continuation in sigma.

A sweep-out is a finite list of immersions over one parameter mesh with
pinned endpoint frames. The deformation is independent per-frame descent,
which keeps the family's class at the discrete level because frames move
continuously and the endpoints never move.

Width is taken over the deformable (interior) frames whenever there are
at least three frames. The pinned endpoint caps stand in for the sweep-
out's degenerate endpoints, whose relaxed energy is zero in the continuum;
the discrete caps cannot reproduce that at large sigma, so counting them
would let an endpoint artifact dominate the width.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadParam, LineSearchStall
from .flow import CriticalPointResult, FlowOptions, armijo_step, descend
from .geometry import energies
from .mesh import DiscreteImmersion, generate
from .variation import FinslerMetric, grad_relaxed

logger = logging.getLogger("viscosurf")

ENDPOINT_CAP = 0.02  # latitude margin of the endpoint frames


class SweepOut:
    """Ordered immersion frames over one mesh, endpoints pinned."""

    def __init__(self, frames):
        frames = list(frames)
        if not frames:
            raise BadParam("sweep-out needs at least one frame")
        mesh0 = frames[0].mesh
        for fr in frames[1:]:
            if not mesh0.same_combinatorics(fr.mesh):
                raise BadParam("all frames must share one parameter mesh")
        self.frames = frames
        self._endpoint_coords = (frames[0].coords.copy(), frames[-1].coords.copy())

    def __len__(self):
        return len(self.frames)

    @property
    def deformable_slice(self) -> slice:
        return slice(1, -1) if len(self.frames) >= 3 else slice(0, len(self.frames))

    def endpoints_intact(self) -> bool:
        return (np.array_equal(self.frames[0].coords, self._endpoint_coords[0])
                and np.array_equal(self.frames[-1].coords, self._endpoint_coords[1]))

    def replaced(self, index: int, imm: DiscreteImmersion) -> "SweepOut":
        frames = list(self.frames)
        frames[index] = imm
        out = SweepOut.__new__(SweepOut)
        out.frames = frames
        out._endpoint_coords = self._endpoint_coords
        return out

    def copy(self) -> "SweepOut":
        out = SweepOut.__new__(SweepOut)
        out.frames = list(self.frames)
        out._endpoint_coords = self._endpoint_coords
        return out


def latitude_sweepout(level: int, n_frames: int) -> SweepOut:
    """Family of latitude spheres sweeping across the equator."""
    if n_frames < 5:
        raise BadParam("need at least 5 frames")
    ts = np.linspace(-1.0 + ENDPOINT_CAP, 1.0 - ENDPOINT_CAP, n_frames)
    base = generate("latitude_sphere", ts[0], level)
    mesh0 = base.mesh
    frames = [base]
    import numpy as _np

    from .mesh import _icosphere

    v3, _ = _icosphere(level)
    for t in ts[1:]:
        rho = math.sqrt(1.0 - t * t)
        coords = _np.empty((len(v3), 4))
        coords[:, :3] = rho * v3
        coords[:, 3] = t
        frames.append(DiscreteImmersion(mesh0, coords))
    return SweepOut(frames)


def width(sw: SweepOut, p: float, sigma: float):
    """Max relaxed energy over the deformable frames and its frame index.

    Ties break to the lowest index. For sweep-outs of one or two frames
    every frame counts.
    """
    sl = sw.deformable_slice
    start = sl.start or 0
    best = -math.inf
    best_idx = start
    for k, fr in enumerate(sw.frames[sl]):
        val = energies(fr, p, sigma).relaxed
        if val > best + 1e-15:
            best = val
            best_idx = start + k
    return best, best_idx


def _frame_descent_steps(imm, p, sigma, steps, step_init, opts):
    """A few monotone descent steps on one frame; stalls leave it unchanged."""
    e = energies(imm, p, sigma)
    for _ in range(steps):
        metric = FinslerMetric(imm)
        grad = grad_relaxed(imm, p, sigma)
        from .mesh import tangent_field

        direction = tangent_field(imm, metric.solve(grad, check=False))
        local = FlowOptions(tol=opts.tol, max_iters=1, armijo_c=opts.armijo_c,
                            step_init=step_init, step_min=opts.step_min,
                            precondition=True)
        try:
            imm, _, e = armijo_step(imm, p, sigma, grad, direction, e.relaxed, local)
        except LineSearchStall:
            break
    return imm


def pull_down(sw: SweepOut, p: float, sigma: float, rounds: int,
              inner_steps: int, step: float = 0.25,
              opts: FlowOptions | None = None) -> SweepOut:
    """Deform interior frames by per-frame descent; width never increases.

    Endpoint frames are untouched. Each accepted inner step is monotone in
    the frame's relaxed energy, so the max over deformable frames cannot
    rise.
    """
    if rounds < 1:
        raise BadParam("rounds must be >= 1")
    if inner_steps < 1:
        raise BadParam("inner_steps must be >= 1")
    opts = opts or FlowOptions(tol=1e-12, max_iters=1, step_min=1e-12)
    out = sw.copy()
    interior = range(1, len(out.frames) - 1) if len(out.frames) >= 3 else range(len(out.frames))
    for _ in range(rounds):
        w_before, _ = width(out, p, sigma)
        for idx in interior:
            out.frames[idx] = _frame_descent_steps(
                out.frames[idx], p, sigma, inner_steps, step, opts)
        w_after, _ = width(out, p, sigma)
        if w_after > w_before + 1e-12:
            raise AssertionError("width increased during pull_down")
        logger.debug("pull_down round: width %.9g -> %.9g", w_before, w_after)
    return out


@dataclass
class MinmaxResult:
    critical: CriticalPointResult
    sweepout: SweepOut
    width: float
    argmax_index: int
    escaped: bool
    frame_at_stall: DiscreteImmersion


def minmax_critical(sw: SweepOut, p: float, sigma: float,
                    opts: FlowOptions | None = None,
                    inner_steps: int = 3, max_rounds: int = 60,
                    stall_window: int = 5, stall_rtol: float = 1e-6) -> MinmaxResult:
    """Pull the sweep-out down until its width stalls, then polish the peak.

    The descent from the stalled argmax frame stops at the residual
    tolerance or as soon as the energy falls more than 5 percent below the
    stalled width, which means the iterate fell off the saddle; that case
    is reported, not fatal.
    """
    opts = opts or FlowOptions(tol=1e-3, max_iters=200)
    current = sw.copy()
    widths = [width(current, p, sigma)[0]]
    for _ in range(max_rounds):
        current = pull_down(current, p, sigma, 1, inner_steps)
        widths.append(width(current, p, sigma)[0])
        if len(widths) > stall_window:
            recent = widths[-stall_window - 1:]
            if abs(recent[0] - recent[-1]) < stall_rtol * max(abs(recent[0]), 1e-30):
                break
    w_stall, argmax = width(current, p, sigma)
    peak = current.frames[argmax]
    guard = 0.95 * w_stall
    try:
        result = descend(peak, p, sigma, opts, stop_below_energy=guard)
    except LineSearchStall as stall:
        result = stall.result or CriticalPointResult(imm_final=peak, iterations=0)
        result.converged = False
    escaped = bool(result.energy_history and result.energy_history[-1].relaxed < guard)
    if escaped:
        logger.info("descent fell off the saddle: %.6g < guard %.6g",
                    result.energy_history[-1].relaxed, guard)
    return MinmaxResult(critical=result, sweepout=current, width=w_stall,
                        argmax_index=argmax, escaped=escaped, frame_at_stall=peak)


@dataclass(frozen=True)
class ContinuationRecord:
    sigma: float
    beta: float
    critical_imm: DiscreteImmersion | None
    area: float
    f_p: float
    entropy_value: float
    slope_fd: float
    slope_analytic: float
    slope_check: float
    accepted: bool
    residual: float
    failure: str = ""


def struwe_continuation(sw: SweepOut, p: float, sigma_schedule, lam: float,
                        opts: FlowOptions | None = None, **minmax_kwargs) -> list:
    """Run the min-max at each sigma on the schedule and select by entropy.

    The acceptance test is a threshold version of the entropy condition:
    sigma^2 F_p log(1/sigma) <= lam and slope_fd sigma log(1/sigma) <= lam,
    with the finite-difference slope taken between consecutive widths; the
    analytic slope 2 sigma F_p is recorded alongside.
    """
    schedule = [float(s) for s in sigma_schedule]
    if any(not (0.0 < s <= 0.5) for s in schedule):
        raise BadParam("every sigma must lie in (0, 0.5]")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise BadParam("the sigma schedule must be strictly decreasing")
    records = []
    prev = None  # (sigma, beta)
    for sigma in schedule:
        try:
            res = minmax_critical(sw.copy(), p, sigma, opts=opts, **minmax_kwargs)
            imm = res.critical.imm_final
            e = energies(imm, p, sigma)
            beta = res.width
            log_inv = math.log(1.0 / sigma)
            entropy = sigma ** 2 * e.f_p * log_inv
            if prev is None:
                slope_fd = 0.0
            else:
                slope_fd = (prev[1] - beta) / (prev[0] - sigma)
            slope_check = slope_fd * sigma * log_inv
            residual = res.critical.residual_history[-1] if res.critical.residual_history else math.nan
            rec = ContinuationRecord(
                sigma=sigma, beta=beta, critical_imm=imm, area=e.area, f_p=e.f_p,
                entropy_value=entropy, slope_fd=slope_fd,
                slope_analytic=2.0 * sigma * e.f_p, slope_check=slope_check,
                accepted=(entropy <= lam and slope_check <= lam),
                residual=residual)
            prev = (sigma, beta)
        except Exception as exc:  # a failed sigma is recorded, not fatal
            logger.warning("continuation failed at sigma=%g: %s", sigma, exc)
            rec = ContinuationRecord(
                sigma=sigma, beta=math.nan, critical_imm=None, area=math.nan,
                f_p=math.nan, entropy_value=math.nan, slope_fd=math.nan,
                slope_analytic=math.nan, slope_check=math.nan,
                accepted=False, residual=math.nan, failure=type(exc).__name__)
        records.append(rec)
    return records
