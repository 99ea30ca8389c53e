"""Command-line orchestration: configuration, runs, CSV and mesh output.

Exit codes are a stable contract: 0 ok, 1 check failed, 2 input error,
3 flow stall, 4 no accepted sigma. Every output file starts with comment
lines embedding the tool version, a hash of the resolved configuration,
the seed and the thread count, so identical inputs reproduce identical
bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (BadParam, DegenerateFace, LineSearchStall, ParseError,
                     ValidationError, ViscosurfError)
from .flow import FlowOptions, descend
from .mesh import DiscreteImmersion, generate, load, save
from .minmax import latitude_sweepout, struwe_continuation
from .util import make_rng
from .varifold import (density_profile, farthest_point_sample, integer_density,
                       neck_scan, standard_field_basis, stationarity_residual)
from .variation import fd_check, random_tangent

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_FLOW_STALL = 3
EXIT_NO_ACCEPTED = 4


@dataclass
class RunConfig:
    p: float = 2.0
    sigma: float = 0.1
    sigma_schedule: list = field(default_factory=list)
    lambda_entropy: float = 1.0
    tol: float = 1e-3
    max_iters: int = 200
    mesh: str = "equator:4"
    frames: int = 33
    level: int = 4
    seed: int = 42
    thread_count: int = 1
    output_dir: str = "out"
    perturb: float = 0.0
    centers: int = 8
    debug_corrupt_gradient: bool = False

    def validate(self):
        if self.p <= 1.0:
            raise BadParam("p must exceed 1")
        sched = list(self.sigma_schedule)
        if sched and any(b >= a for a, b in zip(sched, sched[1:])):
            raise BadParam("sigma schedule must be strictly decreasing")

    def hash(self) -> str:
        # The output directory does not influence any computed number, so
        # it stays out of the hash: same inputs, same bytes, any location.
        items = [f"{f.name}={getattr(self, f.name)!r}"
                 for f in fields(self) if f.name != "output_dir"]
        return hashlib.sha256("\n".join(sorted(items)).encode()).hexdigest()[:16]

    def header_lines(self) -> list:
        return [
            f"viscosurf {__version__}",
            f"config_hash={self.hash()}",
            f"seed={self.seed}",
            f"thread_count={self.thread_count}",
        ]


def parse_config_file(path) -> dict:
    """Flat key-value config, a TOML-compatible subset with [sections]."""
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                continue  # sections are namespacing sugar only
            if "=" not in line:
                raise ParseError(f"expected 'key = value', got {line!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = _parse_value(val)
    return values


def _parse_value(text: str):
    text = text.strip().strip('"').strip("'")
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if "," in text:
        return [_parse_value(t) for t in text.split(",") if t.strip()]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def build_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, val in parse_config_file(args.config).items():
            if key == "schedule":
                key = "sigma_schedule"
            if key == "lambda":
                key = "lambda_entropy"
            if hasattr(cfg, key):
                setattr(cfg, key, val)
    mapping = {
        "p": "p", "sigma": "sigma", "lambda_entropy": "lambda_entropy",
        "tol": "tol", "max_iters": "max_iters", "mesh": "mesh",
        "frames": "frames", "level": "level", "seed": "seed",
        "threads": "thread_count", "out": "output_dir", "perturb": "perturb",
        "centers": "centers", "debug_corrupt_gradient": "debug_corrupt_gradient",
    }
    for arg_name, cfg_name in mapping.items():
        val = getattr(args, arg_name, None)
        if val is not None:
            setattr(cfg, cfg_name, val)
    schedule = getattr(args, "schedule", None)
    if schedule:
        cfg.sigma_schedule = [float(s) for s in schedule.split(",")]
    if isinstance(cfg.sigma_schedule, (int, float)):
        cfg.sigma_schedule = [float(cfg.sigma_schedule)]
    cfg.validate()
    return cfg


def resolve_mesh(cfg: RunConfig) -> DiscreteImmersion:
    """Mesh spec: 'equator:L', 'clifford:NU,NV', 'latitude:T,L', or a path."""
    spec = cfg.mesh
    if ":" in spec and not Path(spec).exists():
        kind, _, rest = spec.partition(":")
        params = [float(x) for x in rest.split(",")]
        if kind == "equator":
            imm = generate("equator", int(params[0]))
        elif kind == "clifford":
            imm = generate("clifford", int(params[0]), int(params[1]))
        elif kind in ("latitude", "latitude_sphere"):
            imm = generate("latitude_sphere", params[0], int(params[1]))
        else:
            raise BadParam(f"unknown mesh generator {kind!r}")
    else:
        imm = load(spec)
    if cfg.perturb > 0.0:
        rng = make_rng(cfg.seed)
        from .ambient import S3

        w = random_tangent(imm, rng, cfg.perturb)
        imm = imm.with_coords(S3.retract(imm.coords, w))
    return imm


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    return f"{v:.17g}"


def write_csv(path, cfg: RunConfig, columns, rows) -> None:
    lines = [f"# {h}" for h in cfg.header_lines()]
    lines.append("# columns: " + ",".join(columns))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _out(cfg: RunConfig, name: str) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gradcheck(cfg: RunConfig) -> int:
    imm = resolve_mesh(cfg)
    rng = make_rng(cfg.seed)
    rows = []
    worst = 0.0
    for energy_id in ("area", "f_p", "relaxed"):
        for trial in range(5):
            w = random_tangent(imm, rng)
            err = fd_check(imm, energy_id, w, p=cfg.p, sigma=cfg.sigma)
            if cfg.debug_corrupt_gradient:
                err += 1.0  # negative control: force the check to fail
            rows.append((energy_id, trial, err))
            worst = max(worst, err)
    print(f"{'energy':<10}{'trial':>6}{'rel_error':>14}")
    for energy_id, trial, err in rows:
        print(f"{energy_id:<10}{trial:>6}{err:>14.3e}")
    ok = worst < 1e-5
    print(f"gradcheck {'PASS' if ok else 'FAIL'} (worst {worst:.3e})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_relax(cfg: RunConfig) -> int:
    imm = resolve_mesh(cfg)
    opts = FlowOptions(tol=cfg.tol, max_iters=cfg.max_iters)
    try:
        result = descend(imm, cfg.p, cfg.sigma, opts)
    except LineSearchStall as stall:
        result = stall.result
        if result is not None:
            _write_flow_outputs(cfg, result)
        print("relax: line search stalled", file=sys.stderr)
        return EXIT_FLOW_STALL
    _write_flow_outputs(cfg, result)
    print(f"relax: converged={result.converged} iters={result.iterations} "
          f"area={result.energy_history[-1].area:.8g}")
    return EXIT_OK if result.converged else EXIT_CHECK_FAILED


def _write_flow_outputs(cfg: RunConfig, result) -> None:
    rows = []
    for it, e in enumerate(result.energy_history):
        res = result.residual_history[it] if it < len(result.residual_history) else math.nan
        step = result.step_history[it - 1] if 0 < it <= len(result.step_history) else 0.0
        rows.append((it, e.area, e.f_p, e.relaxed, res, step))
    write_csv(_out(cfg, "flow.csv"), cfg,
              ["iter", "area", "f_p", "relaxed", "residual", "step"], rows)
    save(result.imm_final, _out(cfg, "final.imm4"), header_comments=cfg.header_lines())


def _continuation_rows(records):
    rows = []
    for r in records:
        rows.append((r.sigma, r.beta, r.area, r.f_p, r.entropy_value,
                     r.slope_fd, r.slope_analytic, r.accepted, r.residual))
    return rows


_CONT_COLUMNS = ["sigma", "beta", "area", "f_p", "entropy_value",
                 "slope_fd", "slope_analytic", "accepted", "residual"]


def cmd_minmax(cfg: RunConfig) -> int:
    schedule = list(cfg.sigma_schedule) or [cfg.sigma]
    return _run_continuation(cfg, schedule)


def cmd_continue(cfg: RunConfig) -> int:
    schedule = list(cfg.sigma_schedule) or [0.2, 0.1, 0.05]
    return _run_continuation(cfg, schedule)


def _run_continuation(cfg: RunConfig, schedule) -> int:
    sw = latitude_sweepout(cfg.level, cfg.frames)
    opts = FlowOptions(tol=cfg.tol, max_iters=cfg.max_iters)
    records = struwe_continuation(sw, cfg.p, schedule, cfg.lambda_entropy, opts=opts)
    write_csv(_out(cfg, "continuation.csv"), cfg, _CONT_COLUMNS, _continuation_rows(records))
    for rec in records:
        if rec.critical_imm is not None:
            save(rec.critical_imm, _out(cfg, f"critical_sigma{rec.sigma:g}.imm4"),
                 header_comments=cfg.header_lines())
    accepted = sum(1 for r in records if r.accepted)
    print(f"continuation: {accepted}/{len(records)} sigmas accepted")
    return EXIT_OK if accepted >= 1 else EXIT_NO_ACCEPTED


def cmd_diagnose(cfg: RunConfig) -> int:
    imm = resolve_mesh(cfg)
    h = imm.median_edge_length
    centers = farthest_point_sample(imm, cfg.centers)
    r_hi = min(max(0.3, 5.0 * h), 1.0)
    r_lo = min(4.0 * h, 0.9 * r_hi)
    radii = np.geomspace(r_lo, r_hi, 8)

    density_rows = []
    summary_rows = []
    for qi, v in enumerate(centers):
        prof = density_profile(imm, imm.coords[v], radii)
        for r, m, ratio in zip(prof.radii, prof.masses, prof.ratios):
            density_rows.append((qi, r, m, ratio, prof.fitted_c))
        est = integer_density(imm, imm.coords[v], radii)
        summary_rows.append((qi, est.n_hat, est.n_rounded, est.confidence))
    write_csv(_out(cfg, "density.csv"), cfg,
              ["q_index", "r", "mass", "ratio", "fitted_c"], density_rows)
    write_csv(_out(cfg, "density_summary.csv"), cfg,
              ["q_index", "n_hat", "n_rounded", "confidence"], summary_rows)

    stat_rows = []
    for fid, fld in enumerate(standard_field_basis()):
        stat_rows.append((fid, stationarity_residual(imm, fld)))
    write_csv(_out(cfg, "stationarity.csv"), cfg, ["field_id", "residual"], stat_rows)

    neck_rows = []
    x = int(centers[0])
    from .varifold import _graph_distances

    ecc = float(_graph_distances(imm, x, weighted=False).max())
    j_max = 3
    delta = ecc / 2 ** (j_max + 1)
    report = neck_scan(imm, x, delta, j_max)
    for j, e in enumerate(report.annuli_energies, start=1):
        neck_rows.append((x, j, e))
    write_csv(_out(cfg, "neck.csv"), cfg, ["x", "j", "annulus_energy"], neck_rows)
    print(f"diagnose: wrote density/stationarity/neck CSVs to {cfg.output_dir}")
    return EXIT_OK


def cmd_mesh_gen(cfg: RunConfig, out_path: str) -> int:
    imm = resolve_mesh(cfg)
    save(imm, out_path, header_comments=cfg.header_lines())
    print(f"mesh gen: wrote {out_path} (V={imm.vertex_count}, F={imm.face_count})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", default=None)
    sub.add_argument("--p", type=float, default=None)
    sub.add_argument("--sigma", type=float, default=None)
    sub.add_argument("--schedule", default=None)
    sub.add_argument("--lambda", dest="lambda_entropy", type=float, default=None)
    sub.add_argument("--tol", type=float, default=None)
    sub.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    sub.add_argument("--mesh", default=None)
    sub.add_argument("--frames", type=int, default=None)
    sub.add_argument("--level", type=int, default=None)
    sub.add_argument("--out", default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--perturb", type=float, default=None)
    sub.add_argument("--centers", type=int, default=None)
    sub.add_argument("--debug-corrupt-gradient", dest="debug_corrupt_gradient",
                     action="store_true", default=None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="viscosurf")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("gradcheck", "relax", "minmax", "continue", "diagnose"):
        _add_common(subs.add_parser(name))
    mesh_parser = subs.add_parser("mesh")
    mesh_subs = mesh_parser.add_subparsers(dest="mesh_command", required=True)
    gen = mesh_subs.add_parser("gen")
    _add_common(gen)
    gen.add_argument("--output", required=True)

    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg)
        if args.command == "relax":
            return cmd_relax(cfg)
        if args.command == "minmax":
            return cmd_minmax(cfg)
        if args.command == "continue":
            return cmd_continue(cfg)
        if args.command == "diagnose":
            return cmd_diagnose(cfg)
        if args.command == "mesh":
            return cmd_mesh_gen(cfg, args.output)
        parser.error(f"unknown command {args.command}")
    except (ParseError, ValidationError, DegenerateFace, BadParam, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except LineSearchStall as exc:
        print(f"flow stall: {exc}", file=sys.stderr)
        return EXIT_FLOW_STALL
    except ViscosurfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
