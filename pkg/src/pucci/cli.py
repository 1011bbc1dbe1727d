"""Command line front end: ``pucci verify-kernel|barrier|eval|solve|lab``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION, ConfigError, parse_config
from .errors import PucciError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# output helpers

def _json_text(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_atomic(files: dict) -> None:
    """Write every (path -> text) pair via temp file + rename, only after all are ready."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            staged.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        for tmp, path in staged:
            os.replace(tmp, path)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def _envelope(cfg, body: dict) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "command": cfg.command, "seed": cfg.seed}
    out.update(body)
    return out


# ---------------------------------------------------------------------------
# commands (each returns (status, {path: text}))

def cmd_verify_kernel(cfg, args):
    from .kernel_model import KernelFunction, check_kernel_bounds, check_upper_scaling, dini_integral

    spec = cfg.kernel.build()
    up = check_upper_scaling(spec.phi, 64)
    dini = dini_integral(spec.phi)
    lo_phi = spec.lam if spec.kernel_class == "A4" else 0.0
    bounds = {}
    ok = up.passed
    rng = np.random.default_rng(cfg.seed)
    for dim in (1, 2):
        y = rng.standard_normal((200, dim)) * np.exp(rng.uniform(-5, 5, (200, 1)))
        for name, cs, cp in (("lower", spec.lam, lo_phi), ("upper", spec.Lam, spec.Lam)):
            viol = check_kernel_bounds(KernelFunction.constant(spec, dim, cs, cp), y)
            bounds[f"d{dim}_{name}"] = {"max_violation": viol, "pass": viol <= 1e-12}
            ok = ok and viol <= 1e-12
    body = {"spec": spec.to_dict(), "upper_scaling": {"max_violation": up.max_violation, "pass": up.passed},
            "dini_integral": dini, "kernel_bounds": bounds, "pass": ok}
    return (EXIT_OK if ok else EXIT_FAIL), {args.out: _json_text(_envelope(cfg, body))}


def cmd_barrier(cfg, args):
    from .barriers import BarrierParams, search_barrier_params, verify_barrier

    spec = cfg.kernel.build()
    b = cfg.barrier
    ar = tuple(b.alpha_range) if b.alpha_range else (spec.alpha, spec.alpha)
    if b.p is None:
        params = search_barrier_params(b.r, spec, alpha_range=ar, dim=b.dim, max_halvings=b.max_halvings)
    else:
        params = BarrierParams(b.p, b.delta, b.r, b.dim, ar)
    cert = verify_barrier(params, spec, params.delta / 16.0)
    check = verify_barrier(params, spec, params.delta / 32.0)
    passed = cert.passed and check.passed
    body = cert.to_dict()
    body["pass"] = passed
    body["cross_check"] = check.to_dict()
    rows = []
    for ai, a in enumerate(cert.alphas):
        for ri, rad in enumerate(cert.radii):
            rows.append([a, rad, cert.values[ai, ri], cert.errors[ai, ri], check.values[ai, ri]])
    out = Path(args.out)
    return (EXIT_OK if passed else EXIT_FAIL), {
        out: _json_text(_envelope(cfg, body)),
        out.with_suffix(".csv"): _csv_text(["alpha", "radius", "value", "error", "value_half_h"], rows)}


def _read_points(path, dim):
    pts = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                pts.append([float(v) for v in row[:dim]])
            except ValueError:
                continue  # header
    return np.array(pts, dtype=float).reshape(-1, dim)


def cmd_eval(cfg, args):
    from .extremal_ops import eval_many
    from .problems import eval_kind, grid_function

    spec = cfg.kernel.build()
    e = cfg.eval
    u = grid_function(e.u, e.grid.dim, e.grid.R, e.grid.N)
    if args.points:
        pts = _read_points(args.points, e.grid.dim)
    elif e.points is not None:
        pts = np.array(e.points, dtype=float).reshape(-1, e.grid.dim)
    else:
        raise ConfigError([("eval.points", "give points in the config or with --points")])
    kind = eval_kind(e.operator, spec, e.grid.dim)
    evs = eval_many(kind, spec, u, pts)
    rows = [[*p, v.value, v.near_field, v.mid_field, v.tail, v.error_budget] for p, v in zip(pts.tolist(), evs)]
    head = [f"x{k}" for k in range(e.grid.dim)] + ["value", "near", "mid", "tail", "err"]
    return EXIT_OK, {args.out: _csv_text(head, rows)}


def cmd_solve(cfg, args):
    from .problems import build_problem
    from .solver import SolverConfig, solve

    spec = cfg.kernel.build()
    s = cfg.solve
    prob = build_problem(s.grid, s.domain, s.f, s.g, s.operator, spec)
    res = solve(prob, SolverConfig(s.tol, s.max_iters, s.damping))
    coords = res.u.coords().reshape(-1, s.grid.dim)
    rows = [[*c, v] for c, v in zip(coords.tolist(), res.u.values.ravel().tolist())]
    head = [f"x{k}" for k in range(s.grid.dim)] + ["value"]
    out = Path(args.out)
    summary = _envelope(cfg, res.summary())
    return EXIT_OK, {out: _csv_text(head, rows), out.with_suffix(".json"): _json_text(summary)}


def cmd_lab(cfg, args):
    from .regularity_lab import CSV_COLUMNS, run_experiment

    rep = run_experiment(cfg.lab)
    d = Path(args.out_dir)
    files = {d / "lab.csv": _csv_text(CSV_COLUMNS, rep.csv_rows())}
    for row in rep.rows:
        name = f"{row['phi_family']}_alpha{row['alpha']:g}.json"
        files[d / name] = _json_text(_envelope(cfg, {"report": row}))
    return EXIT_OK, files


COMMANDS = {"verify-kernel": cmd_verify_kernel, "barrier": cmd_barrier, "eval": cmd_eval,
            "solve": cmd_solve, "lab": cmd_lab}


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pucci", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        if name == "lab":
            sp.add_argument("--out-dir", required=True)
        else:
            sp.add_argument("--out", required=True)
        if name == "eval":
            sp.add_argument("--points", help="CSV of evaluation points (x0[,x1])")
        sp.add_argument("--threads", type=int, default=None, help="cap on worker threads")
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return p


def run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"pucci: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
        if cfg.command != args.command:
            raise ConfigError([("command", f"config is for {cfg.command!r}, not {args.command!r}")])
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
        status, files = _dispatch(cfg, args)
    except ConfigError as exc:
        for path, msg in exc.errors:
            print(f"pucci: config error at {path or '<root>'}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (PucciError, ValueError) as exc:
        if isinstance(exc, ValueError):
            print(f"pucci: invalid input: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"pucci: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except RuntimeError as exc:
        print(f"pucci: {exc}", file=sys.stderr)
        cause = getattr(exc, "cause", None)
        return EXIT_CONFIG if isinstance(cause, ValueError) else EXIT_FAIL
    try:
        write_atomic(files)
    except OSError as exc:
        print(f"pucci: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


def _dispatch(cfg, args):
    fn = COMMANDS[cfg.command]
    if args.threads:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=int(args.threads)):
            return fn(cfg, args)
    return fn(cfg, args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
