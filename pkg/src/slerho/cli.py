"""Command-line front end.

    slerho <command> [--config FILE] [key=value ...] [--out DIR] [--formats csv,json,svg] [--workers N]
    slerho replay MANIFEST [--out DIR]

Parameters come from a flat ``key = value`` config file, overridden by
``key=value`` arguments. Every run writes ``manifest.json`` holding the
fully resolved config, which ``replay`` re-executes.

Exit status: 0 success, 2 invalid configuration, 3 runtime failure,
4 a non-exploratory check failed.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import cft, experiments
from . import io as sio
from .driver import ForceSpec, SdeConfig, sample_ensemble
from .gff import BoundaryData, LatticeDomain, lambda_star, sample_fields
from .levelline import extract_level_line
from .loewner import compute_trace
from .svg import Figure
from .zipper import InsufficientEnsembleError, decimate_midpoints, extract_driving

__all__ = ["EXIT_CHECK", "EXIT_OK", "EXIT_RUNTIME", "EXIT_VALIDATION", "ValidationError", "main", "parse_config_text"]

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4
OUT_ENV = "SLERHO_OUT"
DEFAULT_OUT = "slerho-out"
MIN_LATTICE_RADIUS = 8


class ValidationError(ValueError):
    pass


class CheckFailed(RuntimeError):
    pass


# ---------------------------------------------------------------- value parsers


def rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"malformed rational {text!r} (expected p/q)") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def pairs(text: str) -> tuple[tuple[Fraction, Fraction], ...]:
    """``"x:v,x:v"`` -> ((x, v), ...); empty string -> ()."""
    text = text.strip()
    if not text:
        return ()
    out = []
    for item in text.split(","):
        if item.count(":") != 1:
            raise ValueError(f"malformed pair {item!r} (expected x:value)")
        x, v = item.split(":")
        out.append((rational(x), rational(v)))
    return tuple(out)


def rationals(text: str) -> tuple[Fraction, ...]:
    return tuple(rational(t) for t in text.split(",") if t.strip())


def choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"{text!r} is not one of {', '.join(options)}")
        return text

    return parse


def _enc(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ",".join(f"{a}:{b}" for a, b in v)
        return ",".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], object]
    default: object
    help: str = ""


COMMON = {"seed": Key(int, 0, "master seed")}

SCHEMAS: dict[str, dict[str, Key]] = {
    "sle-sample": {
        "kappa": Key(float, 4.0),
        "force_points": Key(pairs, (), "x:rho pairs"),
        "t_max_capacity": Key(float, 1.0),
        "n_steps": Key(int, 1000),
        "n_paths": Key(int, 100),
        "swallow_policy": Key(choice("halt", "drop-point"), "halt"),
        "route": Key(choice("kr1", "current"), "kr1"),
        "adaptive": Key(_bool, True),
    },
    "trace": {
        "input": Key(str, "", "driving path CSV/JSON"),
        "tol": Key(float, 1e-4),
        "round_trip": Key(_bool, True, "unzip the trace and report the sup-error"),
    },
    "zip": {
        "input": Key(str, "", "curve CSV/JSON (t,re,im)"),
        "reference": Key(str, "", "optional driving path to compare against"),
        "max_step_capacity": Key(float, 0.0, "0 disables midpoint insertion"),
        "decimate": Key(_bool, False),
    },
    "gff": {
        "R_lattice": Key(int, 64),
        "g": Key(float, 1.0),
        "jumps": Key(pairs, ((Fraction(0), Fraction(1)),), "x:q pairs, jump q*lambda* at x"),
        "n_samples": Key(int, 1),
        "noise": Key(_bool, True),
    },
    "levelline": {
        "R_lattice": Key(int, 64),
        "g": Key(float, 1.0),
        "q": Key(rational, Fraction(1)),
        "n_samples": Key(int, 1),
        "noise": Key(_bool, True),
        "decimate": Key(_bool, True),
    },
    "experiment": {
        "name": Key(choice("levelline-kappa", "drift-consistency", "jump-universality"), "levelline-kappa"),
        "q": Key(rational, Fraction(1)),
        "R_lattice": Key(int, 128),
        "n_samples": Key(int, 500),
        "g": Key(float, 1.0),
        "noise": Key(_bool, True),
        "spectators": Key(pairs, ((Fraction(2), Fraction(1)),), "x:q pairs in units of length_unit"),
        "length_unit_lattice": Key(float, 0.0, "0 means R/8"),
        "q_list": Key(rationals, (Fraction(1), Fraction(1, 2))),
        "R_list": Key(lambda s: tuple(int(t) for t in s.split(",")), (64, 128)),
        "probe_distance": Key(int, 2),
    },
    "cft-check": {
        "identity": Key(choice("suite", "m2", "deformed-null", "perturbed", "routes"), "suite"),
        "q": Key(rational, Fraction(1)),
        "k": Key(rational, Fraction(2)),
        "alpha": Key(str, "", "blank means 1/q - q"),
        "s": Key(rational, Fraction(1)),
        "q_i": Key(rational, Fraction(1, 2)),
        "spectators": Key(pairs, ((Fraction(2), Fraction(1)),), "x:q pairs"),
        "n_points": Key(int, 5),
    },
}
FORMATS = {
    "sle-sample": {"csv", "json", "svg"},
    "trace": {"csv", "json", "svg"},
    "zip": {"csv", "json", "svg"},
    "gff": {"csv", "json"},
    "levelline": {"csv", "json", "svg"},
    "experiment": {"json", "svg"},
    "cft-check": {"json"},
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def resolve(command: str, raw: dict[str, str]) -> dict:
    schema = {**COMMON, **SCHEMAS[command]}
    cfg = {k: key.default for k, key in schema.items()}
    for k, v in raw.items():
        if k not in schema:
            hint = difflib.get_close_matches(k, list(schema), n=1)
            tip = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ValidationError(f"unknown key {k!r} for {command}{tip}")
        try:
            cfg[k] = schema[k].parse(v)
        except ValueError as exc:
            raise ValidationError(f"key {k!r}: {exc}") from None
    return cfg


def _encoded(cfg: dict) -> dict[str, str]:
    return {k: _enc(v) for k, v in sorted(cfg.items())}


# ---------------------------------------------------------------- output


class Output:
    def __init__(self, directory: Path, formats: set[str]):
        self.dir = directory
        self.formats = formats
        self.files: dict[str, str] = {}
        self.dir.mkdir(parents=True, exist_ok=True)

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats

    def write(self, name: str, text: str):
        path = self.dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()


def _stage(label: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValidationError, CheckFailed):
        raise
    except Exception as exc:
        raise RuntimeError(f"[{label}] {type(exc).__name__}: {exc}") from exc


# ---------------------------------------------------------------- commands


def cmd_sle_sample(cfg: dict, out: Output, workers: int) -> dict:
    if cfg["n_paths"] < 1:
        raise ValidationError("n_paths must be at least 1")
    try:
        spec = ForceSpec(tuple((float(x), float(r)) for x, r in cfg["force_points"]), cfg["kappa"])
        sde = SdeConfig(cfg["t_max_capacity"], cfg["n_steps"], cfg["seed"], cfg["swallow_policy"], cfg["adaptive"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    paths = _stage("sle-driver", sample_ensemble, spec, sde, cfg["n_paths"], route=cfg["route"])
    if out.wants("json"):
        out.write("ensemble.json", sio.dump_json(sio.ensemble_to_json(paths, {"config": _encoded(cfg)})))
    if out.wants("csv"):
        for i, p in enumerate(paths):
            out.write(f"paths/path_{i:05d}.csv", sio.path_to_csv(p))
    if out.wants("svg"):
        fig = Figure("driving functions", "t", "W")
        for p in paths[:20]:
            fig.line(p.times, p.values)
        out.write("paths.svg", fig.render())
    events = [
        {"path": i, "time": e.time, "index": e.index, "position": e.position}
        for i, p in enumerate(paths)
        for e in p.events
    ]
    return {"n_paths": len(paths), "swallow_events": events}


def _read_path(name: str):
    p = Path(name)
    if not name or not p.exists():
        raise ValidationError(f"input file not found: {name!r}")
    text = p.read_text()
    try:
        if p.suffix == ".json":
            return sio.path_from_json(json.loads(text))
        return sio.path_from_csv(text, source=str(p))
    except (ValueError, KeyError) as exc:
        raise ValidationError(f"cannot parse {name}: {exc}") from None


def cmd_trace(cfg: dict, out: Output, workers: int) -> dict:
    path = _read_path(cfg["input"])
    trace = _stage("loewner", compute_trace, path, cfg["tol"])
    if out.wants("csv"):
        out.write("trace.csv", sio.trace_to_csv(trace))
    if out.wants("json"):
        out.write("trace.json", sio.dump_json(sio.trace_to_json(trace)))
    if out.wants("svg"):
        out.write("trace.svg", Figure("trace", "Re", "Im", equal_aspect=True).line(trace.points.real, trace.points.imag).render())
    summary = {"n_points": len(trace.times), "tip": [trace.tip.real, trace.tip.imag]}
    if cfg["round_trip"]:
        back = _stage("zipper", extract_driving, trace.points)
        grid = path.times
        summary["round_trip_sup_error"] = float(np.max(np.abs(np.interp(grid, back.times, back.values) - path.values)))
    return summary


def cmd_zip(cfg: dict, out: Output, workers: int) -> dict:
    name = cfg["input"]
    if not name or not Path(name).exists():
        raise ValidationError(f"input file not found: {name!r}")
    try:
        curve = sio.read_curve(name)
    except (ValueError, KeyError) as exc:
        raise ValidationError(f"cannot parse {name}: {exc}") from None
    if cfg["decimate"]:
        curve = decimate_midpoints(curve)
    cap = cfg["max_step_capacity"] or None
    path = _stage("zipper", extract_driving, curve, cap)
    if out.wants("csv"):
        out.write("driving.csv", sio.path_to_csv(path))
    if out.wants("json"):
        out.write("driving.json", sio.dump_json(sio.path_to_json(path)))
    if out.wants("svg"):
        out.write("driving.svg", Figure("driving function", "t", "W").line(path.times, path.values).render())
    summary = {"n_steps": len(path) - 1, "t_total": path.t_total}
    if cfg["reference"]:
        ref = _read_path(cfg["reference"])
        summary["round_trip_sup_error"] = float(np.max(np.abs(np.interp(ref.times, path.times, path.values) - ref.values)))
    return summary


def _check_radius(R: int, minimum: int):
    if R < minimum:
        raise ValidationError(f"R_lattice must be at least {minimum}, got {R}")


def cmd_gff(cfg: dict, out: Output, workers: int) -> dict:
    _check_radius(cfg["R_lattice"], MIN_LATTICE_RADIUS)
    ls = lambda_star(cfg["g"]) if cfg["g"] > 0 else None
    try:
        bc = BoundaryData(tuple((float(x), float(q) * ls) for x, q in cfg["jumps"]), cfg["g"])
    except (ValueError, TypeError) as exc:
        raise ValidationError(str(exc)) from None
    dom = LatticeDomain(cfg["R_lattice"])
    kappas = []
    for s in _stage("gff-lattice", lambda: list(sample_fields(dom, bc, cfg["seed"], cfg["n_samples"], noise=cfg["noise"]))):
        if out.wants("csv"):
            out.write(f"fields/field_{s.index:05d}.csv", sio.field_to_csv(s))
        if out.wants("json"):
            out.write(f"fields/field_{s.index:05d}.json", sio.dump_json(sio.field_header(s)))
        kappas.append(s.kappa_lat)
    return {"n_samples": cfg["n_samples"], "n_sites": dom.size, "kappa_lat": kappas[0] if kappas else None}


def cmd_levelline(cfg: dict, out: Output, workers: int) -> dict:
    _check_radius(cfg["R_lattice"], 2 * MIN_LATTICE_RADIUS)
    q = cfg["q"]
    lam = float(q) * lambda_star(cfg["g"])
    dom = LatticeDomain(cfg["R_lattice"])
    bc = BoundaryData(((0.0, lam),), cfg["g"])
    fig = Figure("level lines", "Re", "Im", equal_aspect=True)
    failures = []
    for s in _stage("gff-lattice", lambda: list(sample_fields(dom, bc, cfg["seed"], cfg["n_samples"], noise=cfg["noise"]))):
        try:
            line = extract_level_line(s)
            curve = line.as_curve
            path = extract_driving(decimate_midpoints(curve) if cfg["decimate"] else curve)
        except (ValueError, RuntimeError) as exc:
            failures.append({"index": s.index, "error": f"{type(exc).__name__}: {exc}"})
            continue
        if out.wants("csv"):
            out.write(f"lines/line_{s.index:05d}.csv", sio.level_line_to_csv(curve))
            out.write(f"lines/driving_{s.index:05d}.csv", sio.path_to_csv(path))
        if out.wants("json"):
            out.write(f"lines/driving_{s.index:05d}.json", sio.dump_json(sio.path_to_json(path)))
        if s.index < 10:
            fig.line(curve.real, curve.imag)
    if out.wants("svg") and fig._series:
        out.write("lines.svg", fig.render())
    return {"n_samples": cfg["n_samples"], "failures": failures}


def cmd_experiment(cfg: dict, out: Output, workers: int) -> dict:
    name = cfg["name"]
    common = dict(n_samples=cfg["n_samples"], seed=cfg["seed"], g=cfg["g"], workers=workers)
    try:
        if name == "levelline-kappa":
            rep = experiments.run_levelline_kappa_experiment(cfg["q"], cfg["R_lattice"], noise=cfg["noise"], **common)
        elif name == "drift-consistency":
            rep = experiments.run_drift_consistency_experiment(
                cfg["q"], cfg["spectators"], cfg["R_lattice"], length_unit=cfg["length_unit_lattice"] or None, **common
            )
        else:
            rep = experiments.run_jump_universality_experiment(
                cfg["q_list"], cfg["R_list"], probe_distance=cfg["probe_distance"], **common
            )
    except InsufficientEnsembleError as exc:
        raise RuntimeError(f"[estimators] {exc}") from exc
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    out.write("report.json", rep.to_json())
    if out.wants("svg"):
        est = rep.estimates
        if "variance_curve" in est:
            t = np.array(est["variance_curve"]["t"])
            fig = Figure("variance of W_t", "t", "Var W").scatter(t, est["variance_curve"]["var"], "measured")
            fig.line(t, est["kappa_hat"] * t, "fit").line(t, 4 * t, "kappa = 4", dashed=True)
            out.write("variance.svg", fig.render())
        elif "drift_curve" in est:
            dc = est["drift_curve"]
            fig = Figure("drift rate", "t", "dW/dt").scatter(dc["times"], dc["rate"], "measured", dc["stderr"])
            fig.line([dc["window"][0], dc["window"][1]], [est["predicted_drift"]] * 2, "predicted", dashed=True)
            out.write("drift.svg", fig.render())
        else:
            fig = Figure("jump profile", "probe distance", "jump / 2 pi")
            for row in est["rows"]:
                ds = sorted(row["profile"])
                fig.scatter(ds, [row["profile"][d]["mean"] for d in ds], f"q={row['q']} R={row['R']}",
                            [row["profile"][d]["stderr"] for d in ds])
            out.write("jump_profile.svg", fig.render())
    if not rep.passed:
        raise CheckFailed(f"experiment {name} failed a non-exploratory check")
    return {"pass": rep.passed, "exploratory": rep.exploratory}


def cmd_cft_check(cfg: dict, out: Output, workers: int) -> dict:
    ident = cfg["identity"]
    try:
        alpha = rational(cfg["alpha"]) if cfg["alpha"] else None
        if ident == "suite":
            results = cft.run_suite(cfg["seed"])
            ok = cft.suite_ok(results)
        else:
            if ident == "m2":
                res = cft.check_m2_identity(cfg["q"], cfg["k"], alpha)
            elif ident == "perturbed":
                res = cft.check_perturbed_identity(cfg["q"], cfg["s"])
            else:
                spect = cfg["spectators"]
                ccfg = cft.ChargeConfig((cfg["q_i"],) + tuple(q for _, q in spect), (Fraction(0),) + tuple(x for x, _ in spect))
                if ident == "deformed-null":
                    res = cft.check_deformed_null_on_correlator(ccfg, 0, cfg["n_points"], cfg["seed"])
                else:
                    res = cft.check_routes_agree(ccfg, 0, alpha, cfg["n_points"], cfg["seed"])
            results = [res]
            ok = res.passed or res.exploratory
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(str(exc)) from None
    out.write("cft_report.json", sio.dump_json({"schema": "cft_report", "schema_version": 1, "pass": ok,
                                                "checks": [r.to_dict() for r in results]}))
    if not ok:
        raise CheckFailed(f"cft check {ident} failed")
    return {"pass": ok, "n_checks": len(results)}


COMMANDS = {
    "sle-sample": cmd_sle_sample,
    "trace": cmd_trace,
    "zip": cmd_zip,
    "gff": cmd_gff,
    "levelline": cmd_levelline,
    "experiment": cmd_experiment,
    "cft-check": cmd_cft_check,
}


# ---------------------------------------------------------------- driver


def _formats(text: str | None, command: str) -> set[str]:
    allowed = FORMATS[command]
    if text is None:
        return set(allowed)
    req = {f.strip() for f in text.split(",") if f.strip()}
    bad = req - allowed
    if bad:
        raise ValidationError(f"{command} does not support format(s) {sorted(bad)}; choose from {sorted(allowed)}")
    return req


def run(command: str, raw: dict[str, str], out_dir: Path, formats: str | None, workers: int) -> int:
    cfg = resolve(command, raw)
    fmts = _formats(formats, command)
    out = Output(out_dir, fmts)
    status, summary, error = EXIT_OK, None, None
    try:
        summary = COMMANDS[command](cfg, out, workers)
    except CheckFailed as exc:
        status, error = EXIT_CHECK, str(exc)
    manifest = {
        "schema": "run_manifest",
        "schema_version": 1,
        "command": command,
        "config": _encoded(cfg),
        "formats": sorted(fmts),
        "version": experiments.VERSION,
        "config_hash": experiments.config_hash({"command": command, **_encoded(cfg)}),
        "outputs": dict(sorted(out.files.items())),
        "summary": summary,
        "status": status,
        "error": error,
    }
    (out_dir / "manifest.json").write_text(sio.dump_json(manifest))
    if error:
        print(error, file=sys.stderr)
    return status


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slerho", description="Loewner chains, lattice level lines and exact CFT checks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        keys = ", ".join(sorted({**COMMON, **SCHEMAS[name]}))
        sp = sub.add_parser(name, help=f"keys: {keys}", description=f"Config keys: {keys}")
        sp.add_argument("params", nargs="*", metavar="key=value")
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--formats", help=f"comma list from {sorted(FORMATS[name])}")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    rp = sub.add_parser("replay", help="re-run a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out")
    rp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    return p


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "replay":
            try:
                man = json.loads(Path(args.manifest).read_text())
                command, raw, fmts = man["command"], man["config"], ",".join(man["formats"])
            except (OSError, ValueError, KeyError) as exc:
                raise ValidationError(f"cannot read manifest {args.manifest}: {exc}") from None
            return run(command, raw, _out_dir(args.out), fmts, args.workers)
        raw: dict[str, str] = {}
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                raise ValidationError(str(exc)) from None
            raw.update(parse_config_text(text, args.config))
        for item in args.params:
            if "=" not in item:
                raise ValidationError(f"expected key=value, got {item!r}")
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        if args.workers < 1:
            raise ValidationError("--workers must be at least 1")
        return run(args.command, raw, _out_dir(args.out), args.formats, args.workers)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
