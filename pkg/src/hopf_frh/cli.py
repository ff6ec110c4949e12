"""Command-line front end.

    hopf-frh classify   [--config FILE] --mu 2,2
    hopf-frh scan       [--config FILE] --axes mu1,mu2 --window 0,6,-8,2 --res 400,400
    hopf-frh degenerate [--config FILE] --guess 3.8,-4.2
    hopf-frh simulate   [--config FILE] --mu 1.6,0 --x0 0.1,0.1,0.1 --T 200 --h 0.05
    hopf-frh selftest

Configs are INI files with [system], [command], [output] and optional
[tolerances] sections, or a JSON sidecar written by an earlier run.
Exit codes: 0 success / Stable, 2 HopfCandidate, 3 Indeterminate, 1 error.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, exprdsl
from .bifurcate import ParamSystem, find_degenerate, grid_scan
from .errors import HopfError
from .fdesim import SimConfig, integrate, oscillation_metric
from .frh import TolerancePolicy, Verdict, critical_roots, minors_of
from .frh import verdict_from_minors
from .polycore import roots, sector_classify

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CANDIDATE = 2
EXIT_INDETERMINATE = 3
BUILTINS = ("hopfield3",)
SUBCOMMANDS = ("classify", "scan", "degenerate", "simulate", "selftest")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Shortest decimal that parses back to the same double."""
    return repr(float(x))


def fmt_vec(xs) -> str:
    return ",".join(fmt(x) for x in xs)


def parse_floats(text: str, what: str, count: Optional[int] = None) -> tuple:
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [s for s in str(text).replace(" ", "").split(",") if s != ""]
    try:
        vals = tuple(float(s) for s in items)
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{what}: values must be finite, got {text!r}")
    if count is not None and len(vals) != count:
        raise UsageError(f"{what}: expected {count} values, got {len(vals)}")
    return vals


# --- configuration ---------------------------------------------------------

def _lower_keys(section) -> dict:
    return {str(k).strip(): str(v).strip() for k, v in section.items()}


def load_config(path: Optional[str]) -> dict:
    """Read an INI config or a JSON sidecar into plain section dicts."""
    if path is None:
        return {"system": {}, "command": {}, "output": {}, "tolerances": {}}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
            cmd = dict(data["command"])
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"{path}: not a valid sidecar ({exc})") from None
        system = cmd.pop("system", {})
        output = cmd.pop("output", {})
        return {"system": _lower_keys(system), "command": _lower_keys(cmd),
                "output": _lower_keys(output), "tolerances": _lower_keys(data.get("tolerances", {}))}
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    unknown = set(cp.sections()) - {"system", "command", "output", "tolerances"}
    if unknown:
        raise UsageError(f"{path}: unknown section(s) {sorted(unknown)}")
    return {name: _lower_keys(cp[name]) if cp.has_section(name) else {}
            for name in ("system", "command", "output", "tolerances")}


def build_system(section: dict) -> ParamSystem:
    """Either ``builtin = hopfield3`` (+ k / alpha overrides) or degree/params/a1..an."""
    section = dict(section)
    builtin = section.pop("builtin", None)
    has_expr = "degree" in section or any(k.startswith("a") and k[1:].isdigit() for k in section)
    if builtin is not None and has_expr:
        raise UsageError("[system] must define either builtin or expressions, not both")
    alpha = section.pop("alpha", None)
    try:
        alpha = None if alpha is None else float(alpha)
    except ValueError:
        raise UsageError(f"alpha must be a number, got {alpha!r}") from None
    if builtin is not None or not has_expr:
        name = builtin or "hopfield3"
        if name not in BUILTINS:
            raise UsageError(f"unknown builtin system {name!r}; known: {', '.join(BUILTINS)}")
        k = {key: float(parse_floats(v, key, 1)[0]) for key, v in section.items()}
        return ParamSystem.demo(k, 1.1 if alpha is None else alpha)
    if alpha is None:
        raise UsageError("[system] alpha is required for expression systems")
    try:
        n = int(section.pop("degree"))
    except KeyError:
        raise UsageError("[system] degree is required for expression systems") from None
    except ValueError:
        raise UsageError("[system] degree must be an integer") from None
    params = tuple(p for p in section.pop("params", "").replace(" ", "").split(",") if p)
    sources = []
    for i in range(1, n + 1):
        try:
            sources.append(section.pop(f"a{i}"))
        except KeyError:
            raise UsageError(f"[system] missing coefficient a{i}") from None
    constants = {}
    for key, v in section.items():
        if key.startswith("a") and key[1:].isdigit():
            raise UsageError(f"[system] {key} exceeds degree {n}")
        constants[key] = parse_floats(v, key, 1)[0]
    return ParamSystem.from_expressions(sources, params, alpha, constants)


def system_section(sys_: ParamSystem) -> dict:
    if sys_.label == "hopfield3":
        out = {"builtin": "hopfield3", "alpha": fmt(sys_.alpha)}
        out.update({k: fmt(v) for k, v in sorted(sys_.constants.items())})
        return out
    out = {"degree": str(sys_.n), "params": ",".join(sys_.params), "alpha": fmt(sys_.alpha)}
    for i, src in enumerate(sys_.sources, start=1):
        out[f"a{i}"] = src
    out.update({k: fmt(v) for k, v in sorted(sys_.constants.items())})
    return out


def build_tolerances(section: dict) -> TolerancePolicy:
    if "rel" not in section:
        return TolerancePolicy()
    rel = parse_floats(section["rel"], "tolerances.rel", 1)[0]
    if not rel > 0:
        raise UsageError("tolerances.rel must be positive")
    return TolerancePolicy(rel)


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_sidecar(path: Path, system: dict, command: dict, output: dict, tol: TolerancePolicy) -> Path:
    cmd = dict(command)
    cmd["system"] = system
    cmd["output"] = output
    tolerances = {"rel": fmt(tol.rel)}
    doc = {
        "config_hash": config_hash({"command": cmd, "tolerances": tolerances}),
        "tolerances": tolerances,
        "version": __version__,
        "command": cmd,
    }
    target = sidecar_path(path)
    with open(target, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return target


def write_text(path: Optional[Path], text: str, stdout) -> None:
    if path is None:
        stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def json_rows(header, rows) -> str:
    return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"


# --- argument handling -----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hopf-frh", description="Hopf bifurcation criterion for fractional-order systems")
    p.add_argument("--version", action="version", version=f"hopf-frh {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="INI config or JSON sidecar")
        sp.add_argument("--alpha", type=float, help="override the fractional order")
        sp.add_argument("--out", help="output path; '-' or omitted for stdout")
        sp.add_argument("--format", choices=("csv", "json"), help="output format")

    sp = sub.add_parser("classify", help="evaluate the criterion at one parameter point")
    common(sp)
    sp.add_argument("--mu", help="parameter values, comma separated")

    sp = sub.add_parser("scan", help="map the bifurcation curve over a 2-d window")
    common(sp)
    sp.add_argument("--axes")
    sp.add_argument("--window", help="x0,x1,y0,y1")
    sp.add_argument("--res", help="m1,m2")
    sp.add_argument("--fixed", help="values of the remaining parameters, name=value,...")

    sp = sub.add_parser("degenerate", help="Newton search for a stationary point of the top minor")
    common(sp)
    sp.add_argument("--guess")

    sp = sub.add_parser("simulate", help="integrate the builtin network")
    common(sp)
    sp.add_argument("--mu")
    sp.add_argument("--x0")
    sp.add_argument("--v0")
    sp.add_argument("--T", dest="T")
    sp.add_argument("--h", dest="h")
    sp.add_argument("--tail", help="tail fraction for the oscillation metric (default 0.25)")

    sub.add_parser("selftest", help="run the built-in property checks")
    return p


def _option(args, command: dict, name: str, default=None):
    val = getattr(args, name, None)
    if val is not None:
        return val
    return command.get(name, default)


class _Run:
    """Resolved configuration shared by the subcommands."""

    def __init__(self, args):
        cfg = load_config(args.config)
        self.cfg = cfg
        system = dict(cfg["system"])
        if args.alpha is not None:
            system["alpha"] = fmt(args.alpha)
        self.system = build_system(system)
        self.tol = build_tolerances(cfg["tolerances"])
        command = dict(cfg["command"])
        name = command.pop("name", args.subcommand)
        if name != args.subcommand:
            log.info("config was written for %r; running %r", name, args.subcommand)
        self.command = command
        out = _option(args, {}, "out") or cfg["output"].get("path")
        self.out = Path(out) if out and out != "-" else None
        self.format = _option(args, {}, "format") or cfg["output"].get("format", "csv")
        if self.format not in ("csv", "json"):
            raise UsageError(f"output format must be csv or json, got {self.format!r}")

    def mu(self, text):
        if text is None:
            if self.system.params:
                raise UsageError(f"--mu is required ({','.join(self.system.params)})")
            return ()
        return parse_floats(text, "--mu", len(self.system.params))

    def output_section(self):
        return {"path": str(self.out) if self.out else "", "format": self.format}

    def finish(self, text, command: dict, stdout):
        write_text(self.out, text, stdout)
        if self.out is not None:
            write_sidecar(self.out, system_section(self.system), command,
                          self.output_section(), self.tol)


def cmd_classify(args, stdout, stderr) -> int:
    run = _Run(args)
    sys_ = run.system
    mu = run.mu(_option(args, run.command, "mu"))
    p = sys_.charpoly(mu) if sys_.params else sys_.charpoly(())
    ms = minors_of(p, sys_.alpha)
    verdict = verdict_from_minors(ms, sys_.alpha, run.tol)
    rts = roots(p)
    sector = sector_classify(rts, sys_.alpha)
    edge = sys_.alpha * math.pi / 2.0

    report = {
        "system": sys_.label,
        "alpha": sys_.alpha,
        "mu": dict(zip(sys_.params, mu)),
        "coefficients": list(p.coeffs),
        "nabla": list(ms.nabla),
        "nabla_tilde": ms.nabla_tilde,
        "verdict": verdict.tag.value,
        "signs": list(verdict.details),
        "r0": verdict.r0,
        "critical_roots": None,
        "oracle_roots": [],
        "oracle_sectors": {"stable": sector.n_stable, "critical": sector.n_critical,
                           "unstable": sector.n_unstable, "zero": sector.n_zero},
    }
    lines = [f"system: {sys_.label}  alpha = {fmt(sys_.alpha)}"]
    if sys_.params:
        lines.append("mu: " + "  ".join(f"{k} = {fmt(v)}" for k, v in zip(sys_.params, mu)))
    lines += [f"a{i} = {fmt(a)}" for i, a in enumerate(p.coeffs, start=1)]
    lines += [f"nabla{i} = {fmt(v)}" for i, v in enumerate(ms.nabla, start=1)]
    lines.append(f"nabla_tilde = {fmt(ms.nabla_tilde)}")
    lines.append(f"verdict: {verdict.tag.value}")
    if verdict.tag is Verdict.HOPF_CANDIDATE:
        pair = critical_roots(verdict, sys_.alpha)
        report["critical_roots"] = [[r.re, r.im] for r in pair]
        lines.append(f"r0 = {fmt(verdict.r0)}")
        lines += [f"critical root: {fmt(r.re)} {fmt(r.im)}j" for r in pair]
    lines.append("oracle roots (re, im, modulus, argument, sector):")
    for r in rts:
        gap = abs(r.argument) - edge
        where = "zero" if r.modulus < 1e-10 else ("critical" if abs(gap) <= 1e-7 else
                                                   ("stable" if gap > 0 else "unstable"))
        report["oracle_roots"].append({"re": r.re, "im": r.im, "modulus": r.modulus,
                                       "argument": r.argument, "sector": where})
        lines.append(f"  {fmt(r.re)} {fmt(r.im)} {fmt(r.modulus)} {fmt(r.argument)} {where}")
    text = json.dumps(report, indent=2) + "\n" if run.format == "json" else "\n".join(lines) + "\n"
    command = {"name": "classify", "mu": fmt_vec(mu)}
    run.finish(text, command, stdout)
    return {Verdict.STABLE: EXIT_OK, Verdict.HOPF_CANDIDATE: EXIT_CANDIDATE,
            Verdict.INDETERMINATE: EXIT_INDETERMINATE}[verdict.tag]


def _parse_fixed(text) -> dict:
    out = {}
    if not text:
        return out
    for item in str(text).replace(" ", "").split(","):
        if not item:
            continue
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--fixed: expected name=value, got {item!r}")
        out[name] = parse_floats(value, f"--fixed {name}", 1)[0]
    return out


def cmd_scan(args, stdout, stderr) -> int:
    run = _Run(args)
    sys_ = run.system
    axes_text = _option(args, run.command, "axes") or ",".join(sys_.params[:2])
    axes = tuple(a for a in axes_text.replace(" ", "").split(",") if a)
    if len(axes) != 2:
        raise UsageError(f"--axes needs two names, got {axes_text!r}")
    window = _option(args, run.command, "window")
    if window is None:
        raise UsageError("--window x0,x1,y0,y1 is required")
    window = parse_floats(window, "--window", 4)
    if not (window[0] < window[1] and window[2] < window[3]):
        raise UsageError(f"--window must satisfy x0 < x1 and y0 < y1, got {fmt_vec(window)}")
    res_text = _option(args, run.command, "res", "400,400")
    res = parse_floats(res_text, "--res", 2)
    if not all(r == int(r) and r >= 2 for r in res):
        raise UsageError(f"--res needs two integers >= 2, got {res_text!r}")
    res = tuple(int(r) for r in res)
    fixed = _parse_fixed(_option(args, run.command, "fixed"))

    result = grid_scan(sys_, axes, window, res, fixed, run.tol)
    header = [axes[0], axes[1], "r0", "transversal"]
    rows = []
    for bp in result.points:
        d = bp.mu_star.as_dict()
        rows.append([fmt(d[axes[0]]), fmt(d[axes[1]]), fmt(bp.r0),
                     "1" if bp.transversality.value == "Transversal" else "0"])
    text = csv_text(header, rows) if run.format == "csv" else json_rows(header, rows)
    command = {"name": "scan", "axes": ",".join(axes), "window": fmt_vec(window),
               "res": f"{res[0]},{res[1]}"}
    if fixed:
        command["fixed"] = ",".join(f"{k}={fmt(v)}" for k, v in sorted(fixed.items()))
    run.finish(text, command, stdout)
    stderr.write(f"{len(result.points)} point(s), {len(result.rejected)} rejected edge(s)\n")
    return EXIT_OK


def cmd_degenerate(args, stdout, stderr) -> int:
    run = _Run(args)
    sys_ = run.system
    guess = _option(args, run.command, "guess")
    if guess is None:
        raise UsageError("--guess is required")
    guess = parse_floats(guess, "--guess", len(sys_.params))
    bp = find_degenerate(sys_, guess, run.tol)
    report = {
        "mu0": bp.mu_star.as_dict(),
        "nabla_n": bp.minors.nabla[-1],
        "gradient": list(bp.gradient),
        "hessian_eigenvalues": None if bp.eigenvalues is None else list(bp.eigenvalues),
        "hessian_verdict": None if bp.hessian_verdict is None else bp.hessian_verdict.value,
        "transversality": bp.transversality.value,
        "r0": bp.r0,
    }
    if run.format == "json":
        text = json.dumps(report, indent=2) + "\n"
    else:
        lines = ["mu0: " + "  ".join(f"{k} = {fmt(v)}" for k, v in bp.mu_star.as_dict().items()),
                 f"nabla{sys_.n} = {fmt(bp.minors.nabla[-1])}",
                 "gradient: " + fmt_vec(bp.gradient)]
        if bp.eigenvalues is not None:
            lines.append("hessian eigenvalues: " + fmt_vec(bp.eigenvalues))
        lines.append("hessian verdict: " + (bp.hessian_verdict.value if bp.hessian_verdict else "n/a"))
        lines.append("transversality: " + bp.transversality.value)
        lines.append("r0 = " + ("undefined" if bp.r0 is None else fmt(bp.r0)))
        text = "\n".join(lines) + "\n"
    run.finish(text, {"name": "degenerate", "guess": fmt_vec(guess)}, stdout)
    return EXIT_OK


def cmd_simulate(args, stdout, stderr) -> int:
    run = _Run(args)
    sys_ = run.system
    if sys_.label != "hopfield3":
        raise UsageError("simulate needs the builtin system; expression systems have no vector field")
    c = run.command
    mu = run.mu(_option(args, c, "mu"))
    x0 = parse_floats(_option(args, c, "x0", "0.1,0.1,0.1"), "--x0", 3)
    v0_text = _option(args, c, "v0")
    v0 = None if v0_text is None else parse_floats(v0_text, "--v0", 3)
    T = parse_floats(_option(args, c, "T", "200"), "--T", 1)[0]
    h = parse_floats(_option(args, c, "h", "0.05"), "--h", 1)[0]
    tail = parse_floats(_option(args, c, "tail", "0.25"), "--tail", 1)[0]
    model = exprdsl.DemoSystem(dict(sys_.constants), sys_.alpha)
    cfg = SimConfig(sys_.alpha, model.vector_field(mu), x0, T, h, v0, model, mu)
    tr = integrate(cfg)
    header = ["t", "x1", "x2", "x3"]
    rows = [[fmt(t)] + [fmt(v) for v in x] for t, x in zip(tr.times, tr.states)]
    text = csv_text(header, rows) if run.format == "csv" else json_rows(header, rows)
    command = {"name": "simulate", "mu": fmt_vec(mu), "x0": fmt_vec(x0), "T": fmt(T), "h": fmt(h),
               "tail": fmt(tail)}
    if v0 is not None:
        command["v0"] = fmt_vec(v0)
    run.finish(text, command, stdout)
    summary = stdout if run.out is not None else stderr
    if tr.blowup is not None:
        stderr.write(f"blowup: non-finite state at step {tr.blowup}; trajectory truncated\n")
    metric = oscillation_metric(tr, tail)
    summary.write(f"oscillation_metric = {fmt(metric)}\n")
    summary.write(f"final_norm = {fmt(tr.norms[-1])}\n")
    return EXIT_OK


def cmd_selftest(args, stdout, stderr) -> int:
    from .selftest import run_all

    return EXIT_OK if run_all(stdout) else EXIT_ERROR


HANDLERS = {
    "classify": cmd_classify,
    "scan": cmd_scan,
    "degenerate": cmd_degenerate,
    "simulate": cmd_simulate,
    "selftest": cmd_selftest,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = make_parser().parse_args(argv)
    except UsageError as exc:
        stderr.write(f"hopf-frh: error: {exc}\n")
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=stderr)
    if args.subcommand is None:
        make_parser().print_help(stderr)
        return EXIT_ERROR
    try:
        with np.errstate(all="ignore"):
            return HANDLERS[args.subcommand](args, stdout, stderr)
    except (UsageError, HopfError, ValueError, KeyError, OSError) as exc:
        name = type(exc).__name__
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        stderr.write(f"hopf-frh: {name}: {msg}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
