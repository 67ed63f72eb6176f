"""Command line front end.

Exit status: 0 on success, 2 for invalid input, 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import curve as curve_mod
from . import henon, morse, problems
from .errors import NumericalError, PreconditionError
from .problems import Family, ProblemSpec
from .serialize import atomic_write, csv_text, dumps, to_dict

CURVE_COLUMNS = ["t", "lambda", "u0", "indicator"]
TURN_COLUMNS = ["t_n", "lambda_n", "u0_n", "lambda_pp", "direction"]
HENON_COLUMNS = ["xi", "a", "neg_b"]
MORSE_COLUMNS = ["t_b", "u0", "zero_count"]

# commands whose natural output is a table
TABULAR = {"trace", "turns", "morse", "henon"}


def _add_problem_args(p: argparse.ArgumentParser, family_required: bool = True) -> None:
    p.add_argument("--family", choices=[f.value for f in Family if f is not Family.HENON],
                   required=family_required)
    p.add_argument("--n", type=int, default=3, help="space dimension")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--p", type=float, default=2.0, help="exponent (power and MEMS families)")
    p.add_argument("--t-max", type=float, default=1e6)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--abs-tol", type=float, default=1e-12)


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.add_argument("--emit-config", action="store_true", help="print the resolved config and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gencurve",
        description="Solution curves, turning points and Morse indices of radial "
        "Dirichlet problems, and Henon symmetry breaking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="sample the solution curve (lambda, u(0))")
    _add_problem_args(p)
    p.add_argument("--samples", type=int, default=200, help="samples per decade of t")
    _add_output_args(p)

    p = sub.add_parser("turns", help="refined turning points and guide crossings")
    _add_problem_args(p)
    _add_output_args(p)

    p = sub.add_parser("morse", help="Morse index along the curve")
    _add_problem_args(p)
    p.add_argument("--probes", type=int, default=3, help="probes per arc")
    _add_output_args(p)

    p = sub.add_parser("regime", help="classify the turning regime")
    _add_problem_args(p)
    _add_output_args(p)

    p = sub.add_parser("check44", help="exponential family inequality check at t0 = sqrt(2n-4)")
    p.add_argument("--n", type=int, required=True)
    _add_output_args(p)

    p = sub.add_parser("henon", help="scan a(xi) + b(xi) and build the three solutions")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--scan", default="0.001:5:2000", help="lo:hi:count")
    p.add_argument("--lambda", dest="lambda_target", type=float, default=None)
    _add_output_args(p)

    p = sub.add_parser("lambda-bound", help="check sup lambda <= (n-2)(alpha+2)")
    _add_problem_args(p)
    p.add_argument("--samples", type=int, default=200)
    _add_output_args(p)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    cfg.pop("emit_config", None)
    if cfg["format"] is None:
        cfg["format"] = "csv" if args.command in TABULAR else "json"
    if cfg["format"] == "csv" and args.command not in TABULAR:
        raise PreconditionError(f"{args.command} only writes json")
    if args.command == "henon":
        lo, hi, count = _parse_scan(args.scan)
        cfg["scan"] = {"lo": lo, "hi": hi, "count": count}
    return cfg


def _parse_scan(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, count = text.split(":")
        return float(lo), float(hi), int(count)
    except ValueError:
        raise PreconditionError(f"--scan expects lo:hi:count, got {text!r}") from None


def _spec(cfg: dict) -> ProblemSpec:
    return ProblemSpec(
        Family(cfg["family"]),
        n=cfg["n"],
        alpha=cfg["alpha"],
        p=cfg["p"],
        t_max=cfg["t_max"],
        rel_tol=cfg["rel_tol"],
        abs_tol=cfg["abs_tol"],
    )


def _emit(cfg: dict, text: str, out=None) -> None:
    path = cfg.get("out")
    if path is None:
        (out or sys.stdout).write(text)
    else:
        atomic_write(path, text)


def _sidecar(cfg: dict, suffix: str) -> Path | None:
    if cfg.get("out") is None:
        return None
    path = Path(cfg["out"])
    return path.with_name(path.stem + suffix)


def _turn_rows(turns):
    return [
        (tp.t_n, tp.lambda_n, tp.u0_n, tp.second_derivative, tp.direction.value) for tp in turns
    ]


def cmd_trace(cfg: dict) -> str:
    spec = _spec(cfg)
    c = curve_mod.trace(spec, spec.t_max, cfg["samples"])
    turns = {"turns": c.turns, "guiding_crossings": c.guiding_crossings,
             "lambda_star": c.lambda_star}
    if cfg["format"] == "json":
        _emit(cfg, dumps({"curve": c}))
    else:
        rows = zip(c.t, c.lam, c.u0, c.indicator)
        _emit(cfg, csv_text(CURVE_COLUMNS, rows))
        side = _sidecar(cfg, ".turns.json")
        if side is not None:
            atomic_write(side, dumps(turns))
    return f"{len(c.t)} points, {len(c.turns)} turns, {len(c.guiding_crossings)} guide crossings"


def cmd_turns(cfg: dict) -> str:
    spec = _spec(cfg)
    c = curve_mod.trace(spec, spec.t_max)
    counts = None
    if c.lambda_star is not None:
        counts = curve_mod.count_turns_and_crossings(c)
    if cfg["format"] == "json":
        _emit(cfg, dumps({"turns": c.turns, "guiding_crossings": c.guiding_crossings,
                          "lambda_star": c.lambda_star, "turn_count": len(c.turns),
                          "crossing_count": None if counts is None else counts[1]}))
    else:
        _emit(cfg, csv_text(TURN_COLUMNS, _turn_rows(c.turns)))
    return f"{len(c.turns)} turns" + ("" if counts is None else f", {counts[1]} guide crossings")


def cmd_morse(cfg: dict) -> str:
    spec = _spec(cfg)
    c = curve_mod.trace(spec, spec.t_max)
    prof = morse.morse_profile(spec, c, cfg["probes"])
    if cfg["format"] == "json":
        turn_reports = [morse.turning_report(c, k) for k in range(len(c.turns))]
        _emit(cfg, dumps({"profile": prof, "turn_reports": turn_reports}))
    else:
        rows = [(r.t_b, r.u0, r.zero_count) for r in prof.reports]
        _emit(cfg, csv_text(MORSE_COLUMNS, rows))
    if not prof.consistent:
        raise NumericalError(f"Morse indices {list(prof.arc_indices)} do not step by one per turn")
    return f"arc indices {prof.ladder}"


def cmd_regime(cfg: dict) -> str:
    spec = _spec(cfg)
    regime = problems.classify_regime(spec)
    roots = problems.euler_roots(spec)
    payload = {
        "family": spec.family.value,
        "n": spec.n,
        "alpha": spec.alpha,
        "p": spec.p,
        "regime": regime.value,
        "threshold": problems.regime_threshold(spec),
        "lambda_star": problems.lambda_star(spec),
        "guiding_solution": problems.guiding_solution(spec),
        "euler_roots": {
            "plus": [roots.root_plus.real, roots.root_plus.imag],
            "minus": [roots.root_minus.real, roots.root_minus.imag],
            "discriminant": roots.discriminant,
            "oscillatory": roots.oscillatory,
        },
    }
    _emit(cfg, dumps(payload))
    return regime.value


def cmd_check44(cfg: dict) -> str:
    res = curve_mod.check_inequality_44(cfg["n"])
    _emit(cfg, dumps(to_dict(res)))
    return f"lhs={res.lhs!r} rhs={res.rhs!r} holds={res.holds}"


def cmd_henon(cfg: dict) -> str:
    scan = cfg["scan"]
    sc = henon.find_xi0(cfg["alpha"], cfg["p"], scan["lo"], scan["hi"], scan["count"])
    builds = [
        henon.build_solutions(r.xi0, cfg["alpha"], cfg["p"], cfg["lambda_target"])
        for r in sc.roots
    ]
    summary = {
        "alpha": cfg["alpha"],
        "p": cfg["p"],
        "window": [scan["lo"], scan["hi"]],
        "count": scan["count"],
        "roots": sc.roots,
        "unique_on_window": sc.unique,
        "solutions": [
            {
                "xi0": b.xi0,
                "eta": b.eta,
                "lambda": b.lam,
                "max_value": b.max_value,
                "interior_max_location": b.interior_max_location,
                "residuals": b.residuals,
            }
            for b in builds
        ],
    }
    if cfg["format"] == "json":
        _emit(cfg, dumps({**summary, "xi": sc.xi, "a": sc.a, "neg_b": -sc.b}))
    else:
        _emit(cfg, csv_text(HENON_COLUMNS, zip(sc.xi, sc.a, -sc.b)))
        side = _sidecar(cfg, ".roots.json")
        if side is not None:
            atomic_write(side, dumps(summary))
    where = ", ".join(f"{r.xi0:.12g}" for r in sc.roots) or "none"
    return f"{len(sc.roots)} crossing(s) of a and -b on the window: {where}"


def cmd_lambda_bound(cfg: dict) -> str:
    spec = _spec(cfg)
    if spec.family is not Family.GELFAND_EXP or spec.n < 10 + 4 * spec.alpha:
        raise PreconditionError("lambda-bound applies to gelfand-exp with n >= 10 + 4 alpha")
    c = curve_mod.trace(spec, spec.t_max, cfg["samples"])
    holds = curve_mod.lambda_bound_check(spec, c)
    bound = (spec.n - 2.0) * (spec.alpha + 2.0)
    _emit(cfg, dumps({"holds": holds, "max_lambda": float(np.max(c.lam)), "bound": bound}))
    return f"max lambda {float(np.max(c.lam))!r} vs bound {bound!r}: holds={holds}"


COMMANDS = {
    "trace": cmd_trace,
    "turns": cmd_turns,
    "morse": cmd_morse,
    "regime": cmd_regime,
    "check44": cmd_check44,
    "henon": cmd_henon,
    "lambda-bound": cmd_lambda_bound,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        if args.emit_config:
            sys.stdout.write(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
            return 0
        message = COMMANDS[args.command](cfg)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if cfg.get("out") is not None:
        print(message)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
