"""Command line front end.

Every command prints one canonical JSON document (sorted keys) that embeds
the run configuration.  Exit codes: 0 ok, 2 parse/argument, 3 regime,
4 precision, 5 validation.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from . import __version__
from .errors import (IndeterminateRankError, InvalidArgumentError, ParseError, PrecisionError,
                     RobbaError, ValidationError)
from .herr import (DEFAULT_HERR_PREC, build_herr_phi_gamma, build_psi_complexes, character_specialize,
                   cohomology, default_tol, ladder, stabilization_experiment)
from .laurent import (DEFAULT_BUDGET, Box, LaurentBoxSeries, MultiInterval, compactness_profile,
                      parse_box, parse_interval, parse_radii)
from .modules import (PhiGammaModule, module_from_character, parse_character, triangulation_probe,
                      validate_module)
from .operators import apply_op, parse_operator, psi0_decompose, psi0_recombine
from .padic import INF, check_prime, parse_rational
from .residue import exact_form_residue_check, pairing, perfectness_gram_check, residue


def _s(x) -> str:
    if x == INF:
        return "inf"
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass
class RunConfig:
    prime: int
    vars: List[str]
    box: Optional[str]
    interval: Optional[str]
    radius: Optional[str]
    prec: int
    budget: int
    tol: Optional[str]
    ladder: Optional[List[int]]
    seed: int
    command: str

    def to_json(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# inputs


def _read_json(path: Optional[str]):
    try:
        if path is None or path == "-":
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc


def parse_series_expr(text: str, p: int, vars: Sequence[str]) -> LaurentBoxSeries:
    """Exact series from an arithmetic expression such as ``3*T1 + T2^2 - T1^-1/2``."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"bad expression {text!r}") from exc
    idx = {v: i for i, v in enumerate(vars)}
    n = len(vars)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return Fraction(node.value)
        if isinstance(node, ast.Name):
            if node.id not in idx:
                raise ParseError(f"unknown variable {node.id!r}")
            e = [0] * n
            e[idx[node.id]] = 1
            return {tuple(e): Fraction(1)}
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            x = ev(node.operand)
            return _neg(x) if isinstance(node.op, ast.USub) else x
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return _add(a, b)
            if isinstance(node.op, ast.Sub):
                return _add(a, _neg(b))
            if isinstance(node.op, ast.Mult):
                return _mul(a, b)
            if isinstance(node.op, ast.Div):
                if not isinstance(b, Fraction) or b == 0:
                    raise ParseError("division only by nonzero numbers")
                return _mul(a, 1 / b)
            if isinstance(node.op, ast.Pow):
                if not isinstance(b, Fraction) or b.denominator != 1:
                    raise ParseError("exponents must be integers")
                k = int(b)
                if isinstance(a, dict) and len(a) == 1 and list(a.values())[0] == 1:
                    (e,) = a
                    return {tuple(x * k for x in e): Fraction(1)}
                if k < 0:
                    if isinstance(a, Fraction) and a:
                        return a ** k
                    raise ParseError("negative powers only of monomials")
                out = {(0,) * n: Fraction(1)}
                for _ in range(k):
                    out = _mul(out, a)
                return out
        raise ParseError(f"unsupported expression element in {text!r}")

    res = ev(tree)
    if isinstance(res, Fraction):
        res = {(0,) * n: res}
    return LaurentBoxSeries.from_terms(p, vars, {e: c for e, c in res.items() if c})


def _as_dict(x, n):
    return {(0,) * n: x} if isinstance(x, Fraction) else x


def _add(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    n = len(next(iter(a if isinstance(a, dict) else b)))
    a, b = _as_dict(a, n), _as_dict(b, n)
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0) + c
    return out


def _neg(a):
    return -a if isinstance(a, Fraction) else {e: -c for e, c in a.items()}


def _mul(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    if isinstance(a, Fraction):
        return {e: a * c for e, c in b.items()}
    if isinstance(b, Fraction):
        return {e: b * c for e, c in a.items()}
    out = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            e = tuple(x + y for x, y in zip(e1, e2))
            out[e] = out.get(e, 0) + c1 * c2
    return out


def _vars(args) -> List[str]:
    v = args.vars
    if v.isdigit():
        return [f"T{i + 1}" for i in range(int(v))]
    return [x.strip() for x in v.split(",") if x.strip()]


def _series(args, which: str = "input") -> LaurentBoxSeries:
    expr = getattr(args, "expr", None) if which == "input" else getattr(args, "expr2", None)
    path = getattr(args, which, None)
    vars = _vars(args)
    if expr:
        f = parse_series_expr(expr, args.p, vars)
    else:
        f = LaurentBoxSeries.from_json(_read_json(path))
        if f.prime != args.p:
            raise InvalidArgumentError(f"series is over p={f.prime}, not {args.p}")
        vars = list(f.vars)
    if args.box:
        f = f.with_box(parse_box(args.box, f.nvars).union(f.box) if f.terms else parse_box(args.box, f.nvars))
    return f


def _interval(args, n: int) -> Optional[MultiInterval]:
    return parse_interval(args.interval, n) if args.interval else None


def _tol(args):
    return parse_rational(args.tol) if args.tol is not None else None


def _ladder(args) -> Optional[List[int]]:
    if getattr(args, "ladder", None):
        try:
            return [int(x) for x in args.ladder.split(",")]
        except ValueError as exc:
            raise ParseError(f"bad ladder {args.ladder!r}") from exc
    return None


def _config(args, nvars_vars: Sequence[str]) -> dict:
    return RunConfig(args.p, list(nvars_vars), args.box, args.interval, args.radius, args.prec,
                     args.budget, args.tol, _ladder(args), args.seed, args.command).to_json()


def _module(args, n: Optional[int] = None):
    if getattr(args, "module", None):
        M = PhiGammaModule.from_json(_read_json(args.module))
        if M.prime != args.p:
            raise InvalidArgumentError(f"module is over p={M.prime}, not {args.p}")
        return M
    n = n or len(_vars(args))
    char = getattr(args, "char", None) or "dp=1,du=1"
    vars = _vars(args)
    if len(vars) != n:
        vars = [f"T{i + 1}" for i in range(n)]
    return module_from_character(parse_character(char, args.p, n), vars)


# ---------------------------------------------------------------------------
# commands


def cmd_norm(args) -> dict:
    f = _series(args)
    out = {}
    if args.radius:
        t = parse_radii(args.radius, f.nvars)
        v, exact = f.gauss_valuation(t, with_flag=True)
        out["v"] = _s(v)
        out["exact"] = exact
        out["w"] = _s(f.gauss_norm(t))
    iv = _interval(args, f.nvars)
    if iv is not None:
        out["interval_v"] = _s(f.interval_valuation(iv))
        out["certified_v"] = _s(f.certified_valuation(iv))
    if not out:
        out["v"] = _s(f.coefficient_valuation())
    out["config"] = _config(args, f.vars)
    return out


def cmd_apply(args) -> dict:
    f = _series(args)
    iv = _interval(args, f.nvars)
    if iv is None and f.interval is not None:
        iv = f.interval
    trace = []
    for desc in args.ops:
        spec = parse_operator(desc, f.nvars, iv)
        f = apply_op(f, spec, budget=args.budget, iv=iv)
        iv = f.interval if iv is not None else None
        trace.append(spec.describe())
    return {"series": f.to_json(), "ops": trace, "tail_valuation": _s(f.tail_valuation),
            "regime": iv.to_json() if iv is not None else "polynomial",
            "config": _config(args, f.vars)}


def cmd_psi0(args) -> dict:
    f = _series(args)
    iv = _interval(args, f.nvars)
    axis = args.axis - 1
    parts = psi0_decompose(f, axis, iv, args.budget)
    out = {"parts": {str(i): g.to_json() for i, g in sorted(parts.items())},
           "axis": args.axis, "config": _config(args, f.vars)}
    if args.check:
        g_iv = next(iter(parts.values())).interval if iv is not None else None
        back = psi0_recombine(parts, axis, g_iv, args.budget)
        diff = back - f
        out["roundtrip_valuation"] = _s(diff.certified_valuation(iv) if iv is not None and not diff.is_zero()
                                        else (INF if diff.is_zero() else diff.coefficient_valuation()))
    return out


def cmd_residue(args) -> dict:
    f = _series(args)
    prec = args.prec
    if args.input2 or args.expr2:
        g = _series(args, "input2")
        r = pairing(f, g, prec if f.tail_valuation != INF or g.tail_valuation != INF else None)
        out = {"pairing": r.to_json()}
    else:
        r = residue(f, prec if f.tail_valuation != INF else None)
        out = {"residue": r.to_json()}
    if args.exact_form is not None:
        out["exact_form"] = exact_form_residue_check(f, args.exact_form - 1).to_json()
    out["config"] = _config(args, f.vars)
    return out


def cmd_duality(args) -> dict:
    n = len(_vars(args))
    if not args.box:
        raise InvalidArgumentError("duality-check needs --box")
    A = parse_box(args.box, n)
    B = parse_box(args.box_b, n) if args.box_b else A.reflect()
    rep = perfectness_gram_check(A, B, args.p)
    return {"gram": rep.to_json(), "box_a": A.to_json(), "box_b": B.to_json(),
            "config": _config(args, _vars(args))}


def cmd_validate(args) -> dict:
    M = _module(args)
    rep = validate_module(M, _tol(args), args.budget)
    out = {"validation": rep.to_json(), "config": _config(args, M.vars)}
    if not rep.ok:
        raise ValidationError("module relations fail", report=out)
    return out


def _checked_module(args):
    M = _module(args)
    rep = validate_module(M, _tol(args), args.budget)
    if not rep.ok:
        raise ValidationError("module relations fail",
                              report={"validation": rep.to_json(), "config": _config(args, M.vars)})
    return M


def _degrees(args):
    if args.degrees is None:
        return None
    try:
        return [int(x) for x in args.degrees.split(",")]
    except ValueError as exc:
        raise ParseError(f"bad degree list {args.degrees!r}") from exc


def cmd_herr(args) -> dict:
    M = _checked_module(args)
    tol = _tol(args)
    depths = _ladder(args) or [args.depth]
    fams = ladder(args.p, M.nvars, depths, args.prec)
    rep = stabilization_experiment(M, fams, tol, _degrees(args), args.seed, args.threads, args.complex)
    out = rep.to_json()
    out["complex"] = args.complex
    out["config"] = _config(args, M.vars)
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["depth"] + [f"h{k}" for k in range(len(rep.dims))])
        for d, dims in zip(rep.ladder, rep.history):
            w.writerow([d] + ["" if x is None else x for x in dims])
        out["_csv"] = buf.getvalue()
    return out


def cmd_specialize(args) -> dict:
    M = _checked_module(args)
    eta = parse_character(args.eta, args.p, M.nvars)
    out = []
    for d in _ladder(args) or [args.depth]:
        fam = ladder(args.p, M.nvars, [d], args.prec)[0]
        out.append(character_specialize(M, eta, fam, _tol(args), args.seed).to_json())
    return {"reports": out, "config": _config(args, M.vars)}


def cmd_probe(args) -> dict:
    M = _checked_module(args)
    delta = parse_character(args.delta, args.p, M.nvars)
    tol = _tol(args)
    rep = triangulation_probe(M, delta, args.depth, args.prec, tol)
    return {"probe": rep.to_json(), "config": _config(args, M.vars)}


def cmd_compactness(args) -> dict:
    n = len(_vars(args))
    inner = parse_interval(args.inner, n)
    outer = parse_interval(args.outer, n)
    lo, hi = (int(x) for x in args.degree_range.split(":"))
    rows, worst = compactness_profile(inner, outer, args.p, range(lo, hi + 1))
    gaps = [g for _, g in rows]
    beyond = [g for (e, g) in rows if max(abs(x) for x in e) > 2]
    increasing = all(b > a for a, b in zip(beyond, beyond[1:]))
    return {"profile": [{"e": list(e), "gap": _s(g)} for e, g in rows], "min_gap": _s(worst),
            "strictly_increasing_beyond_2": increasing, "config": _config(args, _vars(args))}


COMMANDS = {
    "norm": cmd_norm, "apply": cmd_apply, "psi0": cmd_psi0, "residue": cmd_residue,
    "duality-check": cmd_duality, "validate": cmd_validate, "herr": cmd_herr,
    "specialize": cmd_specialize, "probe": cmd_probe, "compactness": cmd_compactness,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=int, default=3, help="odd prime")
    common.add_argument("--vars", default="1", help="variable names (comma separated) or a count")
    common.add_argument("--box", help="exponent box lo:hi or lo1:hi1,lo2:hi2")
    common.add_argument("--prec", type=int, default=DEFAULT_HERR_PREC, help="working precision")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="truncation budget")
    common.add_argument("--radius", help="radius exponents t1,t2,...")
    common.add_argument("--interval", help="multi-interval s:r or s1:r1,s2:r2")
    common.add_argument("--tol", help="valuation tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", help="write the report here instead of stdout")

    ap = argparse.ArgumentParser(prog="multirobba", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def series_cmd(name, help_, positional=True):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if positional:
            sp.add_argument("input", nargs="?", help="series JSON file (default: stdin)")
        sp.add_argument("--expr", help="series as an expression, e.g. '3*T1 + T2^2'")
        return sp

    series_cmd("norm", "Gauss and interval valuations")
    sp = series_cmd("apply", "apply phi/psi/gamma descriptors in order", positional=False)
    sp.add_argument("ops", nargs="+", help="descriptors such as phi:1 psi:2 gamma:1:4")
    sp.add_argument("--file", dest="file", help="series JSON file (default: stdin)")
    sp = series_cmd("psi0", "decompose a psi-free element along one axis")
    sp.add_argument("--axis", type=int, default=1)
    sp.add_argument("--check", action="store_true", help="also report the recombination error")
    sp = series_cmd("residue", "residue, or the pairing with a second series")
    sp.add_argument("--input2", help="second series JSON file")
    sp.add_argument("--expr2", help="second series as an expression")
    sp.add_argument("--exact-form", type=int, dest="exact_form", help="check res(d f / dT_axis) = 0")
    sp = sub.add_parser("duality-check", parents=[common], help="Gram perfectness of the residue pairing")
    sp.add_argument("--box-b", dest="box_b", help="second box (default: the reflected box)")

    def module_cmd(name, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("--module", help="module JSON file")
        sp.add_argument("--char", help="character shorthand dp=..,du=.. (':' separates axes)")
        return sp

    module_cmd("validate", "check the relations of a module")
    sp = module_cmd("herr", "Herr complex cohomology")
    sp.add_argument("--depth", type=int, default=10)
    sp.add_argument("--ladder", help="comma separated depths; enables the stabilization verdict")
    sp.add_argument("--complex", default="phi-gamma", choices=["phi-gamma", "psi-gamma", "psi"])
    sp.add_argument("--degrees", help="only these degrees, e.g. 0 or 0,1")
    sp.add_argument("--csv", action="store_true", help="emit the ladder summary as CSV")
    sp = module_cmd("specialize", "eta-eigenspace versus twisted psi-Gamma cohomology")
    sp.add_argument("--eta", default="du=1")
    sp.add_argument("--depth", type=int, default=6)
    sp.add_argument("--ladder")
    sp = module_cmd("probe", "H^0 of the twisted dual (triangulation probe)")
    sp.add_argument("--delta", default="dp=1,du=1")
    sp.add_argument("--depth", type=int, default=10)
    sp = sub.add_parser("compactness", parents=[common], help="restriction-map valuation gaps")
    sp.add_argument("--inner", required=True)
    sp.add_argument("--outer", required=True)
    sp.add_argument("--degree-range", dest="degree_range", default="0:10")
    return ap


def _emit(obj: dict, out: Optional[str]):
    text = obj.pop("_csv", None)
    if text is None:
        text = json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # global flags may also precede the subcommand
    k = next((i for i, a in enumerate(argv) if a in COMMANDS), None)
    if k:
        argv = [argv[k]] + argv[:k] + argv[k + 1:]
    args = ap.parse_args(argv)
    if args.command == "apply":
        args.input = args.file
    try:
        check_prime(args.p)
        if args.threads < 1:
            raise InvalidArgumentError("--threads must be positive")
        obj = COMMANDS[args.command](args)
    except IndeterminateRankError as exc:
        sys.stderr.write(f"error: {exc} (raise precision with --prec)\n")
        return exc.exit_code
    except ValidationError as exc:
        if getattr(exc, "report", None):
            _emit(dict(exc.report), args.out)
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except (RobbaError, ValueError) as exc:
        code = getattr(exc, "exit_code", 2)
        sys.stderr.write(f"error: {exc}\n")
        return code
    _emit(obj, args.out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
