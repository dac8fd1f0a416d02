"""``ctab`` command line.

Every subcommand prints one JSON report on stdout.  Exit status is 0 on
success, 2 when the analysis finds no admissible table (the report then
has ``"status": "infeasible"``), and 1 on bad input, with a one-line
diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import homogeneity, lp, maxent, measures, polytope, simpson, simulate, threeway
from .table import ContingencyTable, DegenerateStratumError, InconsistentMarginalsError


class InputError(Exception):
    """Bad command-line input; ``field`` names the offending item."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError("arguments", message)


def _clean(obj, warnings):
    """JSON-ready copy of ``obj``; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v, warnings) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, warnings) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist(), warnings)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Fraction):
        return int(obj) if obj.denominator == 1 else float(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            warnings.append(f"non-finite value {v!r} reported as null")
            return None
        return v
    return obj


def _digest(paths) -> dict:
    out = {}
    for p in paths:
        if p:
            out[str(p)] = hashlib.sha256(Path(p).read_bytes()).hexdigest()
    return out


def _read_json(path, field):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(field, f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(field, f"malformed JSON in {path}: {exc.msg} (line {exc.lineno})") from None


def _table(path) -> ContingencyTable:
    obj = _read_json(path, "--table")
    if not isinstance(obj, dict):
        raise InputError("--table", "expected a JSON object with dims and cells")
    try:
        return ContingencyTable.from_json(obj)
    except (ValueError, TypeError) as exc:
        raise InputError("--table", str(exc)) from None


def _ints(text, field, count=None):
    try:
        vals = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise InputError(field, f"expected comma-separated integers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise InputError(field, f"expected {count} integers, got {len(vals)}")
    return vals


def _pair_spec(text, field):
    """``"1:1,2:1"`` -> ((axis, cat), (axis, cat))."""
    try:
        parts = [tuple(int(x) for x in p.split(":")) for p in text.split(",")]
        if len(parts) != 2 or any(len(p) != 2 for p in parts):
            raise ValueError
    except ValueError:
        raise InputError(field, f"expected axis:category,axis:category, got {text!r}") from None
    return parts


def _weight_spec(text, field):
    """``"1,2:-1;1,3:1"`` -> {(1, 2): -1.0, (1, 3): 1.0}."""
    out = {}
    try:
        for item in text.split(";"):
            if not item.strip():
                continue
            pair, w = item.split(":")
            i, j = (int(v) for v in pair.split(","))
            out[(i, j)] = float(w)
    except ValueError:
        raise InputError(field, f"expected i,j:weight;i,j:weight, got {text!r}") from None
    if not out:
        raise InputError(field, "no pairs given")
    return out


def _marginals(path):
    obj = _read_json(path, "--marginals")
    if not isinstance(obj, dict) or "one_way" not in obj:
        raise InputError("--marginals", "expected an object with a one_way field")
    try:
        one_way = simulate.check_one_way(obj["one_way"])
    except (ValueError, TypeError) as exc:
        raise InputError("one_way", str(exc)) from None
    return one_way, obj


def _targets(obj, field, measure):
    raw = obj.get("targets")
    if raw is None:
        raise InputError(field, "no targets field")
    out = {}
    try:
        for t in raw:
            tgt = simulate.AssociationTarget(tuple(t["pair"]), t.get("measure", measure), t["value"])
            if tgt.measure != measure:
                raise ValueError(f"target for pair {tgt.pair} uses {tgt.measure}, command uses {measure}")
            out[tgt.pair] = tgt.value
    except (KeyError, TypeError) as exc:
        raise InputError("targets", f"each target needs pair and value ({exc})") from None
    except ValueError as exc:
        raise InputError("targets", str(exc)) from None
    return out


_MEASURE_NAMES = {"pearson": "pearson", "gamma": "gamma", "somers": "somers_d", "somers_d": "somers_d"}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_measure(args):
    t = _table(args.table)
    axes = _ints(args.axes, "--axes", 2)
    cats = _ints(args.cats, "--cats", 2) if args.cats else [1, 1]
    a, b = axes
    if args.measure == "ld":
        val = measures.ld_pair(t, a, cats[0], b, cats[1])
    elif args.measure == "phi":
        val = measures.pearson_phi(t, a, cats[0], b, cats[1])
    elif args.measure == "pearson":
        val = measures.pearson_rho_scored(t, a, b)
    else:
        from .table import marginal
        two = marginal(t.probabilities(), [a, b])
        if a > b:
            two = two.T
        val = measures.gamma(two) if args.measure == "gamma" else measures.somers_d(two)
    return {"measure": args.measure, "axes": axes, "categories": cats, "value": val}, [args.table]


def cmd_simpson(args):
    t = _table(args.table)
    (a, ca), (b, cb) = _pair_spec(args.pair, "--pair")
    rep = simpson.decompose(t, a, ca, b, cb, args.strata)
    return rep.to_json(), [args.table]


def cmd_homogeneity(args):
    t = _table(args.table)
    strata = _ints(args.strata, "--strata") if args.strata else None
    if args.method == "equal-rho":
        res = homogeneity.equal_rho_2x2xK(t)
    elif args.method == "zero-partial":
        if not strata:
            raise InputError("--strata", "zero-partial needs the strata with zero partial LD")
        res = homogeneity.zero_partial_fit(t, strata)
    else:
        if not strata:
            raise InputError("--strata", "equal-rho-ml needs the strata with equal correlation")
        res = homogeneity.equal_rho_subset_ml(t, strata)
    return res.to_json(), [args.table]


def cmd_threeway(args):
    t = _table(args.table)
    return threeway.threeway_measures(t).to_json(), [args.table]


def cmd_fixed_cells(args):
    t = _table(args.table)
    exact = args.exact
    rep = polytope.fixed_cells(t.cells, exact=exact)
    b = rep.bounds
    ref = rep.refined
    pinned = {}
    for j in range(ref.d):
        if j in ref.free or j in ref.fixed:
            continue
        idx = polytope.unflatten_index(ref.dims, j + 1)
        pinned[",".join(map(str, idx))] = ref.cell_expression(idx)
    out = {
        "exact": b.exact,
        "free_variables_initial": rep.parametrization.f,
        "fixed_count": len(b.omega),
        "fixed_zero_count": b.fixed_zero_count(),
        "fixed_cells": [{"cell": list(idx), "value": v} for idx, v in b.fixed_cells()],
        "refined_free_variables": [list(c) for c in ref.free_cells()],
        "refined_fixed_count": len(ref.fixed),
        "pinned_expressions": pinned,
        "lower": list(b.lower),
        "upper": list(b.upper),
    }
    return out, [args.table]


def _parse_constraint(text, dims):
    try:
        cell, value = text.split("=")
        idx = tuple(int(v) for v in cell.split(","))
        return maxent.cell_constraint(dims, idx, float(value))
    except (ValueError, IndexError):
        raise InputError("--constrain", f"expected i,j,k=value, got {text!r}") from None


def cmd_maxent(args):
    t = _table(args.table)
    par = polytope.parametrize_table(t.cells, exact=False)
    extra = [_parse_constraint(c, t.dims) for c in args.constrain or []]
    fit = maxent.max_entropy(par, extra)
    out = fit.to_json()
    df = par.f - len(extra)
    out["df"] = df
    paths = [args.table]
    if args.gof:
        obs = _table(args.gof)
        if obs.dims != t.dims:
            raise InputError("--gof", f"observed dims {list(obs.dims)} differ from {list(t.dims)}")
        g = maxent.chi_square_gof(obs, fit.fitted, df)
        out["chi_square"], out["p_value"] = g.chi2, g.p_value
        if len(t.dims) == 3 and t.dims[:2] == (2, 2):
            out["threeway_interaction_params"] = maxent.threeway_interaction_params(obs, fit.fitted)
        paths.append(args.gof)
    return out, paths


def cmd_simulate(args):
    if args.seed is None:
        raise InputError("--seed", "simulate requires an explicit --seed")
    measure = _MEASURE_NAMES[args.measure]
    one_way, mobj = _marginals(args.marginals)
    tobj = _read_json(args.targets, "--targets") if args.targets else mobj
    targets = _targets(tobj, "--targets", measure)
    scores = mobj.get("scores")
    out = {"measure": measure, "targets": {f"{i},{j}": v for (i, j), v in targets.items()}}
    if measure == "pearson":
        p = simulate.pearson_construct(one_way, targets, args.policy, scores)
        out["policy"] = args.policy
    else:
        fn = simulate.gamma_construct if measure == "gamma" else simulate.somers_construct
        res = fn(one_way, targets)
        out.update(res.to_json())
        if not res.feasible:
            raise _Infeasible(out)
        p = res.table
    sample = simulate.inversion_sample(p, args.n, args.seed)
    out["probabilities"] = {"dims": list(p.shape), "cells": p.ravel().tolist(), "kind": "probabilities"}
    out["table"] = sample.to_json()
    out["measured"] = {f"{i},{j}": v for (i, j), v in simulate.measure_pairs(p, measure, sorted(targets), scores).items()}
    out["seed"], out["n"] = args.seed, args.n
    if args.out:
        Path(args.out).write_text(json.dumps(sample.to_json()))
    paths = [args.marginals] + ([args.targets] if args.targets else [])
    return out, paths


def cmd_bounds(args):
    measure = _MEASURE_NAMES[args.measure]
    one_way, mobj = _marginals(args.marginals)
    scores = mobj.get("scores")
    if (args.objective is None) == (args.common is None):
        raise InputError("--objective", "give exactly one of --objective or --common")
    senses = ("min", "max") if args.sense == "both" else (args.sense,)
    out = {"measure": measure}
    if measure == "pearson":
        if args.objective is not None:
            rep = simulate.pearson_bounds(one_way, _weight_spec(args.objective, "--objective"), scores)
        else:
            rep = simulate.common_rho_interval(one_way, scores, _weight_spec(args.common, "--common"))
        out.update(rep.to_json())
    else:
        kw = ({"weights": _weight_spec(args.objective, "--objective")} if args.objective is not None
              else {"signs": _weight_spec(args.common, "--common")})
        for s in senses:
            r = simulate.nonlinear_assoc_bounds(one_way, measure, sense=s, starts=args.starts, seed=args.seed, **kw)
            out["lower" if s == "min" else "upper"] = r.value
            out[f"witness_{s}"] = r.to_json()
    return out, [args.marginals]


class _Infeasible(Exception):
    def __init__(self, results):
        super().__init__("infeasible")
        self.results = results


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ctab", description="Contingency-table analysis and simulation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("measure", help="pairwise association of two axes")
    s.add_argument("--table", required=True)
    s.add_argument("--measure", required=True, choices=["ld", "phi", "pearson", "gamma", "somers_d", "somers"])
    s.add_argument("--axes", required=True, help="two axes, e.g. 1,2")
    s.add_argument("--cats", help="categories for ld/phi, e.g. 1,1")
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("simpson", help="decompose two-way LD against a stratifying axis")
    s.add_argument("--table", required=True)
    s.add_argument("--pair", required=True, help="axis:category,axis:category")
    s.add_argument("--strata", required=True, type=int, help="stratifying axis")
    s.set_defaults(func=cmd_simpson)

    s = sub.add_parser("homogeneity", help="equal partial correlations in a 2x2xK table")
    s.add_argument("--table", required=True)
    s.add_argument("--method", default="equal-rho", choices=["equal-rho", "zero-partial", "equal-rho-ml"])
    s.add_argument("--strata", help="comma-separated strata (1-based)")
    s.set_defaults(func=cmd_homogeneity)

    s = sub.add_parser("threeway", help="Bartlett, Bennett and Taylor measures of a 2x2x2 table")
    s.add_argument("--table", required=True)
    s.set_defaults(func=cmd_threeway)

    s = sub.add_parser("fixed-cells", help="cells pinned by the one- and two-way margins")
    s.add_argument("--table", required=True)
    s.add_argument("--exact", dest="exact", action="store_true", default=None,
                   help="rational arithmetic (default for integer tables)")
    s.add_argument("--no-exact", dest="exact", action="store_false")
    s.set_defaults(func=cmd_fixed_cells)

    s = sub.add_parser("maxent", help="maximum-entropy table under the table's two-way margins")
    s.add_argument("--table", required=True)
    s.add_argument("--constrain", action="append", help="extra restraint i,j,k=probability (repeatable)")
    s.add_argument("--gof", help="observed table for a chi-square comparison")
    s.set_defaults(func=cmd_maxent)

    s = sub.add_parser("simulate", help="build and sample a table with target associations")
    s.add_argument("--measure", required=True, choices=["pearson", "gamma", "somers", "somers_d"])
    s.add_argument("--marginals", required=True)
    s.add_argument("--targets", help="targets file (default: the marginals file)")
    s.add_argument("--policy", default="mean", choices=list(simulate.POLICIES))
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="also write the sampled table JSON here")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("bounds", help="range of an association objective")
    s.add_argument("--measure", required=True, choices=["pearson", "gamma", "somers", "somers_d"])
    s.add_argument("--marginals", required=True)
    s.add_argument("--objective", help="weighted sum, e.g. '1,2:-1;1,3:1;2,3:1'")
    s.add_argument("--common", help="common value with signs, e.g. '1,2:-1;1,3:1;2,3:1'")
    s.add_argument("--sense", default="both", choices=["min", "max", "both"])
    s.add_argument("--starts", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bounds)
    return p


_INPUT_FIELDS = ("table", "gof", "marginals", "targets")


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    warnings: list = []
    try:
        args = build_parser().parse_args(argv)
        paths = [getattr(args, k) for k in _INPUT_FIELDS if getattr(args, k, None)]
        results, _ = args.func(args)
        status, code = "ok", 0
    except _Infeasible as exc:
        results, status, code = exc.results, "infeasible", 2
    except lp.InfeasibleError as exc:
        results = {"reason": str(exc)}
        if isinstance(exc, simulate.NoTableError):
            results["stage"] = exc.stage
        status, code = "infeasible", 2
    except InputError as exc:
        print(f"ctab: error: {exc}", file=stderr)
        return 1
    except (measures.UndefinedMeasureError, DegenerateStratumError, InconsistentMarginalsError,
            simpson.UndefinedRatioError, threeway.DegenerateTableError,
            simulate.TargetUnreachableError, ValueError, IndexError) as exc:
        print(f"ctab: error: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    report = {
        "command": argv[0] if argv else None,
        "argv": argv,
        "status": status,
        "inputs": _digest(paths),
        "results": _clean(results, warnings),
        "warnings": warnings,
    }
    stdout.write(json.dumps(report, indent=1) + "\n")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
