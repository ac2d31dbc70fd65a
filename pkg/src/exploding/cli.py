"""Command-line front end.

Exit codes: 0 success, 1 a verification failed, 2 bad input.  Errors are
written to stderr as JSON.
"""

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from exploding import analysis
from exploding import finite_system as fs
from exploding import numbers
from exploding import shift_system as ss
from exploding.errors import DepthBudgetError, UnsupportedModeError, ValidationError
from exploding.operator import FINITE, build, write_kernel_csv
from exploding.weights import weights_from_dict

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


@dataclass
class SystemDefinition:
    backend: object
    weights: object
    seed: object
    mode: object

    @property
    def tag(self):
        return "finite" if isinstance(self.backend, fs.FiniteSystem) else "shift"

    def to_dict(self):
        out = dict(self.backend.to_dict())
        out["levels"] = self.weights.to_dict()
        out["mode"] = self.weights.mode
        if self.seed is not None:
            out["seed"] = self.seed
        out["derived"] = {
            "a": [numbers.dump(x) for x in self.weights.a],
            "b": [numbers.dump(x) for x in self.weights.b],
        }
        return out


def bundled_definitions():
    root = resources.files("exploding") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read(path):
    p = Path(path)
    if p.exists():
        return p.read_text()
    name = path[:-5] if path.endswith(".json") else path
    if name in bundled_definitions():
        return (resources.files("exploding") / "data" / f"{name}.json").read_text()
    raise ValidationError.single("file_not_found", f"no definition file {path!r}")


def _problem(code, message):
    return {"code": code, "message": message, "index": None}


def parse_definition(doc, mode=None):
    """Build a :class:`SystemDefinition` from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ValidationError.single("not_an_object", "definition must be a JSON object")
    problems = []
    tag = doc.get("backend")
    if tag not in ("finite", "shift"):
        problems.append(_problem("unknown_backend", f"backend must be 'finite' or 'shift', got {tag!r}"))
    mode = mode or doc.get("mode")
    if mode is not None and mode not in numbers.MODES:
        problems.append(_problem("unknown_mode", f"mode must be one of {numbers.MODES}, got {mode!r}"))
    levels = doc.get("levels")
    if not isinstance(levels, dict):
        problems.append(_problem("missing_levels", "levels must be an object"))
    elif not isinstance(levels.get("cap"), int) or levels["cap"] < 2:
        problems.append(_problem("cap_too_small", f"levels.cap must be an integer >= 2, got {levels.get('cap')!r}"))
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        problems.append(_problem("bad_seed", f"seed must be an integer, got {seed!r}"))
    if problems:
        raise ValidationError(problems)

    if tag == "finite":
        if not isinstance(doc.get("mu"), list) or not isinstance(doc.get("map"), list):
            raise ValidationError.single("bad_finite_payload", "finite backend needs 'mu' and 'map' lists")
        backend = fs.validate(fs.finite_system(doc["mu"], doc["map"]))
    else:
        p = doc.get("p")
        if not isinstance(p, list):
            raise ValidationError.single("bad_shift_payload", "shift backend needs a 'p' list")
        if doc.get("alphabet", len(p)) != len(p):
            raise ValidationError.single(
                "alphabet_mismatch", f"alphabet {doc.get('alphabet')} but {len(p)} probabilities")
        backend = ss.bernoulli_shift(p, mode)
    weights = weights_from_dict(levels, mode)
    return SystemDefinition(backend, weights, seed, mode)


def load_definition(path, mode=None):
    try:
        doc = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise ValidationError.single("bad_json", f"cannot parse {path}: {exc}") from exc
    return parse_definition(doc, mode)


def _encode(obj):
    if numbers.is_exact(obj):
        return numbers.dump(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    return json.dumps(obj, default=_encode, indent=2) + "\n"


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _operator(defn, args):
    return build(defn.backend, defn.weights)


def cmd_validate(defn, args):
    _emit(dumps(defn.to_dict()), args.out)
    return EXIT_OK


def cmd_kernel(defn, args):
    op = _operator(defn, args)
    rows = op.to_matrix()
    if args.format == "json":
        text = dumps([
            {"from": list(r.source), "targets": [{"to": list(t), "prob": p} for t, p in r.targets]}
            for r in rows])
    else:
        buf = io.StringIO()
        write_kernel_csv(rows, buf)
        text = buf.getvalue()
    _emit(text, args.out)
    return EXIT_OK


def cmd_check(defn, args):
    op = _operator(defn, args)
    ds = analysis.check_doubly_stochastic(op, seed=_seed(defn, args))
    report = {"doubly_stochastic": ds, "ergodicity": None}
    ok = ds["passed"]
    if op.mode == FINITE:
        erg = analysis.ergodicity_report(op)
        report["ergodicity"] = erg.to_dict()
        ok = ok and erg.agree
    _emit(dumps(report), args.out)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_factors(defn, args):
    op = _operator(defn, args)
    report = analysis.pointwise_factor_report(op, args.word or None, seed=_seed(defn, args))
    _emit(dumps(report), args.out)
    if op.mode == FINITE:
        ok = report["witness"] is None or report["witness"]["koopman_on_quotient"]
    else:
        ok = all(w["verified"] for w in report["witnesses"])
    return EXIT_OK if ok else EXIT_FAILED


def cmd_lemma(defn, args):
    op = _operator(defn, args)
    rows = analysis.lemma_bound_table(op, args.word, args.i_max, args.n_max)
    summary = analysis.lemma_summary(rows, op.cap, op.exact)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(analysis.LEMMA_CSV_HEADER)
    for r in rows:
        d = r.to_dict()
        writer.writerow([d[h] for h in analysis.LEMMA_CSV_HEADER])
    if args.format == "csv" and not args.out:
        sys.stdout.write(buf.getvalue())
    else:
        if args.out:
            Path(args.out).write_text(buf.getvalue())
        summary["word"] = args.word
        summary["table"] = [r.to_dict() for r in rows]
        sys.stdout.write(dumps(summary))
    return EXIT_OK if summary["passed"] else EXIT_FAILED


def _parse_partition(text):
    return [[int(x) for x in block.split(",") if x.strip()] for block in text.split("|")]


def cmd_entropy(defn, args):
    op = _operator(defn, args)
    partition = _parse_partition(args.partition) if args.partition else None
    report = {
        "ks_entropy": analysis.ks_entropy_report(op, args.n_max, partition),
        "r_summability": analysis.r_summability_report(defn.weights),
    }
    _emit(dumps(report), args.out)
    return EXIT_OK


def parse_observable(op, spec):
    """``const:C``, ``set:i,j,...`` (indicator of A x levels) or ``level:k``."""
    kind, _, arg = spec.partition(":")
    n = op.system.n
    if kind == "const":
        return op.constant(arg or 1)
    if kind == "set":
        pts = [int(x) for x in arg.split(",") if x.strip()]
        if any(not 0 <= x < n for x in pts):
            raise ValidationError.single("invalid_observable", f"set {pts} leaves the space")
        return analysis.set_indicator(op, pts)
    if kind == "level":
        k = int(arg)
        if not 1 <= k <= op.cap:
            raise ValidationError.single("invalid_observable", f"level {k} outside 1..{op.cap}")
        return op.level_function([[1 if j == k else 0] * n for j in range(1, op.cap + 1)])
    raise ValidationError.single("invalid_observable", f"unknown observable {spec!r}")


def cmd_simulate(defn, args):
    op = _operator(defn, args)
    if op.mode != FINITE:
        raise UnsupportedModeError("simulate needs the finite backend")
    f = parse_observable(op, args.observable)
    start = tuple(int(x) for x in args.start.split(",")) if args.start else None
    seed = _seed(defn, args)
    report = analysis.stationarity_and_birkhoff(op, f, args.steps, seed, start)
    if args.out:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "k", "occupancy", "nu"])
        for (x, k), o, v in zip(op.states(), report["occupancy"], report["nu"]):
            writer.writerow([x, k, repr(o), numbers.dump(v)])
        Path(args.out).write_text(buf.getvalue())
    report["observable"] = args.observable
    sys.stdout.write(dumps(report))
    return EXIT_OK


def cmd_compare(defn, args):
    op = _operator(defn, args)
    report = analysis.compare_definition_example(op, args.functions, args.max_depth, _seed(defn, args))
    _emit(dumps(report), args.out)
    return EXIT_OK if report["consistent"] else EXIT_FAILED


def _seed(defn, args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    return defn.seed if defn.seed is not None else 0


COMMANDS = {
    "validate": cmd_validate,
    "kernel": cmd_kernel,
    "check": cmd_check,
    "factors": cmd_factors,
    "lemma": cmd_lemma,
    "entropy": cmd_entropy,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def make_parser():
    parser = argparse.ArgumentParser(prog="exploding", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("path", help="system definition JSON (or a bundled name, e.g. eight_cycle)")
        p.add_argument("--out", help="write the main output here instead of stdout")
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=numbers.MODES)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        return p

    add("validate", "check a definition file and echo it normalized")
    add("kernel", "export the transition kernel (finite backend)").set_defaults(format="csv")
    add("check", "Markov axioms and ergodicity tests")
    p = add("factors", "pointwise factor report")
    p.add_argument("--word", action="append", help="cylinder word to separate (shift); repeatable")
    p = add("lemma", "transport lemma bound table (shift backend)")
    p.add_argument("--word", default="1")
    p.add_argument("--i-max", type=int, default=6)
    p.add_argument("--n-max", type=int, default=6)
    p = add("entropy", "entropy of the map and tail summability")
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--partition", help="finite backend partition, e.g. '0,1|2,3'")
    p = add("simulate", "sample a trajectory; occupancy and time averages")
    p.add_argument("--steps", type=int, default=100000)
    p.add_argument("--observable", default="const:1")
    p.add_argument("--start", help="start state 'x,k' (default: drawn from mu x m)")
    p = add("compare", "fiber-average vs block-substitution formula at level 1 (shift backend)")
    p.add_argument("--functions", type=int, default=50)
    p.add_argument("--max-depth", type=int, default=3)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        defn = load_definition(args.path, args.mode)
        return COMMANDS[args.command](defn, args)
    except ValidationError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "problems": exc.problems}) + "\n")
        return EXIT_INPUT
    except (UnsupportedModeError, DepthBudgetError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
