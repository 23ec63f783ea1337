"""``optiverify`` command line: reduce, solve, verify, estimate, sweep.

Exit codes: 0 success, 2 input or parse error, 3 oracle cap exceeded,
4 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    classical_hardness_bound,
    information_bound,
    monte_carlo_acceptance,
    resource_estimate,
)
from .photonics import ImperfectionParams, PhotonState, encode_proof
from .protocol import (
    ArbitraryStates,
    ConfigurationError,
    Honest,
    ProperAssignment,
    Reason,
    TestKind,
    TwoPhoton,
    Vacuum,
    VerifierParams,
    default_copies,
)
from .sat import (
    Instance,
    OracleCapError,
    ParseError,
    bits,
    brute_force_report,
    find_satisfying_assignment,
    parse_dimacs,
    parse_instance,
    planted_instance,
    reduce_3sat,
    serialize_instance,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_INPUT, EXIT_CAP, EXIT_USAGE = 0, 2, 3, 4
SEED_ENV = "OPTIVERIFY_SEED"
SEED_MAX = 2**64 - 1
SWEEPABLE = ("eta", "dark", "visibility", "n")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# -- argument helpers ----------------------------------------------------------

def parse_range(text: str, integer: bool = False) -> list[float]:
    """``start:stop:steps`` inclusive grid; a plain number is a one-point grid."""
    parts = str(text).split(":")
    if len(parts) == 1:
        return [int(parts[0]) if integer else float(parts[0])]
    if len(parts) != 3:
        raise UsageError(f"range must look like start:stop:steps, got {text!r}")
    start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 1:
        raise UsageError(f"empty range {text!r}")
    grid = np.linspace(start, stop, steps)
    if integer:
        return [int(round(v)) for v in grid]
    return [float(v) for v in grid]


def is_range(text) -> bool:
    return isinstance(text, str) and ":" in text


def resolve_seed(seed: int | None, fresh: bool) -> int | None:
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer")
    if seed is None and fresh:
        seed = int(np.random.SeedSequence().entropy) & SEED_MAX
    if seed is not None and not 0 <= seed <= SEED_MAX:
        raise UsageError("seed must be a 64-bit unsigned integer")
    return seed


def read_instance(path: str | None) -> Instance:
    if not path:
        raise UsageError("--instance is required")
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}")
    return parse_instance(text)


def _state_from_json(values, n: int) -> PhotonState:
    amps = np.array([complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in values])
    if amps.size != n:
        raise UsageError(f"state has {amps.size} amplitudes, instance has {n} variables")
    return PhotonState(amps)


def _witness(inst: Instance) -> tuple[int, ...]:
    w = find_satisfying_assignment(inst)
    if w is None:
        raise UsageError("honest strategy needs a satisfiable instance")
    return w


def parse_strategy(text: str, inst: Instance, k: int):
    """``honest[:bits] | assignment:<bits> | vacuum | arbitrary:<json> | twophoton:<slot>[:<bits>,<bits>]``."""
    name, _, arg = text.partition(":")
    n = inst.num_vars
    try:
        if name == "honest":
            w = bits(arg) if arg else _witness(inst)
            if len(w) != n:
                raise UsageError(f"witness has {len(w)} bits, instance has {n} variables")
            return Honest(w)
        if name == "assignment":
            x = bits(arg)
            if len(x) != n:
                raise UsageError(f"assignment has {len(x)} bits, instance has {n} variables")
            return ProperAssignment(x)
        if name == "vacuum" and not arg:
            return Vacuum()
        if name == "arbitrary" and arg:
            try:
                data = json.loads(Path(arg).read_text())
            except OSError as e:
                raise InputError(f"cannot read {arg}: {e.strerror}")
            except json.JSONDecodeError as e:
                raise InputError(f"{arg}: invalid JSON ({e.msg})")
            if len(data) != k:
                raise UsageError(f"arbitrary strategy needs {k} states, file has {len(data)}")
            return ArbitraryStates(tuple(_state_from_json(s, n) for s in data))
        if name == "twophoton" and arg:
            slot, _, pair = arg.partition(":")
            w = _witness(inst)
            if pair:
                first, second = pair.split(",")
                psi1, psi2 = encode_proof(bits(first)), encode_proof(bits(second))
            else:
                psi1 = psi2 = encode_proof(w)
            if len(psi1) != n or len(psi2) != n:
                raise UsageError(f"two-photon states must span {n} modes")
            return TwoPhoton(int(slot), psi1, psi2, w)
    except ValueError as e:
        raise UsageError(f"invalid strategy {text!r}: {e}")
    raise UsageError(f"invalid strategy {text!r}")


# -- output --------------------------------------------------------------------

def _flatten(record: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        elif isinstance(value, (list, tuple)):
            out[name] = json.dumps(value)
        else:
            out[name] = value
    return out


def render(records: list[dict], fmt: str) -> str:
    if fmt == "json":
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    rows = [_flatten(r) for r in records]
    fields: list[str] = []
    for r in rows:
        fields += [f for f in r if f not in fields]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\r\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def emit(records: list[dict], args) -> None:
    text = render(records, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _record(command: str, seed, **fields) -> dict:
    return {"command": command, "version": __version__, "seed": seed, **fields}


# -- commands ------------------------------------------------------------------

def cmd_reduce(args) -> int:
    try:
        text = Path(args.cnf).read_text()
    except OSError as e:
        raise InputError(f"cannot read {args.cnf}: {e.strerror}")
    cnf = parse_dimacs(text)
    try:
        inst, vmap = reduce_3sat(cnf, balance_cap=args.balance_cap)
    except ValueError as e:
        raise InputError(str(e))
    out = Path(args.out) if args.out else Path(args.cnf).with_suffix(".2of4")
    out.write_text(serialize_instance(inst))
    sidecar = out.with_name(out.name + ".map.json")
    sidecar.write_text(json.dumps(vmap.to_dict(), sort_keys=True, indent=1) + "\n")
    record = _record(
        "reduce", resolve_seed(args.seed, False),
        cnf_vars=cnf.num_vars, cnf_clauses=len(cnf.clauses),
        vars=inst.num_vars, clauses=len(inst.clauses),
        output=str(out), map=str(sidecar),
    )
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    report = brute_force_report(inst, cap=args.cap)
    args.format = "json"
    emit([_record("solve", resolve_seed(args.seed, False), **report.to_dict())], args)
    return EXIT_OK


def _params(args, n: int, eta: float, dark: float, visibility: float, seed: int) -> VerifierParams:
    imp = ImperfectionParams(eta=eta, p_dark=dark, visibility=visibility)
    if eta <= 0:
        raise ConfigurationError("eta must be positive for verification")
    k = args.k if args.k is not None else default_copies(n, eta, args.gamma)
    return VerifierParams(k=k, imp=imp, seed=seed)


def _test_filter(name: str) -> TestKind | None:
    return None if name == "all" else TestKind(name)


def _stats_record(command, seed, args, inst, params, stats, **extra) -> dict:
    warnings = []
    if params.sym_pairs < params.sym_pairs_wanted:
        warnings.append(f"symmetry pairs clamped to {params.sym_pairs} (k={params.k})")
    return _record(
        command, seed,
        n=inst.num_vars, clauses=len(inst.clauses), k=params.k,
        strategy=args.strategy, test=args.test,
        eta=params.imp.eta, p_dark=params.imp.p_dark, visibility=params.imp.visibility,
        sat_slots=params.sat_slots, sym_pairs=params.sym_pairs,
        warnings=warnings, **extra, **stats.to_dict(),
    )


def cmd_verify(args) -> int:
    for name in SWEEPABLE:
        if is_range(getattr(args, name, None)):
            raise UsageError(f"--{name} takes a single value here; use sweep for ranges")
    inst = read_instance(args.instance)
    seed = resolve_seed(args.seed, True)
    params = _params(args, inst.num_vars, float(args.eta), float(args.dark), float(args.visibility), seed)
    strategy = parse_strategy(args.strategy, inst, params.k)
    transcripts: list | None = [] if args.transcripts else None
    stats = monte_carlo_acceptance(
        strategy, inst, params, _test_filter(args.test), args.trials,
        threads=args.threads, transcripts=transcripts,
    )
    records = [_stats_record("verify", seed, args, inst, params, stats)]
    if transcripts:
        records += [_record("trial", seed, **t) for t in transcripts]
    emit(records, args)
    return EXIT_OK


def cmd_estimate(args) -> int:
    n = int(args.n)
    if n < 1:
        raise UsageError("N must be >= 1")
    eta = float(args.eta)
    if not 0 < eta <= 1:
        raise UsageError("eta must lie in (0, 1]")
    k = args.k if args.k is not None else max(1, math.ceil(args.gamma * math.sqrt(n) / eta))
    try:
        bound = classical_hardness_bound(n, args.delta, args.gamma)
    except ValueError as e:
        raise UsageError(str(e))
    record = _record(
        "estimate", resolve_seed(args.seed, False),
        resources=resource_estimate(n, k).to_dict(),
        hardness=bound.to_dict(),
        information_bits=information_bound(n, k),
    )
    args.format = "json" if args.format == "json" else "csv"
    emit([record], args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    ranged = [name for name in SWEEPABLE if is_range(getattr(args, name))]
    if len(ranged) != 1:
        raise UsageError("sweep needs exactly one of --eta/--dark/--visibility/--n as start:stop:steps")
    param = ranged[0]
    grid = parse_range(getattr(args, param), integer=param == "n")
    seed = resolve_seed(args.seed, True)
    fixed = args.instance and param != "n"
    inst = read_instance(args.instance) if fixed else None
    if param != "n" and inst is None:
        raise UsageError("--instance is required unless sweeping --n")
    records = []
    for value in grid:
        settings = {"eta": float(args.eta if param != "eta" else value),
                    "dark": float(args.dark if param != "dark" else value),
                    "visibility": float(args.visibility if param != "visibility" else value)}
        point = inst
        if param == "n":
            n = int(value)
            if n < 4:
                raise UsageError("N must be >= 4 in an N sweep")
            point, _ = planted_instance(n, max(1, n // 4), np.random.default_rng(seed))
        params = _params(args, point.num_vars, settings["eta"], settings["dark"],
                         settings["visibility"], seed)
        strategy = parse_strategy(args.strategy, point, params.k)
        stats = monte_carlo_acceptance(
            strategy, point, params, _test_filter(args.test), args.trials, threads=args.threads,
        )
        rejects = {f"reject_{r.value}": stats.reasons.get(r.value, 0)
                   for r in Reason if r is not Reason.CLEAN_ACCEPT}
        records.append(_record(
            "sweep", seed, parameter=param, value=value, n=point.num_vars, k=params.k,
            strategy=args.strategy, test=args.test, trials=stats.trials, accepts=stats.accepts,
            estimate=stats.estimate, stderr=stats.stderr, **rejects,
        ))
    emit(records, args)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file of defaults; flags override it")
    p.add_argument("--seed", type=int, help=f"master seed (falls back to ${SEED_ENV})")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _experiment(p: argparse.ArgumentParser, ranged: bool) -> None:
    kind = str if ranged else float
    p.add_argument("--instance", help="2-out-of-4 instance file")
    p.add_argument("--strategy", default="honest")
    p.add_argument("--k", type=int, help="proof copies (default from N, eta and gamma)")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--eta", type=kind, default=1.0)
    p.add_argument("--dark", type=kind, default=0.0)
    p.add_argument("--visibility", type=kind, default=1.0)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--test", choices=("all",) + tuple(t.value for t in TestKind), default="all")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optiverify", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("reduce", help="3SAT (DIMACS) to 2-out-of-4 SAT")
    p.add_argument("cnf")
    p.add_argument("--balance-cap", type=int, default=8)
    _common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("solve", help="exhaustive max-satisfiability report")
    p.add_argument("instance_path", nargs="?")
    p.add_argument("--instance")
    p.add_argument("--cap", type=int, default=24)
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="Monte Carlo acceptance of one prover strategy")
    _experiment(p, ranged=False)
    p.add_argument("--transcripts", action="store_true", help="append one record per trial")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("estimate", help="resource counts and classical hardness exponent")
    p.add_argument("n_pos", nargs="?", type=int, metavar="N")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=2.0)
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="acceptance over a grid of one parameter")
    _experiment(p, ranged=True)
    p.add_argument("--n", default=None, help="instance size range (planted instances)")
    _common(p)
    p.set_defaults(func=cmd_sweep, format="csv")
    parser.commands = sub.choices
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}")
    except tomllib.TOMLDecodeError as e:
        raise InputError(f"{path}: {e}")
    return {key.replace("-", "_"): value for key, value in data.items()}


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = _load_config(args.config)
        sub = parser.commands[args.command]
        unknown = sorted(set(config) - {a.dest for a in sub._actions})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    if args.command == "solve":
        args.instance = args.instance or args.instance_path
    if args.command == "estimate":
        args.n = args.n if args.n is not None else args.n_pos
        if args.n is None:
            raise UsageError("estimate needs N")
    return args


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
        if getattr(args, "trials", 1) < 1:
            raise UsageError("--trials must be >= 1")
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except (ParseError, InputError) as e:
        print(f"optiverify: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OracleCapError as e:
        print(f"optiverify: {e}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, ConfigurationError) as e:
        print(f"optiverify: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"optiverify: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
