"""2-out-of-4 SAT instances: representation, file format, evaluation and oracles.

Variables are 1-based throughout, as in the text format. An assignment is a
plain tuple of 0/1 ints where ``x[i - 1]`` is the value of variable ``i``.
"""
from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np

Assignment = tuple[int, ...]

DEFAULT_ORACLE_CAP = 24


class ParseError(ValueError):
    """Malformed instance text. ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class OracleCapError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Clause:
    """Four distinct variable indices, stored sorted ascending."""

    vars: tuple[int, int, int, int]

    def __post_init__(self):
        v = tuple(int(i) for i in self.vars)
        if len(v) != 4:
            raise ValueError(f"clause needs exactly 4 variables, got {len(v)}")
        if len(set(v)) != 4:
            raise ValueError(f"repeated variable in clause {v}")
        if min(v) < 1:
            raise ValueError(f"variable indices must be positive: {v}")
        object.__setattr__(self, "vars", tuple(sorted(v)))

    @classmethod
    def of(cls, *indices: int) -> "Clause":
        return cls(tuple(indices))

    def __iter__(self):
        return iter(self.vars)


@dataclass(frozen=True)
class Instance:
    num_vars: int
    clauses: tuple[Clause, ...] = ()
    origin: str | None = None
    balance_bound: int | None = None

    def __post_init__(self):
        if self.num_vars < 1:
            raise ValueError("num_vars must be positive")
        clauses = tuple(c if isinstance(c, Clause) else Clause(tuple(c)) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        for c in clauses:
            if c.vars[-1] > self.num_vars:
                raise ValueError(f"clause {c.vars} references a variable above {self.num_vars}")
        if self.balance_bound is not None:
            counts = self.occurrences()
            worst = max(counts.values(), default=0)
            if worst > self.balance_bound:
                raise ValueError(
                    f"instance is not {self.balance_bound}-balanced (max occurrence {worst})"
                )

    def __len__(self) -> int:
        return len(self.clauses)

    def occurrences(self) -> Counter:
        return Counter(v for c in self.clauses for v in c.vars)


@dataclass(frozen=True)
class BlockPartition:
    blocks: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.blocks)

    def validate(self, inst: Instance) -> None:
        """Raise ``ValueError`` unless the partition is valid for ``inst``."""
        seen: list[int] = [i for b in self.blocks for i in b]
        if sorted(seen) != list(range(len(inst.clauses))):
            raise ValueError("blocks must partition the clause indices")
        for b in self.blocks:
            used: set[int] = set()
            for ci in b:
                vs = set(inst.clauses[ci].vars)
                if used & vs:
                    raise ValueError(f"variable repeated inside block {b}")
                used |= vs


@dataclass(frozen=True)
class SatReport:
    satisfiable: bool
    best_assignment: Assignment
    max_fraction: Fraction
    epsilon: Fraction = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "epsilon", 1 - self.max_fraction)

    def to_dict(self) -> dict:
        return {
            "satisfiable": self.satisfiable,
            "max_fraction": float(self.max_fraction),
            "max_fraction_exact": str(self.max_fraction),
            "epsilon": float(self.epsilon),
            "epsilon_exact": str(self.epsilon),
            "witness": "".join(map(str, self.best_assignment)),
        }


class BalanceReport(NamedTuple):
    balanced: bool
    occurrences: dict[int, int]


# -- assignments ---------------------------------------------------------------

def bits(text: str) -> Assignment:
    """``"0101"`` -> ``(0, 1, 0, 1)``."""
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a bit string: {text!r}")
    return tuple(int(ch) for ch in text)


def complement(x: Sequence[int]) -> Assignment:
    return tuple(1 - int(b) for b in x)


def assignment_from_index(index: int, n: int) -> Assignment:
    """Inverse of the oracle ordering: bit ``i - 1`` of ``index`` is ``x_i``."""
    return tuple((index >> k) & 1 for k in range(n))


# -- text format ---------------------------------------------------------------

def parse_instance(text: str | TextIO) -> Instance:
    if not isinstance(text, str):
        text = text.read()
    header: tuple[int, int] | None = None
    clauses: list[Clause] = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise ParseError(f"duplicate header at line {lineno}", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[1] != "2of4":
                raise ParseError(f"malformed header at line {lineno}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"malformed header at line {lineno}", lineno) from None
            if n < 1 or m < 0:
                raise ParseError(f"malformed header at line {lineno}", lineno)
            header = (n, m)
            continue
        if header is None:
            raise ParseError(f"clause before header at line {lineno}", lineno)
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(
                f"expected 4 variables, found {len(parts)} at line {lineno}", lineno
            )
        try:
            idx = [int(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-integer token at line {lineno}", lineno) from None
        for i in idx:
            if not 1 <= i <= header[0]:
                raise ParseError(f"variable {i} out of range at line {lineno}", lineno)
        if len(set(idx)) != 4:
            raise ParseError(f"repeated variable in clause at line {lineno}", lineno)
        clauses.append(Clause(tuple(idx)))
    if header is None:
        raise ParseError("missing header 'p 2of4 <vars> <clauses>'")
    if len(clauses) != header[1]:
        raise ParseError(f"header declares {header[1]} clauses, found {len(clauses)}")
    return Instance(header[0], tuple(clauses))


def serialize_instance(inst: Instance) -> str:
    out = [f"p 2of4 {inst.num_vars} {len(inst.clauses)}"]
    out += [" ".join(map(str, c.vars)) for c in inst.clauses]
    return "\n".join(out) + "\n"


# -- evaluation ----------------------------------------------------------------

def evaluate_clause(clause: Clause, x: Sequence[int]) -> bool:
    return sum(x[i - 1] for i in clause.vars) == 2


def evaluate_instance(inst: Instance, x: Sequence[int]) -> tuple[int, Fraction]:
    if len(x) != inst.num_vars:
        raise ValueError(f"assignment has length {len(x)}, instance has {inst.num_vars} variables")
    count = sum(evaluate_clause(c, x) for c in inst.clauses)
    if not inst.clauses:
        return 0, Fraction(1)
    return count, Fraction(count, len(inst.clauses))


def brute_force_report(inst: Instance, cap: int = DEFAULT_ORACLE_CAP) -> SatReport:
    """Exhaustive scan over all ``2**N`` assignments.

    Ties are broken towards the lowest assignment index, where the index of
    ``x`` is ``sum(x_i * 2**(i - 1))``.
    """
    n = inst.num_vars
    if n > cap:
        raise OracleCapError(f"instance too large for oracle ({n} > {cap} variables)")
    m = len(inst.clauses)
    if m == 0:
        return SatReport(True, (0,) * n, Fraction(1))

    cols = np.array([c.vars for c in inst.clauses], dtype=np.int64) - 1
    best_count, best_index = -1, 0
    chunk = 1 << 18
    total = 1 << n
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        var_bits = ((idx[None, :] >> np.arange(n, dtype=np.int64)[:, None]) & 1).astype(np.int8)
        sums = var_bits[cols].sum(axis=1)  # (m, chunk)
        sat = (sums == 2).sum(axis=0)
        k = int(np.argmax(sat))
        if sat[k] > best_count:
            best_count, best_index = int(sat[k]), int(idx[k])
        if best_count == m:
            break
    frac = Fraction(best_count, m)
    return SatReport(best_count == m, assignment_from_index(best_index, n), frac)


def find_satisfying_assignment(
    inst: Instance, branch_first: Sequence[int] = ()
) -> Assignment | None:
    """Complete backtracking search with clause propagation.

    Used where ``2**N`` enumeration is out of reach (reduced instances).
    Variables in ``branch_first`` are decided before any other; for reduced
    instances, passing the CNF variables and reference pair avoids thrashing
    on gadget auxiliaries. Returns a satisfying assignment or ``None``.
    """
    n = inst.num_vars
    clauses = [tuple(v - 1 for v in c.vars) for c in inst.clauses]
    watch: list[list[int]] = [[] for _ in range(n)]
    for ci, c in enumerate(clauses):
        for v in c:
            watch[v].append(ci)
    value = [-1] * n
    trail: list[int] = []

    def assign(v: int, b: int) -> None:
        value[v] = b
        trail.append(v)

    def propagate(queue: list[int]) -> bool:
        while queue:
            v = queue.pop()
            for ci in watch[v]:
                ones = free = 0
                for u in clauses[ci]:
                    if value[u] < 0:
                        free += 1
                    else:
                        ones += value[u]
                if ones > 2 or ones + free < 2:
                    return False
                if free and (ones == 2 or ones + free == 2):
                    forced = 0 if ones == 2 else 1
                    for u in clauses[ci]:
                        if value[u] < 0:
                            assign(u, forced)
                            queue.append(u)
        return True

    def undo(mark: int) -> None:
        while len(trail) > mark:
            value[trail.pop()] = -1

    first = [v - 1 for v in branch_first]

    def pick() -> int:
        for u in first:
            if value[u] < 0:
                return u
        for c in clauses:
            for u in c:
                if value[u] < 0:
                    return u
        return -1

    def search() -> bool:
        v = pick()
        if v < 0:
            return True
        for b in (0, 1):
            mark = len(trail)
            assign(v, b)
            if propagate([v]) and search():
                return True
            undo(mark)
        return False

    if not search():
        return None
    x = tuple(max(b, 0) for b in value)
    assert evaluate_instance(inst, x)[0] == len(clauses)
    return x


# -- structure -----------------------------------------------------------------

def check_balanced(inst: Instance, c: int) -> BalanceReport:
    if c < 1:
        raise ValueError("balance bound must be >= 1")
    counts = inst.occurrences()
    occ = {v: counts.get(v, 0) for v in range(1, inst.num_vars + 1)}
    return BalanceReport(all(k <= c for k in occ.values()), occ)


def partition_blocks(inst: Instance, rng_seed: int | None = None) -> BlockPartition:
    """Greedy colouring of the clause conflict graph.

    Clauses conflict when they share a variable; each colour class becomes a
    block. ``rng_seed`` shuffles the visiting order (``None`` keeps file order).
    A c-balanced instance has conflict degree at most ``4(c - 1)``, so at most
    ``4(c - 1) + 1`` blocks come out.
    """
    m = len(inst.clauses)
    order = list(range(m))
    if rng_seed is not None:
        order = [int(i) for i in np.random.default_rng(rng_seed).permutation(m)]
    colors_at_var: dict[int, set[int]] = {}
    color_of = [0] * m
    for ci in order:
        vs = inst.clauses[ci].vars
        taken = set().union(*(colors_at_var.get(v, set()) for v in vs))
        col = 0
        while col in taken:
            col += 1
        color_of[ci] = col
        for v in vs:
            colors_at_var.setdefault(v, set()).add(col)
    ncol = max(color_of, default=-1) + 1
    blocks = tuple(tuple(i for i in range(m) if color_of[i] == k) for k in range(ncol))
    return BlockPartition(blocks)


# -- generators ----------------------------------------------------------------

def random_instance(n: int, m: int, rng: np.random.Generator) -> Instance:
    if n < 4:
        raise ValueError("need at least 4 variables")
    clauses = [Clause(tuple(int(v) + 1 for v in rng.choice(n, 4, replace=False))) for _ in range(m)]
    return Instance(n, tuple(clauses), origin="native")


def planted_instance(
    n: int, m: int, rng: np.random.Generator, witness: Sequence[int] | None = None
) -> tuple[Instance, Assignment]:
    """Random instance built to be satisfied by ``witness`` (drawn if absent)."""
    if witness is None:
        while True:
            witness = tuple(int(b) for b in rng.integers(0, 2, n))
            if 2 <= sum(witness) <= n - 2:
                break
    witness = tuple(witness)
    ones = [i + 1 for i, b in enumerate(witness) if b]
    zeros = [i + 1 for i, b in enumerate(witness) if not b]
    if len(ones) < 2 or len(zeros) < 2:
        raise ValueError("witness needs at least two 1s and two 0s")
    clauses = []
    for _ in range(m):
        pick = list(rng.choice(ones, 2, replace=False)) + list(rng.choice(zeros, 2, replace=False))
        clauses.append(Clause(tuple(int(v) for v in pick)))
    return Instance(n, tuple(clauses), origin="native"), witness


def instance_from_clauses(n: int, clauses: Iterable[Sequence[int]], **kw) -> Instance:
    return Instance(n, tuple(Clause(tuple(c)) for c in clauses), **kw)
