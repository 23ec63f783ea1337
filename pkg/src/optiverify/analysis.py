"""Acceptance statistics, exact ideal-case formulas and resource arithmetic."""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .photonics import PhotonState, two_photon_coincidence_prob
from .protocol import (
    TEST_KINDS,
    ProverStrategy,
    TestKind,
    VerifierParams,
    default_partition,
    draw_choice,
    prepare_proofs,
    run_test,
)
from .sat import Assignment, BlockPartition, Instance, evaluate_instance


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for trial ``index``; identical for any worker layout."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


@dataclass(frozen=True)
class TrialStats:
    trials: int
    accepts: int
    master_seed: int
    by_test: dict = field(default_factory=dict)
    reasons: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.accepts <= self.trials:
            raise ValueError("need 0 <= accepts <= trials")

    @property
    def estimate(self) -> float:
        return self.accepts / self.trials if self.trials else 0.0

    @property
    def stderr(self) -> float:
        if not self.trials:
            return 0.0
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.trials)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "accepts": self.accepts,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "master_seed": self.master_seed,
            "by_test": self.by_test,
            "reasons": self.reasons,
        }


def _run_chunk(args) -> tuple[list[tuple[str, bool, str]], list[dict]]:
    strategy, inst, params, test, indices, keep = args
    partition = default_partition(inst, params.partition_seed)
    proofs = prepare_proofs(strategy, inst.num_vars, params.k)
    rows, records = [], []
    for i in indices:
        rng = trial_rng(params.seed, i)
        kind = test if test is not None else TEST_KINDS[int(rng.integers(3))]
        choice = draw_choice(kind, inst.num_vars, partition, params, rng)
        verdict = run_test(kind, proofs, inst, partition, params, rng, choice)
        rows.append((kind.value, verdict.accept, verdict.reason.value))
        if keep:
            records.append({"trial": i, **verdict.to_record()})
    return rows, records


def monte_carlo_acceptance(
    strategy: ProverStrategy,
    inst: Instance,
    params: VerifierParams,
    test: TestKind | None = None,
    trials: int = 1000,
    threads: int = 1,
    transcripts: list | None = None,
) -> TrialStats:
    """Run ``trials`` verification rounds with per-trial streams from ``params.seed``.

    ``test`` fixes the test kind; otherwise each round draws one uniformly.
    Tallies do not depend on ``threads``. Pass a list as ``transcripts`` to
    collect one JSON-ready record per trial, in trial order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    keep = transcripts is not None
    threads = max(1, min(threads, trials))
    if threads == 1:
        results = [_run_chunk((strategy, inst, params, test, range(trials), keep))]
    else:
        bounds = np.linspace(0, trials, threads + 1).astype(int)
        jobs = [
            (strategy, inst, params, test, range(bounds[t], bounds[t + 1]), keep)
            for t in range(threads)
        ]
        with ProcessPoolExecutor(threads) as pool:
            results = list(pool.map(_run_chunk, jobs))

    by_test: dict[str, dict[str, int]] = {}
    reasons: Counter[str] = Counter()
    accepts = 0
    for rows, records in results:
        for kind, ok, reason in rows:
            slot = by_test.setdefault(kind, {"trials": 0, "accepts": 0})
            slot["trials"] += 1
            slot["accepts"] += ok
            accepts += ok
            reasons[reason] += 1
        if keep:
            transcripts.extend(records)
    return TrialStats(
        trials=trials,
        accepts=accepts,
        master_seed=params.seed,
        by_test={k: by_test[k] for k in sorted(by_test)},
        reasons=dict(sorted(reasons.items())),
    )


# -- exact ideal-case values ---------------------------------------------------

def clause_sign_sum(x: Assignment, vars: Iterable[int]) -> int:
    return sum(1 - 2 * x[v - 1] for v in vars)


def exact_satisfiability_acceptance(
    x: Assignment, inst: Instance, partition: BlockPartition
) -> Fraction:
    """Ideal single-slot acceptance of the proper state for ``x``.

    A uniformly chosen block rejects with probability
    ``sum_c s_c**2 / (4N)`` over its clauses, ``s_c`` the signed clause sum.
    """
    if len(x) != inst.num_vars:
        raise ValueError("assignment length mismatch")
    if not len(partition):
        return Fraction(1)
    n = inst.num_vars
    reject = Fraction(0)
    for block in partition.blocks:
        mass = sum(clause_sign_sum(x, inst.clauses[c].vars) ** 2 for c in block)
        reject += Fraction(mass, 4 * n)
    return 1 - reject / len(partition)


def collision_probability(n: int, k: int) -> float:
    """Chance that ``k`` uniform draws over ``n/2`` edges hit some edge twice."""
    if n < 2 or k < 1:
        raise ValueError("need N >= 2 and K >= 1")
    edges = n // 2
    if k > edges:
        return 1.0
    miss = 1.0
    for j in range(k):
        miss *= 1 - j / edges
    return 1 - miss


def exact_symmetry_acceptance(pairs: Sequence[tuple[PhotonState, PhotonState]]) -> float:
    """Ideal acceptance when every listed pair is measured once."""
    out = 1.0
    for psi, phi in pairs:
        out *= 1 - two_photon_coincidence_prob(psi, phi)
    return out


# -- resources and bounds ------------------------------------------------------

@dataclass(frozen=True)
class ResourceEstimate:
    n: int
    k: int
    sources: int
    cascades: int
    cascade_depth: int
    phase_shifters: int
    block_switch: tuple[int, int]
    mode_switches: int
    mode_switch_size: tuple[int, int]
    pair_switch: tuple[int, int]
    four_mode_interferometers: int
    two_mode_interferometers: int
    total_photons: int

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def ceil_log2(n: int) -> int:
    return (n - 1).bit_length() if n > 1 else 0


def resource_estimate(n: int, k: int) -> ResourceEstimate:
    """Optical components for ``K`` copies of an ``N``-mode proof.

    Four-mode mixers: one block uses at most ``N // 4``. Two-mode splitters:
    ``N // 2`` per copy for the uniformity test plus ``N`` for the pairing
    array of the symmetry test.
    """
    if n < 1 or k < 1:
        raise ValueError("need N >= 1 and K >= 1")
    return ResourceEstimate(
        n=n,
        k=k,
        sources=k,
        cascades=k,
        cascade_depth=ceil_log2(n),
        phase_shifters=k * n,
        block_switch=(k, k),
        mode_switches=k,
        mode_switch_size=(n, n),
        pair_switch=(2 * n, 2 * n),
        four_mode_interferometers=n // 4,
        two_mode_interferometers=k * (n // 2) + n,
        total_photons=k,
    )


@dataclass(frozen=True)
class HardnessBound:
    n: int
    delta: float
    gamma: float
    info_bits: float
    classical_exponent: float
    log2_prefactor: float
    separation: bool

    @property
    def headline(self) -> str:
        if not self.separation:
            return "no separation at this N"
        return f"> 2^{math.floor(self.classical_exponent)}"

    def to_dict(self) -> dict:
        return {**asdict(self), "headline": self.headline}


def classical_hardness_bound(n: int, delta: float = 1.0, gamma: float = 2.0) -> HardnessBound:
    """Exponent of the classical running-time lower bound, base 2.

    ``info_bits = gamma*sqrt(N)*log2 N`` is what the proofs can reveal;
    the search space left is ``delta*N - info_bits`` bits. The prefactor
    ``1/(sqrt(N) log2 N)`` is reported separately as a log2 value.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if n < 1:
        raise ValueError("N must be >= 1")
    log_n = math.log2(n)
    info = gamma * math.sqrt(n) * log_n
    exponent = delta * n - info
    prefactor = -math.log2(math.sqrt(n) * log_n) if n > 1 else 0.0
    return HardnessBound(n, delta, gamma, info, exponent, prefactor, exponent > 0)


def information_bound(n: int, k: int) -> int:
    """Bits ``K`` photons over ``N`` modes can carry: ``K * ceil(log2 N)``."""
    if n < 1 or k < 1:
        raise ValueError("need N >= 1 and K >= 1")
    return k * ceil_log2(n)


@dataclass(frozen=True)
class BaselineResult:
    found: bool
    candidates_tried: int
    verifier_calls: int
    witness: Assignment | None = None


def classical_search_baseline(
    inst: Instance,
    budget: int,
    repeats_per_candidate: int = 1,
    rng: np.random.Generator | None = None,
) -> BaselineResult:
    """Guess uniform assignments and check each until one satisfies or budget runs out.

    Each guess is checked ``repeats_per_candidate`` times and judged by
    majority; the check is deterministic so the repeats only count work.
    """
    if budget < 1 or repeats_per_candidate < 1:
        raise ValueError("budget and repeats must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    total = len(inst.clauses)
    calls = 0
    for tried in range(1, budget + 1):
        x = tuple(int(b) for b in rng.integers(0, 2, inst.num_vars))
        votes = 0
        for _ in range(repeats_per_candidate):
            votes += evaluate_instance(inst, x)[0] == total
            calls += 1
        if 2 * votes > repeats_per_candidate:
            return BaselineResult(True, tried, calls, x)
    return BaselineResult(False, budget, calls)
