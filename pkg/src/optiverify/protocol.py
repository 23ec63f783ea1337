"""Merlin's proof bundles and Arthur's three tests.

Each test is split into a *choice* (block, slots, matching or pairs), drawn
from the verifier's stream before any proof is measured, and a measurement
that consumes the same stream afterwards. Variable ``i`` of an instance lives
on optical mode ``i - 1``.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .photonics import (
    IDEAL,
    Circuit,
    CircuitOp,
    DetectionEvent,
    FourModeMixer,
    ImperfectionParams,
    Permutation,
    PhotonState,
    Splitter,
    detect,
    embed,
    encode_proof,
    is_coincidence,
    pairing_circuit,
)
from .sat import Assignment, BlockPartition, Instance, partition_blocks


class ConfigurationError(ValueError):
    pass


class TestKind(str, Enum):
    __test__ = False  # not a pytest class

    SATISFIABILITY = "satisfiability"
    UNIFORMITY = "uniformity"
    SYMMETRY = "symmetry"


TEST_KINDS = (TestKind.SATISFIABILITY, TestKind.UNIFORMITY, TestKind.SYMMETRY)


class Reason(str, Enum):
    CLEAN_ACCEPT = "clean-accept"
    SAT_MODE_PHOTON = "photon-in-satisfiability-mode"
    MULTI_PHOTON = "multi-photon"
    NO_PHOTON = "no-photon"
    INCOMPATIBLE = "incompatible-outcomes"
    NO_COLLISION = "no-collision"
    COINCIDENCE = "coincidence"
    INSUFFICIENT_PHOTONS = "insufficient-photons"


# -- prover side ---------------------------------------------------------------

@dataclass(frozen=True)
class Honest:
    witness: Assignment


@dataclass(frozen=True)
class ProperAssignment:
    x: Assignment


@dataclass(frozen=True)
class ArbitraryStates:
    states: tuple[PhotonState, ...]


@dataclass(frozen=True)
class Vacuum:
    pass


@dataclass(frozen=True)
class TwoPhoton:
    """Slot ``slot`` carries two photons ``psi1, psi2``; the rest are honest."""

    slot: int
    psi1: PhotonState
    psi2: PhotonState
    witness: Assignment


ProverStrategy = Union[Honest, ProperAssignment, ArbitraryStates, Vacuum, TwoPhoton]

Slot = tuple[PhotonState, ...]


@dataclass(frozen=True)
class ProofBundle:
    """``K`` unentangled slots, each holding zero or more photons over ``N`` modes."""

    num_modes: int
    slots: tuple[Slot, ...]

    def __len__(self) -> int:
        return len(self.slots)


def prepare_proofs(strategy: ProverStrategy, n: int, k: int) -> ProofBundle:
    if isinstance(strategy, (Honest, ProperAssignment)):
        x = strategy.witness if isinstance(strategy, Honest) else strategy.x
        if len(x) != n:
            raise ValueError(f"assignment has length {len(x)}, expected {n}")
        state = encode_proof(x)
        return ProofBundle(n, ((state,),) * k)
    if isinstance(strategy, Vacuum):
        return ProofBundle(n, ((),) * k)
    if isinstance(strategy, ArbitraryStates):
        if len(strategy.states) != k:
            raise ValueError(f"need {k} states, got {len(strategy.states)}")
        if any(len(s) != n for s in strategy.states):
            raise ValueError(f"every state must span {n} modes")
        return ProofBundle(n, tuple((s,) for s in strategy.states))
    if isinstance(strategy, TwoPhoton):
        if not 0 <= strategy.slot < k:
            raise ValueError(f"slot {strategy.slot} outside 0..{k - 1}")
        if len(strategy.witness) != n or len(strategy.psi1) != n or len(strategy.psi2) != n:
            raise ValueError(f"states and witness must span {n} modes")
        honest = (encode_proof(strategy.witness),)
        slots = [honest] * k
        slots[strategy.slot] = (strategy.psi1, strategy.psi2)
        return ProofBundle(n, tuple(slots))
    raise TypeError(f"unknown strategy {strategy!r}")


# -- verifier parameters -------------------------------------------------------

@dataclass(frozen=True)
class VerifierParams:
    """Copies ``k`` and loss-adapted selection sizes.

    With ``eta < 1`` the satisfiability test measures ``ceil(sat_multiplier/eta)``
    slots and the symmetry test ``ceil(sym_multiplier/eta**2)`` disjoint pairs
    (clamped to ``k // 2``). Lossless runs use one slot and one pair.
    """

    k: int
    imp: ImperfectionParams = IDEAL
    seed: int = 0
    sat_multiplier: float = 3.0
    sym_multiplier: float = 3.0
    uniformity_multiplier: float = 2.0
    partition_seed: int | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need at least two proof copies")
        if min(self.sat_multiplier, self.sym_multiplier, self.uniformity_multiplier) < 1:
            raise ValueError("multipliers must be >= 1")
        if self.imp.eta <= 0:
            raise ValueError("the adapted tests need eta > 0")

    @property
    def sat_slots(self) -> int:
        if self.imp.eta >= 1.0:
            return 1
        return math.ceil(self.sat_multiplier / self.imp.eta)

    @property
    def sym_pairs_wanted(self) -> int:
        if self.imp.eta >= 1.0:
            return 1
        return math.ceil(self.sym_multiplier / self.imp.eta ** 2)

    @property
    def sym_pairs(self) -> int:
        return min(self.sym_pairs_wanted, self.k // 2)


def default_copies(
    n: int,
    eta: float = 1.0,
    gamma: float = 2.0,
    sat_multiplier: float = 3.0,
    sym_multiplier: float = 3.0,
) -> int:
    """``ceil(gamma*sqrt(N)/eta)``, raised so the lossy tests find enough slots."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    k = math.ceil(gamma * math.sqrt(n) / eta)
    if eta < 1.0:
        k = max(k, math.ceil(sat_multiplier / eta), 2 * math.ceil(sym_multiplier / eta ** 2))
    return max(k, 2)


# -- verdicts ------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    accept: bool
    test: TestKind
    reason: Reason
    transcript: dict = field(default_factory=dict, compare=False)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.accept != (self.reason is Reason.CLEAN_ACCEPT):
            raise ValueError(f"accept={self.accept} inconsistent with reason {self.reason.value}")

    def to_record(self) -> dict:
        return {
            "accept": self.accept,
            "test": self.test.value,
            "reason": self.reason.value,
            **self.transcript,
            **({"warnings": list(self.warnings)} if self.warnings else {}),
        }


@dataclass(frozen=True)
class UniformityOutcome:
    edge: tuple[int, int]
    b: int


# -- verifier choices ----------------------------------------------------------

@dataclass(frozen=True)
class SatChoice:
    block: int | None
    slots: tuple[int, ...]


@dataclass(frozen=True)
class UniformityChoice:
    edges: tuple[tuple[int, int], ...]
    unmatched: int | None = None


@dataclass(frozen=True)
class SymmetryChoice:
    pairs: tuple[tuple[int, int], ...]
    clamped: bool = False


def _pick_slots(k: int, count: int, rng, must_include: int | None) -> list[int]:
    if must_include is None:
        return [int(s) for s in rng.choice(k, count, replace=False)]
    others = [s for s in range(k) if s != must_include]
    rest = [int(others[i]) for i in rng.choice(len(others), count - 1, replace=False)]
    pos = int(rng.integers(count))
    return rest[:pos] + [must_include] + rest[pos:]


def draw_sat_choice(
    partition: BlockPartition, params: VerifierParams, rng, must_include: int | None = None
) -> SatChoice:
    """Uniform block and slots; ``must_include`` conditions on one slot being measured."""
    count = params.sat_slots
    if count > params.k:
        raise ConfigurationError(
            f"satisfiability test needs {count} slots but only {params.k} copies exist"
        )
    block = int(rng.integers(len(partition))) if len(partition) else None
    return SatChoice(block, tuple(_pick_slots(params.k, count, rng, must_include)))


def draw_matching(n: int, rng) -> UniformityChoice:
    """Uniform perfect matching on ``0..n-1`` (one mode left over when ``n`` is odd)."""
    order = [int(m) for m in rng.permutation(n)]
    edges = tuple(
        (min(order[2 * p], order[2 * p + 1]), max(order[2 * p], order[2 * p + 1]))
        for p in range(n // 2)
    )
    return UniformityChoice(edges, order[-1] if n % 2 else None)


def draw_symmetry_choice(params: VerifierParams, rng, must_include: int | None = None) -> SymmetryChoice:
    pairs = params.sym_pairs
    if pairs < 1:
        raise ConfigurationError("symmetry test needs at least two copies")
    slots = _pick_slots(params.k, 2 * pairs, rng, must_include)
    return SymmetryChoice(
        tuple((slots[2 * p], slots[2 * p + 1]) for p in range(pairs)),
        clamped=pairs < params.sym_pairs_wanted,
    )


# -- circuits ------------------------------------------------------------------

@functools.lru_cache(maxsize=256)
def satisfiability_circuit(inst: Instance, partition: BlockPartition, block: int | None):
    """Group each clause of the block onto four adjacent modes and mix them.

    Returns the circuit and the set of satisfiability-mode outputs. Modes
    outside the block pass straight to their detectors.
    """
    n = inst.num_vars
    clause_ids = partition.blocks[block] if block is not None else ()
    perm = [-1] * n
    pos = 0
    for ci in clause_ids:
        for v in inst.clauses[ci].vars:
            perm[v - 1] = pos
            pos += 1
    for m in range(n):
        if perm[m] < 0:
            perm[m] = pos
            pos += 1
    ops: list[CircuitOp] = [Permutation(tuple(perm))]
    ops += [FourModeMixer(4 * q, 4 * q + 1, 4 * q + 2, 4 * q + 3) for q in range(len(clause_ids))]
    return Circuit(n, tuple(ops)), frozenset(4 * q for q in range(len(clause_ids)))


def uniformity_circuit(n: int, choice: UniformityChoice) -> Circuit:
    """Edge ``p = (i, j)`` lands on outputs ``2p`` (b = 0) and ``2p + 1`` (b = 1)."""
    perm = [0] * n
    for p, (i, j) in enumerate(choice.edges):
        perm[i], perm[j] = 2 * p, 2 * p + 1
    if choice.unmatched is not None:
        perm[choice.unmatched] = n - 1
    ops: list[CircuitOp] = [Permutation(tuple(perm))]
    ops += [Splitter(2 * p, 2 * p + 1) for p in range(len(choice.edges))]
    return Circuit(n, tuple(ops))


def _photons(slot: Slot) -> list[np.ndarray]:
    return [p.amplitudes for p in slot]


# -- tests ---------------------------------------------------------------------

def satisfiability_test(
    proofs: ProofBundle,
    inst: Instance,
    partition: BlockPartition,
    params: VerifierParams,
    rng: np.random.Generator,
    choice: SatChoice | None = None,
) -> Verdict:
    if proofs.num_modes != inst.num_vars:
        raise ValueError("proofs and instance disagree on N")
    if choice is None:
        choice = draw_sat_choice(partition, params, rng)
    circuit, sat_modes = satisfiability_circuit(inst, partition, choice.block)
    events = [detect(_photons(proofs.slots[s]), circuit, params.imp, rng, inst.num_vars)
              for s in choice.slots]
    transcript = {
        "block": choice.block,
        "slots": list(choice.slots),
        "clicks": [list(e.clicks) for e in events],
    }
    if any(len(e) >= 2 for e in events):
        reason = Reason.MULTI_PHOTON
    elif any(c in sat_modes for e in events for c in e.clicks):
        reason = Reason.SAT_MODE_PHOTON
    elif all(len(e) == 0 for e in events):
        reason = Reason.NO_PHOTON
    else:
        reason = Reason.CLEAN_ACCEPT
    return Verdict(reason is Reason.CLEAN_ACCEPT, TestKind.SATISFIABILITY, reason, transcript)


def uniformity_outcomes(
    event: DetectionEvent, choice: UniformityChoice
) -> list[UniformityOutcome]:
    """Map clicks to ``(edge, b)``; clicks on the unmatched mode carry no outcome."""
    out = []
    for c in event.clicks:
        p, b = divmod(c, 2)
        if p < len(choice.edges):
            out.append(UniformityOutcome(choice.edges[p], b))
    return out


def uniformity_test(
    proofs: ProofBundle,
    params: VerifierParams,
    rng: np.random.Generator,
    choice: UniformityChoice | None = None,
) -> Verdict:
    n = proofs.num_modes
    if choice is None:
        choice = draw_matching(n, rng)
    circuit = uniformity_circuit(n, choice)
    events = [detect(_photons(slot), circuit, params.imp, rng, n) for slot in proofs.slots]
    outcomes = [uniformity_outcomes(e, choice) for e in events]
    transcript = {
        "matching": [list(e) for e in choice.edges],
        "unmatched": choice.unmatched,
        "clicks": [list(e.clicks) for e in events],
    }

    bits_seen: dict[tuple[int, int], set[int]] = {}
    slots_seen: dict[tuple[int, int], set[int]] = {}
    for s, outs in enumerate(outcomes):
        for o in outs:
            bits_seen.setdefault(o.edge, set()).add(o.b)
            slots_seen.setdefault(o.edge, set()).add(s)
    collisions = sorted(e for e, ss in slots_seen.items() if len(ss) >= 2)
    transcript["collisions"] = [list(e) for e in collisions]

    if any(len(e) >= 2 for e in events):
        reason = Reason.MULTI_PHOTON
    elif any(len(b) == 2 for b in bits_seen.values()):
        reason = Reason.INCOMPATIBLE
    elif all(len(e) == 0 for e in events):
        reason = Reason.NO_PHOTON
    elif not collisions:
        reason = Reason.NO_COLLISION
    else:
        reason = Reason.CLEAN_ACCEPT
    return Verdict(reason is Reason.CLEAN_ACCEPT, TestKind.UNIFORMITY, reason, transcript)


def symmetry_test(
    proofs: ProofBundle,
    params: VerifierParams,
    rng: np.random.Generator,
    choice: SymmetryChoice | None = None,
) -> Verdict:
    if len(proofs) < 2:
        raise ConfigurationError("symmetry test needs at least two copies")
    if choice is None:
        choice = draw_symmetry_choice(params, rng)
    n = proofs.num_modes
    circuit = pairing_circuit(n)
    events = []
    for a, b in choice.pairs:
        photons = [embed(p, 0, 2 * n) for p in proofs.slots[a]]
        photons += [embed(p, n, 2 * n) for p in proofs.slots[b]]
        events.append(detect(photons, circuit, params.imp, rng, 2 * n))
    transcript = {
        "pairs": [list(p) for p in choice.pairs],
        "clicks": [list(e.clicks) for e in events],
    }
    notes: tuple[str, ...] = ()
    if choice.clamped:
        notes = (f"symmetry pairs clamped to {len(choice.pairs)} (k={params.k})",)

    if any(len(e) > 2 for e in events):
        reason = Reason.MULTI_PHOTON
    elif any(is_coincidence(e) for e in events):
        reason = Reason.COINCIDENCE
    elif all(len(e) == 0 for e in events):
        reason = Reason.NO_PHOTON
    elif not any(len(e) == 2 for e in events):
        reason = Reason.INSUFFICIENT_PHOTONS
    else:
        reason = Reason.CLEAN_ACCEPT
    return Verdict(reason is Reason.CLEAN_ACCEPT, TestKind.SYMMETRY, reason, transcript, notes)


@functools.lru_cache(maxsize=64)
def default_partition(inst: Instance, seed: int | None = None) -> BlockPartition:
    """Block partition used when the caller supplies none (cached per instance)."""
    return partition_blocks(inst, seed)


# -- one round -----------------------------------------------------------------

def draw_choice(kind: TestKind, n: int, partition: BlockPartition, params: VerifierParams, rng):
    if kind is TestKind.SATISFIABILITY:
        return draw_sat_choice(partition, params, rng)
    if kind is TestKind.UNIFORMITY:
        return draw_matching(n, rng)
    return draw_symmetry_choice(params, rng)


def run_test(
    kind: TestKind,
    proofs: ProofBundle,
    inst: Instance,
    partition: BlockPartition,
    params: VerifierParams,
    rng: np.random.Generator,
    choice=None,
) -> Verdict:
    if kind is TestKind.SATISFIABILITY:
        return satisfiability_test(proofs, inst, partition, params, rng, choice)
    if kind is TestKind.UNIFORMITY:
        return uniformity_test(proofs, params, rng, choice)
    return symmetry_test(proofs, params, rng, choice)


def verify_once(
    strategy: ProverStrategy,
    inst: Instance,
    params: VerifierParams,
    rng: np.random.Generator,
    partition: BlockPartition | None = None,
    proofs: ProofBundle | None = None,
    test: TestKind | None = None,
) -> Verdict:
    """One round: pick a test uniformly (unless ``test`` is fixed), then run it.

    All of Arthur's random choices are drawn before the proofs are touched.
    """
    if partition is None:
        partition = default_partition(inst, params.partition_seed)
    kind = test if test is not None else TEST_KINDS[int(rng.integers(3))]
    choice = draw_choice(kind, inst.num_vars, partition, params, rng)
    if proofs is None:
        proofs = prepare_proofs(strategy, inst.num_vars, params.k)
    verdict = run_test(kind, proofs, inst, partition, params, rng, choice)
    if verdict.warnings:
        for w in verdict.warnings:
            warnings.warn(w, stacklevel=2)
    return verdict


def required_slots(kind: TestKind, params: VerifierParams) -> int:
    if kind is TestKind.SATISFIABILITY:
        return params.sat_slots
    if kind is TestKind.SYMMETRY:
        return 2 * params.sym_pairs
    return params.k


def check_strategy_slots(strategy: ProverStrategy, params: VerifierParams) -> None:
    """Fail early when a test could never run with ``params.k`` copies."""
    if params.sat_slots > params.k:
        raise ConfigurationError(
            f"satisfiability test needs {params.sat_slots} slots but only {params.k} copies exist"
        )
    if isinstance(strategy, TwoPhoton) and not 0 <= strategy.slot < params.k:
        raise ConfigurationError(f"two-photon slot {strategy.slot} outside 0..{params.k - 1}")


def strategy_states(strategy: ProverStrategy) -> Sequence[PhotonState]:
    """Single-photon states a strategy places in its slots (for reporting)."""
    if isinstance(strategy, ArbitraryStates):
        return strategy.states
    return ()
