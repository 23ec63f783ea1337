"""End-to-end acceptance checks, one test per criterion.

Each check runs under its runtime budget; a PASS/FAIL line per criterion is
printed in the terminal summary.
"""
import itertools
import json
import math

import numpy as np
import pytest

from optiverify.analysis import (
    collision_probability,
    exact_satisfiability_acceptance,
    monte_carlo_acceptance,
)
from optiverify.cli import main
from optiverify.photonics import (
    IDEAL,
    Circuit,
    FourModeMixer,
    ImperfectionParams,
    PhotonState,
    apply_circuit,
    encode_proof,
    equal_superposition,
    sample_single_photon,
    sample_symmetry_pair,
    two_photon_coincidence_prob,
)
from optiverify.protocol import (
    Honest,
    ProperAssignment,
    TestKind,
    TwoPhoton,
    Vacuum,
    VerifierParams,
    default_copies,
    default_partition,
    draw_sat_choice,
    draw_symmetry_choice,
    prepare_proofs,
    run_test,
)
from optiverify.sat import (
    assignment_from_index,
    brute_force_report,
    cnf_brute_force,
    evaluate_instance,
    find_satisfying_assignment,
    planted_instance,
    random_3sat,
    random_instance,
    reduce_3sat,
    serialize_instance,
    verify_gadgets,
)

RNG = np.random.default_rng


def four_sigma(count: int, trials: int, p: float) -> bool:
    sd = math.sqrt(p * (1 - p) / trials)
    return abs(count / trials - p) <= 4 * max(sd, 1 / trials)


def test_clause_truth_table(criterion):
    with criterion(1, "mixer truth table over all 16 clause patterns", 1.0):
        for n in (4, 16):
            mixer = Circuit(n, (FourModeMixer(0, 1, 2, 3),))
            for pattern in itertools.product((0, 1), repeat=4):
                x = list(pattern) + [0] * (n - 4)
                out = apply_circuit(encode_proof(x), mixer).amplitudes
                s = sum(1 - 2 * b for b in pattern)
                # closed form of the four output intensities, derived by hand
                signs = [1 - 2 * b for b in pattern]
                expected = [
                    (signs[0] + signs[1] + signs[2] + signs[3]) ** 2 / (4 * n),
                    (signs[0] + signs[1] - signs[2] - signs[3]) ** 2 / (4 * n),
                    (signs[0] - signs[1] + signs[2] - signs[3]) ** 2 / (4 * n),
                    (signs[0] - signs[1] - signs[2] + signs[3]) ** 2 / (4 * n),
                ]
                np.testing.assert_allclose(np.abs(out[:4]) ** 2, expected, atol=1e-10)
                p_sat = abs(out[0]) ** 2
                assert abs(p_sat - s * s / (4 * n)) < 1e-10
                assert (p_sat < 1e-10) == (sum(pattern) == 2)


def test_honest_completeness_ideal(criterion):
    with criterion(2, "honest completeness, N=16 K=8, ideal", 30.0):
        inst, w = planted_instance(16, 8, RNG(2))
        assert evaluate_instance(inst, w)[1] == 1
        trials = 10_000
        for kind in (TestKind.SATISFIABILITY, TestKind.SYMMETRY):
            stats = monte_carlo_acceptance(Honest(w), inst, VerifierParams(k=8, seed=20), kind, trials)
            assert stats.accepts == trials, kind
        stats = monte_carlo_acceptance(Honest(w), inst, VerifierParams(k=8, seed=21),
                                       TestKind.UNIFORMITY, trials)
        assert four_sigma(stats.accepts, trials, collision_probability(16, 8))


def unsatisfiable_desk_instance():
    for seed in itertools.count():
        inst = random_instance(12, 10, RNG(seed))
        if not brute_force_report(inst).satisfiable:
            return inst


def test_proper_state_soundness(criterion):
    with criterion(3, "proper-state cheaters match exact rejection", 120.0):
        inst = unsatisfiable_desk_instance()
        part = default_partition(inst)
        rng = RNG(3)
        trials = 10_000
        for j in range(10):
            x = assignment_from_index(int(rng.integers(2 ** inst.num_vars)), inst.num_vars)
            assert evaluate_instance(inst, x)[1] < 1
            exact = float(exact_satisfiability_acceptance(x, inst, part))
            stats = monte_carlo_acceptance(ProperAssignment(x), inst, VerifierParams(k=2, seed=300 + j),
                                           TestKind.SATISFIABILITY, trials)
            assert four_sigma(trials - stats.accepts, trials, 1 - exact)


def test_swap_law(criterion):
    with criterion(4, "two-photon coincidence law", 60.0):
        rng = RNG(4)
        for n in (2, 8, 32):
            for _ in range(100):
                psi = PhotonState.normalized(rng.normal(size=n))
                phi = PhotonState.normalized(rng.normal(size=n))
                expected = (1 - abs(psi.inner(phi)) ** 2) / 2
                assert abs(two_photon_coincidence_prob(psi, phi) - expected) < 1e-10
        samples = 100_000
        psi = PhotonState.normalized(rng.normal(size=8))
        hits = sum(sample_symmetry_pair(psi, psi, IDEAL, rng)[1] for _ in range(samples))
        assert hits == 0
        a, b = encode_proof((0, 0, 0, 0, 0, 0, 0, 0)), encode_proof((0, 0, 0, 0, 1, 1, 1, 1))
        hits = sum(sample_symmetry_pair(a, b, IDEAL, rng)[1] for _ in range(samples))
        assert four_sigma(hits, samples, 0.5)


def test_photon_number_rule(criterion):
    with criterion(5, "vacuum and two-photon proofs always rejected", 30.0):
        inst, w = planted_instance(16, 8, RNG(5))
        part = default_partition(inst)
        params = VerifierParams(k=8)
        psi = encode_proof(w)
        rng = RNG(50)
        trials = 10_000
        for strategy in (Vacuum(), TwoPhoton(2, psi, psi, w)):
            proofs = prepare_proofs(strategy, 16, 8)
            # the two-photon slot is forced into the measured selection
            must = 2 if isinstance(strategy, TwoPhoton) else None
            for kind in (TestKind.SATISFIABILITY, TestKind.SYMMETRY):
                accepts = 0
                for _ in range(trials):
                    if kind is TestKind.SATISFIABILITY:
                        choice = draw_sat_choice(part, params, rng, must_include=must)
                    else:
                        choice = draw_symmetry_choice(params, rng, must_include=must)
                    accepts += run_test(kind, proofs, inst, part, params, rng, choice).accept
                assert accepts == 0, (strategy, kind)


def test_dark_count_formula(criterion):
    with criterion(6, "dark-count click frequency", 10.0):
        imp = ImperfectionParams(eta=0.0, p_dark=1e-3)
        rng = RNG(6)
        state = equal_superposition(100)
        trials = 100_000
        fired = sum(len(sample_single_photon(state, imp, rng)) > 0 for _ in range(trials))
        assert four_sigma(fired, trials, 1 - (1 - 1e-3) ** 100)


def test_worked_numbers(criterion, capsys):
    with criterion(7, "estimate for N=512: 46 photons, exponent above 100", 1.0):
        assert main(["estimate", "512", "--delta", "1", "--gamma", "2"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["resources"]["total_photons"] == 46
        exponent = record["hardness"]["classical_exponent"]
        assert exponent > 100
        assert exponent == pytest.approx(512 - 2 * math.sqrt(512) * 9, abs=1e-9)
        assert round(exponent, 1) == 104.7


def test_reduction_soundness(criterion):
    with criterion(8, "3SAT reductions equisatisfiable; gadgets verified", 60.0):
        assert all(verify_gadgets().values())
        rng = RNG(8)
        outcomes = []
        for _ in range(50):
            n = int(rng.integers(1, 7))
            cnf = random_3sat(n, int(rng.integers(1, 5 * n + 1)), rng)
            expected = cnf_brute_force(cnf) is not None
            inst, vmap = reduce_3sat(cnf)
            w = find_satisfying_assignment(inst, vmap.search_order)
            assert (w is not None) == expected
            if w is not None:
                assert evaluate_instance(inst, w)[1] == 1
                assert cnf.evaluate(vmap.decode(w))
            if inst.num_vars <= 24:
                assert brute_force_report(inst).satisfiable == expected
            outcomes.append(expected)
        assert any(outcomes) and not all(outcomes)


def test_lossy_completeness(criterion):
    with criterion(9, "honest acceptance >= 0.9 per test at eta=0.5", 60.0):
        inst, w = planted_instance(16, 8, RNG(9))
        eta = 0.5
        params = VerifierParams(k=default_copies(16, eta), imp=ImperfectionParams(eta=eta), seed=90)
        for kind in (TestKind.SATISFIABILITY, TestKind.UNIFORMITY, TestKind.SYMMETRY):
            stats = monte_carlo_acceptance(Honest(w), inst, params, kind, 10_000)
            assert stats.estimate >= 0.9, (kind, stats.estimate)


def test_determinism(criterion, tmp_path, capsys):
    with criterion(10, "verify output byte-identical for equal seeds and any thread count", 30.0):
        inst, _ = planted_instance(16, 8, RNG(10))
        path = tmp_path / "inst.2of4"
        path.write_text(serialize_instance(inst))
        outputs = []
        for threads in (1, 1, 4):
            out = tmp_path / f"run{len(outputs)}.json"
            code = main(["verify", "--instance", str(path), "--trials", "3000", "--seed", "2024",
                         "--eta", "0.8", "--dark", "0.001", "--visibility", "0.95",
                         "--threads", str(threads), "--transcripts", "--out", str(out)])
            assert code == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]
