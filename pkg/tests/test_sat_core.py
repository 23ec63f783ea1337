import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optiverify.sat import (
    BlockPartition,
    Clause,
    Instance,
    OracleCapError,
    ParseError,
    assignment_from_index,
    bits,
    brute_force_report,
    check_balanced,
    complement,
    evaluate_clause,
    evaluate_instance,
    find_satisfying_assignment,
    instance_from_clauses,
    parse_instance,
    partition_blocks,
    planted_instance,
    serialize_instance,
)


@st.composite
def instances(draw, max_vars=10, max_clauses=8):
    n = draw(st.integers(4, max_vars))
    clause = st.lists(st.integers(1, n), min_size=4, max_size=4, unique=True)
    clauses = draw(st.lists(clause, max_size=max_clauses))
    return instance_from_clauses(n, clauses)


def test_clause_is_canonical():
    assert Clause.of(4, 2, 3, 1).vars == (1, 2, 3, 4)
    with pytest.raises(ValueError):
        Clause.of(1, 1, 2, 3)
    with pytest.raises(ValueError):
        Clause.of(1, 2, 3)


def test_instance_rejects_out_of_range_and_unbalanced():
    with pytest.raises(ValueError):
        instance_from_clauses(4, [(1, 2, 3, 5)])
    with pytest.raises(ValueError):
        Instance(7, (Clause.of(1, 2, 3, 4), Clause.of(1, 5, 6, 7)), balance_bound=1)


@pytest.mark.parametrize("pattern", list(itertools.product((0, 1), repeat=4)))
def test_clause_truth_table(pattern):
    assert evaluate_clause(Clause.of(1, 2, 3, 4), pattern) == (sum(pattern) == 2)


@pytest.mark.parametrize("x,expected", [("1100", True), ("1000", False), ("1111", False)])
def test_evaluate_clause_examples(x, expected):
    assert evaluate_clause(Clause.of(1, 2, 3, 4), bits(x)) is expected


def test_evaluate_instance_examples():
    assert evaluate_instance(instance_from_clauses(4, [(1, 2, 3, 4)]), bits("1100")) == (1, 1)
    two = instance_from_clauses(5, [(1, 2, 3, 4), (1, 2, 3, 5)])
    assert evaluate_instance(two, bits("11000")) == (2, 1)
    assert evaluate_instance(two, bits("10000")) == (0, 0)
    with pytest.raises(ValueError):
        evaluate_instance(two, bits("1100"))


@settings(max_examples=40, deadline=None)
@given(instances(max_vars=8))
def test_complement_symmetry_exhaustive(inst):
    for i in range(2 ** inst.num_vars):
        x = assignment_from_index(i, inst.num_vars)
        assert evaluate_instance(inst, x) == evaluate_instance(inst, complement(x))


def test_parse_single_clause():
    inst = parse_instance("p 2of4 4 1\n1 2 3 4")
    assert inst.num_vars == 4
    assert inst.clauses == (Clause.of(1, 2, 3, 4),)


@pytest.mark.parametrize(
    "text,message,line",
    [
        ("p 2of4 4 1\n1 1 2 3", "repeated variable in clause at line 2", 2),
        ("p 2of4 4 1\n1 2 3", "expected 4 variables", 2),
        ("p 2of4 4 1\n1 2 3 9", "out of range", 2),
        ("p 2of5 4 1\n1 2 3 4", "malformed header at line 1", 1),
        ("c only a comment\n", "header", None),
        ("p 2of4 4 2\n1 2 3 4", "clause", None),
    ],
)
def test_parse_errors(text, message, line):
    with pytest.raises(ParseError, match=message) as err:
        parse_instance(text)
    if line is not None:
        assert err.value.line == line


def test_parse_keeps_order_duplicates_and_comments():
    text = "c header comment\np 2of4 6 3\n4 3 2 1\nc inline\n1 2 3 4\n3 4 5 6\n"
    inst = parse_instance(text)
    assert [c.vars for c in inst.clauses] == [(1, 2, 3, 4), (1, 2, 3, 4), (3, 4, 5, 6)]


@settings(max_examples=60, deadline=None)
@given(instances())
def test_serialize_round_trip(inst):
    text = serialize_instance(inst)
    again = parse_instance(text)
    assert again.num_vars == inst.num_vars and again.clauses == inst.clauses
    assert serialize_instance(again) == text


def test_brute_force_examples():
    r = brute_force_report(instance_from_clauses(4, [(1, 2, 3, 4)]))
    assert r.satisfiable and r.max_fraction == 1 and r.epsilon == 0
    # lowest index with two ones among x1..x4 is x1=x2=1
    assert r.best_assignment == (1, 1, 0, 0)
    empty = brute_force_report(Instance(3, ()))
    assert empty.satisfiable and empty.max_fraction == 1


def test_brute_force_equality_gadget_forces_equal_pair():
    inst = instance_from_clauses(5, [(1, 2, 3, 4), (1, 2, 3, 5), (1, 2, 4, 5)])
    assert brute_force_report(inst).satisfiable
    for i in range(32):
        x = assignment_from_index(i, 5)
        if evaluate_instance(inst, x)[1] == 1:
            assert x[0] == x[1]


def test_brute_force_unsatisfiable_reports_epsilon():
    # every 4-subset of 5 variables: all x_i would equal S - 2, so 4x = 2
    clauses = list(itertools.combinations(range(1, 6), 4))
    inst = instance_from_clauses(5, clauses)
    r = brute_force_report(inst)
    assert not r.satisfiable
    assert r.epsilon > 0
    assert evaluate_instance(inst, r.best_assignment)[1] == r.max_fraction


def test_brute_force_cap():
    with pytest.raises(OracleCapError, match="instance too large for oracle"):
        brute_force_report(Instance(25, ()))
    with pytest.raises(OracleCapError):
        brute_force_report(Instance(10, ()), cap=8)


@settings(max_examples=30, deadline=None)
@given(instances(max_vars=9, max_clauses=10))
def test_brute_force_matches_naive_scan(inst):
    best, best_x = Fraction(-1), None
    for i in range(2 ** inst.num_vars):
        x = assignment_from_index(i, inst.num_vars)
        frac = evaluate_instance(inst, x)[1]
        if frac > best:
            best, best_x = frac, x
    r = brute_force_report(inst)
    assert r.max_fraction == best
    assert r.best_assignment == best_x
    assert r.satisfiable == (best == 1)


@settings(max_examples=40, deadline=None)
@given(instances(max_vars=10, max_clauses=10))
def test_search_agrees_with_oracle(inst):
    w = find_satisfying_assignment(inst)
    assert (w is not None) == brute_force_report(inst).satisfiable
    if w is not None:
        assert evaluate_instance(inst, w)[1] == 1


def test_check_balanced_examples():
    disjoint = instance_from_clauses(8, [(1, 2, 3, 4), (5, 6, 7, 8)])
    shared = instance_from_clauses(7, [(1, 2, 3, 4), (1, 5, 6, 7)])
    assert check_balanced(disjoint, 1).balanced
    report = check_balanced(shared, 1)
    assert not report.balanced and report.occurrences[1] == 2
    assert check_balanced(shared, len(shared.clauses)).balanced
    with pytest.raises(ValueError):
        check_balanced(shared, 0)


def test_partition_examples():
    disjoint = instance_from_clauses(8, [(1, 2, 3, 4), (5, 6, 7, 8)])
    assert partition_blocks(disjoint).blocks == ((0, 1),)
    shared = instance_from_clauses(7, [(1, 2, 3, 4), (1, 5, 6, 7)])
    assert sorted(partition_blocks(shared).blocks) == [(0,), (1,)]


def two_balanced_instance(n: int, rng) -> Instance:
    # two random tilings of the variables by 4-sets: every variable occurs twice
    clauses = []
    for _ in range(2):
        order = rng.permutation(n) + 1
        clauses += [tuple(int(v) for v in order[i:i + 4]) for i in range(0, n, 4)]
    return instance_from_clauses(n, clauses)


def test_partition_bound_on_two_balanced_instances():
    rng = np.random.default_rng(11)
    for _ in range(20):
        inst = two_balanced_instance(16, rng)
        assert check_balanced(inst, 2).balanced
        part = partition_blocks(inst)
        part.validate(inst)
        assert len(part) <= 5


@settings(max_examples=60, deadline=None)
@given(instances(max_vars=12, max_clauses=12), st.integers(0, 2**32 - 1))
def test_partition_invariants_any_seed(inst, seed):
    part = partition_blocks(inst, seed)
    part.validate(inst)
    c = max(inst.occurrences().values(), default=1)
    assert len(part) <= 4 * (c - 1) + 1


def test_block_partition_validate_rejects_bad_blocks():
    inst = instance_from_clauses(7, [(1, 2, 3, 4), (1, 5, 6, 7)])
    with pytest.raises(ValueError):
        BlockPartition(((0, 1),)).validate(inst)
    with pytest.raises(ValueError):
        BlockPartition(((0,),)).validate(inst)


def test_planted_instance_is_satisfied_by_witness():
    rng = np.random.default_rng(5)
    for _ in range(20):
        inst, w = planted_instance(12, 9, rng)
        assert evaluate_instance(inst, w)[1] == 1


def test_helpers():
    assert bits("0101") == (0, 1, 0, 1)
    assert complement((0, 1, 1)) == (1, 0, 0)
    # x_i carries weight 2**(i-1)
    assert assignment_from_index(1, 3) == (1, 0, 0)
    with pytest.raises(ValueError):
        bits("01a")
