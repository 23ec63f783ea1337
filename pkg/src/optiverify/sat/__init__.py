from .core import (
    DEFAULT_ORACLE_CAP,
    Assignment,
    BalanceReport,
    BlockPartition,
    Clause,
    Instance,
    OracleCapError,
    ParseError,
    SatReport,
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
    random_instance,
    serialize_instance,
)
from .reduction import (
    CNF,
    GadgetError,
    VariableMap,
    cnf_brute_force,
    parse_dimacs,
    random_3sat,
    reduce_3sat,
    serialize_dimacs,
    verify_gadgets,
)
