"""Incremental SAT solving: CDCL session, AMO encodings, DIMACS I/O."""

from .solver import SatSession, SolverTimeout, SolverUsageError, luby
from .amo import (
    AmoConfig,
    encode_alo,
    encode_amo,
    PAIRWISE,
    BINARY,
    BIMANDER_HALF,
    BIMANDER_SQRT,
    SCHEMES,
)
from .dimacs import dump_dimacs, parse_dimacs, load_into_session

__all__ = [
    "SatSession",
    "SolverTimeout",
    "SolverUsageError",
    "luby",
    "AmoConfig",
    "encode_amo",
    "encode_alo",
    "PAIRWISE",
    "BINARY",
    "BIMANDER_HALF",
    "BIMANDER_SQRT",
    "SCHEMES",
    "dump_dimacs",
    "parse_dimacs",
    "load_into_session",
]
