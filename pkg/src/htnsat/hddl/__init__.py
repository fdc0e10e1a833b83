"""HDDL front end: parser, grounder and the plain-text ground format."""
from .ground_format import GroundFormatError, dump_ground, parse_ground
from .grounder import DEFAULT_CAP, GroundingError, ground
from .parser import (
    HddlParseError,
    LiftedAction,
    LiftedDomain,
    LiftedMethod,
    LiftedProblem,
    LiftedTask,
    parse,
)

__all__ = [
    "DEFAULT_CAP",
    "GroundFormatError",
    "GroundingError",
    "HddlParseError",
    "LiftedAction",
    "LiftedDomain",
    "LiftedMethod",
    "LiftedProblem",
    "LiftedTask",
    "dump_ground",
    "ground",
    "parse",
    "parse_ground",
]
