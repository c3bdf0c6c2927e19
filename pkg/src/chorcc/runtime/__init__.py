"""Executable semantics: reference interpreter, IR checker and endpoint simulator."""

from .ircheck import run_verification_ir
from .reference import run_choreography
from .report import Failure, Kind, RunReport, Verdict, heap_json, merge_and_compare
from .simulator import RANDOM, ROUND_ROBIN, run_endpoints
from .values import Ref, RuntimeFault, parse_params

__all__ = [
    "Failure", "Kind", "RANDOM", "ROUND_ROBIN", "Ref", "RunReport", "RuntimeFault", "Verdict",
    "heap_json", "merge_and_compare", "parse_params", "run_choreography", "run_endpoints",
    "run_verification_ir",
]
