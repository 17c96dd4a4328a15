"""rebox: ownership inference and safe-pointer translation for MiniC.

Pipeline: parse -> normalize -> ownership constraints -> SAT -> scheme
-> qualifiers -> retype/rewrite -> Rust-syntax text.
"""

from .constraints import ConstraintSystem, generate
from .frontend import normalize, parse_and_normalize
from .oracle import check_theorems, enumerate_models, run_concrete
from .parser import parse_program
from .paths import AccessPath, compute_k, enumerate_ap, is_prefix
from .qualifiers import infer_qualifiers
from .sat import (
    Infeasible, OwnershipScheme, encode_cnf, reduce_x3sat, solve_ownership,
    solve_sat,
)
from .translate import translate_program

__version__ = "0.1.0"

__all__ = [
    "AccessPath", "ConstraintSystem", "Infeasible", "OwnershipScheme",
    "check_theorems", "compute_k", "encode_cnf", "enumerate_ap",
    "enumerate_models", "generate", "infer_qualifiers", "is_prefix",
    "normalize", "parse_and_normalize", "parse_program", "reduce_x3sat",
    "run_concrete", "solve_ownership", "solve_sat", "translate_program",
]
