"""Symbolic spines of ordered abelian groups and chain augmentability."""

from . import aug_decide, autodef, chain_aug, chain_expr, cli, fo_chain, oag_expr, spine
from .chain_expr import (
    Basic,
    Empty,
    Fin,
    OrderExpr,
    Repeat,
    Sum,
    eta,
    fin,
    normalize,
    omega,
    omega_star,
    reverse,
    zeta,
)
from .fo_chain import equiv_k, eval_sentence, ktype
from .oag_expr import Adjoin, DirectPair, Q, Rib, RibLeaf, Z, lex_sum, pair, z_local
from .spine import SpineChain, check_schmitt_axioms, spine as compute_spine

__version__ = "0.1.0"

__all__ = [
    "aug_decide",
    "autodef",
    "chain_aug",
    "chain_expr",
    "cli",
    "fo_chain",
    "oag_expr",
    "spine",
    "Basic",
    "Empty",
    "Fin",
    "OrderExpr",
    "Repeat",
    "Sum",
    "eta",
    "fin",
    "normalize",
    "omega",
    "omega_star",
    "reverse",
    "zeta",
    "equiv_k",
    "eval_sentence",
    "ktype",
    "Adjoin",
    "DirectPair",
    "Q",
    "Rib",
    "RibLeaf",
    "Z",
    "lex_sum",
    "pair",
    "z_local",
    "SpineChain",
    "check_schmitt_axioms",
    "compute_spine",
]
