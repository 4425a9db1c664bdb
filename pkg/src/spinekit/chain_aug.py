"""Augmentability deciders for coloured chains.

A chain X is strongly augmentable on the right when X embeds elementarily
into X + Y for some non-empty Y, and weakly augmentable when X and X + Y
merely satisfy the same sentences.  Strong augmentability is exactly "no
maximum element"; weak augmentability holds exactly for chains equivalent
to B + (sum over w* of L), which is syntactically visible as a w* tail and
refutable at a finite rank when no proper initial segment reproduces the
chain's rank-k type.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from . import chain_expr as ce
from . import fo_chain as fo
from .chain_expr import Basic, ChainError, Empty, Fin, OrderExpr, Repeat, Sum


class Status(str, enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class AugVerdict:
    status: Status
    witness: Optional[OrderExpr] = None
    base: Optional[OrderExpr] = None  # the B of a B + (sum over w*) decomposition
    refutation_rank: Optional[int] = None
    reason: str = ""

    def __post_init__(self):
        if self.status is Status.YES and self.witness is not None:
            if isinstance(self.witness, Empty):
                raise ChainError("a Yes witness must be non-empty")


def _require_nonempty(x: OrderExpr) -> None:
    if isinstance(x, Empty):
        raise ChainError("augmentability is about non-empty chains")


def _tail_parts(norm: OrderExpr) -> tuple[OrderExpr, Optional[OrderExpr]]:
    """(prefix-or-Empty, last summand) of a normalized expression."""
    if isinstance(norm, Sum):
        return ce.concat(*norm.parts[:-1]), norm.parts[-1]
    return ce.EMPTY, norm


def _omega_tail_witness(norm: OrderExpr) -> Optional[OrderExpr]:
    _, last = _tail_parts(norm)
    if isinstance(last, Repeat) and last.shape == ce.OMEGA:
        return Repeat(ce.ZETA, last.body)
    if isinstance(last, Basic) and last.shape == ce.OMEGA:
        return Basic(ce.ZETA, last.colour)
    return None


def strongly_augmentable_right(x: OrderExpr) -> AugVerdict:
    """Yes iff the chain has no maximum.

    When the expression ends in an omega run of copies of B, the two-sided
    repetition of B is attached as an explicit witness; otherwise the
    decision is exact but the witness is omitted.
    """
    _require_nonempty(x)
    norm = ce.normalize(x)
    if ce.has_last(norm):
        return AugVerdict(Status.NO, reason="the chain has a maximum element")
    return AugVerdict(
        Status.YES,
        witness=_omega_tail_witness(norm),
        reason="no maximum element",
    )


def strongly_augmentable_left(x: OrderExpr) -> AugVerdict:
    v = strongly_augmentable_right(ce.reverse(x))
    w = ce.reverse(v.witness) if v.witness is not None else None
    return AugVerdict(v.status, witness=w, refutation_rank=v.refutation_rank, reason=v.reason)


def tw_check(x: OrderExpr, k: int) -> bool:
    """True iff some proper initial segment has the same rank-k type.

    Equivalently, every sentence of rank <= k true in the chain also holds
    in some closed initial segment below the maximum; the reduction goes
    through the rank-k characteristic sentence of the chain.
    """
    if k < 1:
        raise fo.KRankError("tw_check needs rank >= 1")
    if not ce.has_last(x):
        raise ChainError("tw_check presupposes a maximum element")
    whole = fo.ktype(x, k)
    for (init, final, _c) in fo.initial_segment_types(x, k):
        if final.is_empty:
            continue  # the split at the maximum itself
        if init is whole:
            return True
    return False


def weakly_augmentable_right(x: OrderExpr, k_max: int = fo.K_MAX_DEFAULT) -> AugVerdict:
    """Tri-state weak augmentability on the right.

    Yes via no-maximum (strong implies weak) or via a syntactic w* tail;
    No with a refutation rank k when no proper initial segment reproduces
    the rank-k type; Unknown otherwise.
    """
    _require_nonempty(x)
    norm = ce.normalize(x)
    if not ce.has_last(norm):
        return AugVerdict(
            Status.YES,
            witness=_omega_tail_witness(norm),
            reason="no maximum element (strongly augmentable)",
        )
    base, last = _tail_parts(norm)
    if isinstance(last, Repeat) and last.shape == ce.OMEGA_STAR:
        return AugVerdict(Status.YES, witness=last.body, base=base, reason="w* tail of copies")
    if isinstance(last, Basic) and last.shape == ce.OMEGA_STAR:
        return AugVerdict(
            Status.YES, witness=Fin((last.colour,)), base=base, reason="w* tail of points"
        )
    for k in range(1, k_max + 1):
        if not tw_check(norm, k):
            return AugVerdict(
                Status.NO,
                refutation_rank=k,
                reason=f"no proper initial segment matches the rank-{k} type",
            )
    return AugVerdict(
        Status.UNKNOWN,
        reason=f"initial segments reproduce all types up to rank {k_max}",
    )


def weakly_augmentable_left(x: OrderExpr, k_max: int = fo.K_MAX_DEFAULT) -> AugVerdict:
    v = weakly_augmentable_right(ce.reverse(x), k_max)
    return AugVerdict(
        v.status,
        witness=ce.reverse(v.witness) if v.witness is not None else None,
        base=ce.reverse(v.base) if v.base is not None else None,
        refutation_rank=v.refutation_rank,
        reason=v.reason,
    )
