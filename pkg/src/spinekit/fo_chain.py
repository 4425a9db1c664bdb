"""First-order equivalence of coloured chains up to a fixed quantifier rank.

The rank-k type of a chain is represented by its hereditary split set: the
set, over all points p, of triples (colour(p), rank-(k-1) type of the part
before p, rank-(k-1) type of the part after p).  Two chains satisfy the
same sentences of quantifier rank <= k iff their rank-k types are equal;
this is the classical game argument for ordered sums, where a move splits
the chain and the remaining rounds play out independently on the two
sides.  The rank-0 type is a single trivial value (a 0-round game
distinguishes nothing); emptiness is visible from rank 1 on as an empty
split set.

Types are hash-consed, so equality is identity and memoized composition is
cheap.  The shared tables behave as grow-only caches; entries are only
ever added, so concurrent readers always observe consistent values.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Iterable, Optional

from .chain_expr import (
    ETA,
    OMEGA,
    OMEGA_STAR,
    ZETA,
    Basic,
    ChainError,
    Empty,
    Fin,
    OrderExpr,
    Repeat,
    Sum,
    colours,
    normalize,
)

K_MAX_ENV = "SPINEKIT_KMAX"
K_MAX_DEFAULT = 4


class KRankError(ValueError):
    """Requested rank exceeds the configured complexity guard."""


class SentenceError(ValueError):
    """Malformed sentence for the requested operation."""


def k_max() -> int:
    return int(os.environ.get(K_MAX_ENV, str(K_MAX_DEFAULT)))


def _check_rank(k: int) -> None:
    if k < 0:
        raise KRankError("rank must be a natural number")
    if k > k_max():
        raise KRankError(
            f"rank {k} exceeds K_max={k_max()} (set {K_MAX_ENV} to raise the guard)"
        )


class KType:
    """Interned rank-k type. Compare with ``is`` / ``==`` interchangeably."""

    __slots__ = ("rank", "splits", "_hash", "_seq")

    def __init__(self, rank: int, splits, hash_: int, seq: int):
        self.rank = rank
        self.splits = splits  # frozenset of (colour, KType, KType); None at rank 0
        self._hash = hash_
        self._seq = seq

    def __hash__(self) -> int:
        return self._hash

    @property
    def is_empty(self) -> bool:
        if self.rank == 0:
            raise KRankError("rank-0 types do not track emptiness")
        return not self.splits

    def __repr__(self) -> str:
        if self.rank == 0:
            return "KType0"
        return f"KType(rank={self.rank}, splits={len(self.splits)})"


_TABLE: dict = {}
_SEQ = itertools.count()


def _mk(rank: int, splits) -> KType:
    key = (rank, splits)
    t = _TABLE.get(key)
    if t is None:
        t = KType(rank, splits, hash(key), next(_SEQ))
        _TABLE[key] = t
    return t


T0 = _mk(0, None)


def empty_type(rank: int) -> KType:
    """The rank-k type of the empty chain."""
    return T0 if rank == 0 else _mk(rank, frozenset())


_PROJECT: dict = {}


def project(t: KType) -> KType:
    """The rank-(k-1) type of any chain with rank-k type t."""
    if t.rank == 0:
        raise KRankError("rank-0 types have no projection")
    got = _PROJECT.get(t)
    if got is None:
        if t.rank == 1:
            got = T0
        else:
            got = _mk(
                t.rank - 1,
                frozenset((c, project(l), project(r)) for (c, l, r) in t.splits),
            )
        _PROJECT[t] = got
    return got


def _project_to(t: KType, rank: int) -> KType:
    while t.rank > rank:
        t = project(t)
    if t.rank != rank:
        raise KRankError("cannot raise the rank of a type")
    return t


_COMPOSE: dict = {}


def compose(a: KType, b: KType) -> KType:
    """Type of the concatenation of any chains with types a and b.

    Associative; the type of the empty chain is a two-sided identity.  A
    split of the concatenation lies in the left part (with the whole right
    part appended to its right residue) or symmetrically in the right part.
    """
    if a.rank != b.rank:
        raise KRankError(f"rank mismatch: {a.rank} vs {b.rank}")
    if a.rank == 0:
        return T0
    got = _COMPOSE.get((a, b))
    if got is None:
        pa, pb = project(a), project(b)
        splits = frozenset(
            itertools.chain(
                ((c, l, compose(r, pb)) for (c, l, r) in a.splits),
                ((c, compose(pa, l), r) for (c, l, r) in b.splits),
            )
        )
        got = _mk(a.rank, splits)
        _COMPOSE[(a, b)] = got
    return got


def compose_all(ts: Iterable[KType], rank: int) -> KType:
    out = empty_type(rank)
    for t in ts:
        out = compose(out, t)
    return out


def _powers(t: KType) -> list[KType]:
    """Distinct types of i-fold concatenations of t, i = 0, 1, 2, ...

    The sequence is eventually periodic since the type space at a fixed
    rank is finite; collection stops at the first revisit.
    """
    out: list[KType] = []
    seen: set[KType] = set()
    cur = empty_type(t.rank)
    while cur not in seen:
        seen.add(cur)
        out.append(cur)
        cur = compose(cur, t)
    return out


_KTYPE: dict = {}


def ktype(x: OrderExpr, k: int) -> KType:
    """Rank-k type of the denoted chain (k <= K_max)."""
    _check_rank(k)
    return _ktype(normalize(x), k)


def _ktype(x: OrderExpr, k: int) -> KType:
    # x is normalized; zeta shapes are gone.
    if k == 0:
        return T0
    got = _KTYPE.get((x, k))
    if got is not None:
        return got
    match x:
        case Empty():
            t = empty_type(k)
        case Fin(cs):
            splits = set()
            for i, c in enumerate(cs):
                left = Fin(cs[:i]) if i else Empty()
                right = Fin(cs[i + 1 :]) if i + 1 < len(cs) else Empty()
                splits.add((c, _ktype(left, k - 1), _ktype(right, k - 1)))
            t = _mk(k, frozenset(splits))
        case Sum(parts):
            t = compose_all((_ktype(p, k) for p in parts), k)
        case Basic(shape, c):
            t = _ktype(Repeat(shape, Fin((c,))), k)
        case Repeat(shape, body):
            b_full = _ktype(body, k)
            b_prev = _ktype(body, k - 1)
            self_prev = _ktype(x, k - 1)
            splits = set()
            if shape == OMEGA:
                # a point in copy i: i full copies before it, the whole
                # block again after it
                for p in _powers(b_prev):
                    for (c, l, r) in b_full.splits:
                        splits.add((c, compose(p, l), compose(r, self_prev)))
            elif shape == OMEGA_STAR:
                for p in _powers(b_prev):
                    for (c, l, r) in b_full.splits:
                        splits.add((c, compose(self_prev, l), compose(r, p)))
            elif shape == ETA:
                # densely many copies on both sides of every point
                for (c, l, r) in b_full.splits:
                    splits.add((c, compose(self_prev, l), compose(r, self_prev)))
            else:
                raise ChainError("zeta must be normalized away")
            t = _mk(k, frozenset(splits))
        case _:
            raise ChainError(f"not an OrderExpr: {x!r}")
    _KTYPE[(x, k)] = t
    return t


def equiv_k(
    x: OrderExpr,
    y: OrderExpr,
    k: int,
    alphabet: Optional[frozenset[str]] = None,
) -> bool:
    """Decide whether x and y satisfy the same rank-<=k sentences."""
    if alphabet is not None:
        extra = (colours(x) | colours(y)) - alphabet
        if extra:
            raise ChainError(f"colours outside the declared alphabet: {sorted(extra)}")
    return ktype(x, k) is ktype(y, k)


# ---------------------------------------------------------------------------
# Full-rank split enumeration (both residues kept at rank k)

_FULL: dict = {}


def _splits_full(x: OrderExpr, k: int) -> frozenset:
    """All (colour, type of part before p, type of part after p) at rank k."""
    got = _FULL.get((x, k))
    if got is not None:
        return got
    match x:
        case Empty():
            out: frozenset = frozenset()
        case Fin(cs):
            acc = set()
            for i, c in enumerate(cs):
                left = Fin(cs[:i]) if i else Empty()
                right = Fin(cs[i + 1 :]) if i + 1 < len(cs) else Empty()
                acc.add((c, _ktype(left, k), _ktype(right, k)))
            out = frozenset(acc)
        case Sum(parts):
            types = [_ktype(p, k) for p in parts]
            acc = set()
            for i, p in enumerate(parts):
                pre = compose_all(types[:i], k)
                post = compose_all(types[i + 1 :], k)
                for (c, l, r) in _splits_full(p, k):
                    acc.add((c, compose(pre, l), compose(r, post)))
            out = frozenset(acc)
        case Basic(shape, c):
            out = _splits_full(Repeat(shape, Fin((c,))), k)
        case Repeat(shape, body):
            whole = _ktype(x, k)
            b_full = _ktype(body, k)
            acc = set()
            if shape == OMEGA:
                for p in _powers(b_full):
                    for (c, l, r) in _splits_full(body, k):
                        acc.add((c, compose(p, l), compose(r, whole)))
            elif shape == OMEGA_STAR:
                for p in _powers(b_full):
                    for (c, l, r) in _splits_full(body, k):
                        acc.add((c, compose(whole, l), compose(r, p)))
            elif shape == ETA:
                for (c, l, r) in _splits_full(body, k):
                    acc.add((c, compose(whole, l), compose(r, whole)))
            else:
                raise ChainError("zeta must be normalized away")
            out = frozenset(acc)
        case _:
            raise ChainError(f"not an OrderExpr: {x!r}")
    _FULL[(x, k)] = out
    return out


def initial_segment_types(x: OrderExpr, k: int) -> frozenset:
    """Distinct (type of x_{<=p}, type of x_{>p}, colour at p) over all p.

    Finite by finiteness of the rank-k type space.
    """
    _check_rank(k)
    xn = normalize(x)
    out = set()
    for (c, l, r) in _splits_full(xn, k):
        out.add((compose(l, _ktype(Fin((c,)), k)), r, c))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Sentences


@dataclass(frozen=True)
class Sentence:
    pass


@dataclass(frozen=True)
class TrueF(Sentence):
    pass


@dataclass(frozen=True)
class FalseF(Sentence):
    pass


@dataclass(frozen=True)
class Lt(Sentence):
    a: str
    b: str


@dataclass(frozen=True)
class Eq(Sentence):
    a: str
    b: str


@dataclass(frozen=True)
class Col(Sentence):
    """Colour predicate: the point lies in one of the given colour classes."""

    var: str
    syms: frozenset[str]


@dataclass(frozen=True)
class Not(Sentence):
    body: Sentence


@dataclass(frozen=True)
class And(Sentence):
    parts: tuple[Sentence, ...]


@dataclass(frozen=True)
class Or(Sentence):
    parts: tuple[Sentence, ...]


@dataclass(frozen=True)
class Implies(Sentence):
    left: Sentence
    right: Sentence


@dataclass(frozen=True)
class Exists(Sentence):
    var: str
    body: Sentence


@dataclass(frozen=True)
class Forall(Sentence):
    var: str
    body: Sentence


TRUE = TrueF()
FALSE = FalseF()


def col(var: str, *syms: str) -> Col:
    return Col(var, frozenset(syms))


def le(a: str, b: str) -> Sentence:
    return Or((Lt(a, b), Eq(a, b)))


_QR: dict = {}


def qr(f: Sentence) -> int:
    """Quantifier rank."""
    got = _QR.get(id(f))
    if got is not None:
        return got
    match f:
        case TrueF() | FalseF() | Lt(_, _) | Eq(_, _) | Col(_, _):
            out = 0
        case Not(b):
            out = qr(b)
        case And(parts) | Or(parts):
            out = max((qr(p) for p in parts), default=0)
        case Implies(a, b):
            out = max(qr(a), qr(b))
        case Exists(_, b) | Forall(_, b):
            out = 1 + qr(b)
        case _:
            raise SentenceError(f"not a Sentence: {f!r}")
    _QR[id(f)] = out
    return out


_FV: dict = {}


def free_vars(f: Sentence) -> frozenset[str]:
    got = _FV.get(id(f))
    if got is not None:
        return got
    match f:
        case TrueF() | FalseF():
            out: frozenset[str] = frozenset()
        case Lt(a, b) | Eq(a, b):
            out = frozenset({a, b})
        case Col(v, _):
            out = frozenset({v})
        case Not(b):
            out = free_vars(b)
        case And(parts) | Or(parts):
            out = frozenset().union(*(free_vars(p) for p in parts)) if parts else frozenset()
        case Implies(a, b):
            out = free_vars(a) | free_vars(b)
        case Exists(v, b) | Forall(v, b):
            out = free_vars(b) - {v}
        case _:
            raise SentenceError(f"not a Sentence: {f!r}")
    _FV[id(f)] = out
    return out


class _Evaluator:
    """Model checker over the split-type representation.

    A configuration is an alternating list of interval types and pebbled
    points; a quantifier either reuses a pebbled point or splits one
    interval, spending one rank on all intervals.  Sound because, once a
    point is pebbled, the remaining rounds play out independently on the
    intervals it bounds.
    """

    def __init__(self):
        self.memo: dict = {}

    def eval(self, f: Sentence, intervals: tuple, points: tuple, env: dict) -> bool:
        match f:
            case TrueF():
                return True
            case FalseF():
                return False
            case Lt(a, b):
                return env[a] < env[b]
            case Eq(a, b):
                return env[a] == env[b]
            case Col(v, syms):
                return points[env[v]] in syms
            case Not(b):
                return not self.eval(b, intervals, points, env)
            case And(parts):
                return all(self.eval(p, intervals, points, env) for p in parts)
            case Or(parts):
                return any(self.eval(p, intervals, points, env) for p in parts)
            case Implies(a, b):
                return (not self.eval(a, intervals, points, env)) or self.eval(
                    b, intervals, points, env
                )
            case Exists(_, _) | Forall(_, _):
                return self._quant(f, intervals, points, env)
        raise SentenceError(f"not a Sentence: {f!r}")

    def _quant(self, f: Sentence, intervals: tuple, points: tuple, env: dict) -> bool:
        rank = qr(f)
        ints = tuple(_project_to(t, rank) for t in intervals)
        fv = free_vars(f)
        key = (
            id(f),
            ints,
            points,
            tuple(sorted((v, i) for v, i in env.items() if v in fv)),
        )
        got = self.memo.get(key)
        if got is not None:
            return got
        var, body, is_exists = (
            (f.var, f.body, True) if isinstance(f, Exists) else (f.var, f.body, False)
        )
        out = not is_exists
        down = tuple(project(t) for t in ints)
        for idx in range(len(points)):
            v = self.eval(body, down, points, {**env, var: idx})
            if v == is_exists:
                out = is_exists
                break
        else:
            done = False
            for j, t in enumerate(ints):
                for (c, l, r) in t.splits:
                    new_ints = down[:j] + (l, r) + down[j + 1 :]
                    new_points = points[:j] + (c,) + points[j:]
                    new_env = {w: (i + 1 if i >= j else i) for w, i in env.items()}
                    new_env[var] = j
                    v = self.eval(body, new_ints, new_points, new_env)
                    if v == is_exists:
                        out = is_exists
                        done = True
                        break
                if done:
                    break
        self.memo[key] = out
        return out


_EVALUATOR = _Evaluator()


def eval_sentence(x: OrderExpr, f: Sentence) -> bool:
    """Truth value of a closed sentence in the denoted chain."""
    if free_vars(f):
        raise SentenceError(f"sentence has free variables: {sorted(free_vars(f))}")
    r = qr(f)
    _check_rank(r)
    t = ktype(x, r)
    return _EVALUATOR.eval(f, (t,), (), {})


def relativize_le(f: Sentence, bound: str) -> Sentence:
    """The formula obtained by bounding every quantifier by <= bound.

    For any chain C and point m, C satisfies the result at m iff the
    closed initial segment C_{<=m} satisfies f.
    """
    match f:
        case TrueF() | FalseF() | Lt(_, _) | Eq(_, _) | Col(_, _):
            return f
        case Not(b):
            return Not(relativize_le(b, bound))
        case And(parts):
            return And(tuple(relativize_le(p, bound) for p in parts))
        case Or(parts):
            return Or(tuple(relativize_le(p, bound) for p in parts))
        case Implies(a, b):
            return Implies(relativize_le(a, bound), relativize_le(b, bound))
        case Exists(v, b):
            if v == bound:
                raise SentenceError("bound variable collides with the relativization bound")
            return Exists(v, And((le(v, bound), relativize_le(b, bound))))
        case Forall(v, b):
            if v == bound:
                raise SentenceError("bound variable collides with the relativization bound")
            return Forall(v, Implies(le(v, bound), relativize_le(b, bound)))
    raise SentenceError(f"not a Sentence: {f!r}")


def _sorted_splits(t: KType):
    return sorted(t.splits, key=lambda s: (s[0], s[1]._seq, s[2]._seq))


def hintikka_sentence(t: KType) -> Sentence:
    """A sentence of quantifier rank t.rank true exactly in chains of type t."""
    counter = itertools.count()

    def bounds(v: str, lo: Optional[str], hi: Optional[str]) -> list[Sentence]:
        out: list[Sentence] = []
        if lo is not None:
            out.append(Lt(lo, v))
        if hi is not None:
            out.append(Lt(v, hi))
        return out

    def go(t: KType, lo: Optional[str], hi: Optional[str]) -> Sentence:
        if t.rank == 0:
            return TRUE
        conj: list[Sentence] = []
        for (c, l, r) in _sorted_splits(t):
            v = f"_h{next(counter)}"
            conj.append(
                Exists(
                    v,
                    And(tuple(bounds(v, lo, hi)) + (col(v, c), go(l, lo, v), go(r, v, hi))),
                )
            )
        v = f"_h{next(counter)}"
        options = tuple(
            And((col(v, c), go(l, lo, v), go(r, v, hi))) for (c, l, r) in _sorted_splits(t)
        )
        guard = And(tuple(bounds(v, lo, hi))) if (lo or hi) else TRUE
        conj.append(Forall(v, Implies(guard, Or(options))))
        return And(tuple(conj))

    return go(t, None, None)
