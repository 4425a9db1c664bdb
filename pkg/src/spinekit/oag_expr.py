"""Symbolic ordered abelian groups as lexicographic sums of rank-1 ribs.

A group expression denotes a lexicographic sum, over a symbolic index
chain, of archimedean subgroups of the rationals (ribs), optionally with a
constant diagonal adjoined to an omega-indexed run of integer ribs.
Convex subgroups of such sums are exactly the end segments of the index
("tails", holding the small elements), so convex-subgroup values are
represented as cuts of the index.

Elements have finite support plus integer multiples of adjoined diagonals;
an element of an adjoined block decomposes uniquely as h + k*d with h of
finite support, which yields exact divisibility and fundament computations
for every k (validated against the cut-search oracle in the test suite).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Union

from . import chain_expr as ce
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
    Position,
    Repeat,
    Sum,
)


class GroupError(ValueError):
    """Malformed group expression, element, or unsupported input."""


class UnsupportedError(GroupError):
    """Input outside the supported expression class."""


def prime_factors(n: int) -> dict[int, int]:
    if n < 1:
        raise GroupError("positive integer expected")
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


# ---------------------------------------------------------------------------
# Ribs


@dataclass(frozen=True)
class Rib:
    """A rank-1 subgroup of Q: Z, Q, or a localization Z_(P).

    nondiv is the set of primes by which the rib is not divisible; None
    stands for all primes (the rib is Z, the only discrete case).
    """

    nondiv: Optional[frozenset[int]]
    discrete: bool = False

    def __post_init__(self):
        if self.discrete != (self.nondiv is None):
            raise GroupError("Z is the unique discrete rib (all primes nondivisible)")
        if self.nondiv is not None:
            for p in self.nondiv:
                if prime_factors(p) != {p: 1}:
                    raise GroupError(f"{p} is not prime")

    def p_divisible(self, p: int) -> bool:
        return self.nondiv is not None and p not in self.nondiv

    def n_divisible(self, n: int) -> bool:
        return all(self.p_divisible(p) for p in prime_factors(n))

    def contains(self, v: Fraction) -> bool:
        v = Fraction(v)
        if self.nondiv is None:
            return v.denominator == 1
        return all(v.denominator % p for p in self.nondiv)

    def value_n_divisible(self, v: Fraction, n: int) -> bool:
        """Whether v/n still lies in the rib."""
        return self.contains(Fraction(v) / n)

    def beta(self, p: int) -> int:
        """dim of rib/(p*rib) over the p-element field: 1 iff not p-divisible."""
        return 0 if self.p_divisible(p) else 1

    @property
    def name(self) -> str:
        if self.nondiv is None:
            return "Z"
        if not self.nondiv:
            return "Q"
        return f"Z_({','.join(str(p) for p in sorted(self.nondiv))})"

    def __repr__(self) -> str:
        return self.name


Z = Rib(None, True)
Q = Rib(frozenset())


def z_local(*primes: int) -> Rib:
    if not primes:
        raise GroupError("Z_(P) needs at least one prime")
    return Rib(frozenset(primes))


# ---------------------------------------------------------------------------
# Group expressions


@dataclass(frozen=True)
class GroupExpr:
    pass


@dataclass(frozen=True)
class RibLeaf(GroupExpr):
    rib: Rib


@dataclass(frozen=True)
class LexSum(GroupExpr):
    """Lexicographic sum over an index chain; each colour names a summand."""

    index: OrderExpr
    assign: tuple[tuple[str, GroupExpr], ...]

    def __post_init__(self):
        if isinstance(self.index, Empty):
            raise GroupError("lexicographic sum needs a non-empty index")
        # positions and structural walks address the normal form
        object.__setattr__(self, "index", ce.normalize(self.index))
        missing = ce.colours(self.index) - {c for c, _ in self.assign}
        if missing:
            raise GroupError(f"no summand assigned to colours {sorted(missing)}")

    def summand(self, colour: str) -> GroupExpr:
        for c, g in self.assign:
            if c == colour:
                return g
        raise GroupError(f"no summand for colour {colour!r}")


@dataclass(frozen=True)
class DirectPair(GroupExpr):
    """Finite lexicographic sum, dominant summand first."""

    parts: tuple[GroupExpr, ...]

    def __post_init__(self):
        if len(self.parts) < 2:
            raise GroupError("direct pair needs at least two summands")


@dataclass(frozen=True)
class Adjoin(GroupExpr):
    """The omega-indexed sum of Z ribs with the constant-c diagonal adjoined."""

    c: int

    def __post_init__(self):
        if self.c < 2:
            raise GroupError("adjoined constant must be at least 2")

    @property
    def base(self) -> GroupExpr:
        return LexSum(Basic(OMEGA, "z"), (("z", RibLeaf(Z)),))


GroupLike = Union[GroupExpr, Rib]


def lex_sum(index: OrderExpr, assign: Union[Rib, GroupExpr, Mapping[str, GroupLike]]) -> LexSum:
    """Build a LexSum; a bare rib or group is assigned to every colour."""
    cols = sorted(ce.colours(index))
    if isinstance(assign, (Rib, GroupExpr)):
        assign = {c: assign for c in cols}
    items = tuple(
        (c, RibLeaf(g) if isinstance(g, Rib) else g) for c, g in sorted(assign.items())
    )
    return LexSum(index, items)


def pair(*parts: GroupLike) -> DirectPair:
    return DirectPair(tuple(RibLeaf(p) if isinstance(p, Rib) else p for p in parts))


def all_ribs(g: GroupExpr) -> Iterator[Rib]:
    match g:
        case RibLeaf(r):
            yield r
        case LexSum(_, assign):
            for _, sub in assign:
                yield from all_ribs(sub)
        case DirectPair(parts):
            for p in parts:
                yield from all_ribs(p)
        case Adjoin(_):
            yield Z
        case _:
            raise GroupError(f"not a GroupExpr: {g!r}")


def adjoin_constants(g: GroupExpr) -> list[int]:
    match g:
        case RibLeaf(_):
            return []
        case LexSum(_, assign):
            return [c for _, sub in assign for c in adjoin_constants(sub)]
        case DirectPair(parts):
            return [c for p in parts for c in adjoin_constants(p)]
        case Adjoin(c):
            return [c]
    raise GroupError(f"not a GroupExpr: {g!r}")


def relevant_primes(g: GroupExpr) -> list[int]:
    """Primes that can distinguish spines of this group.

    Finite non-divisibility sets and primes of adjoined constants, plus one
    representative extra prime when an all-primes rib (Z) occurs: every
    prime outside the named ones acts identically on such a group.
    """
    named: set[int] = set()
    has_all = False
    for r in all_ribs(g):
        if r.nondiv is None:
            has_all = True
        else:
            named |= r.nondiv
    for c in adjoin_constants(g):
        named |= set(prime_factors(c))
    if has_all:
        for p in itertools.count(2):
            if prime_factors(p) == {p: 1} and p not in named:
                named.add(p)
                break
    return sorted(named) if named else [2]


def last_component(g: GroupExpr) -> Optional[GroupExpr]:
    """The summand holding the final archimedean class, if there is one."""
    match g:
        case RibLeaf(_) | Adjoin(_):
            return g
        case DirectPair(parts):
            return last_component(parts[-1])
        case LexSum(index, _):
            if not ce.has_last(index):
                return None
            c = ce.last_colour(index)
            return last_component(g.summand(c))
    raise GroupError(f"not a GroupExpr: {g!r}")


def last_component_path(g: GroupExpr) -> Optional[tuple[GroupExpr, GPos]]:
    """Last component together with the group-step path addressing it."""
    match g:
        case RibLeaf(_) | Adjoin(_):
            return g, ()
        case DirectPair(parts):
            sub = last_component_path(parts[-1])
            if sub is None:
                return None
            return sub[0], (("part", len(parts) - 1),) + sub[1]
        case LexSum(index, _):
            if not ce.has_last(index):
                return None
            cp = _index_last(index)
            sub = last_component_path(g.summand(ce.colour_at(index, cp)))
            if sub is None:
                return None
            return sub[0], (("at", cp),) + sub[1]
    raise GroupError(f"not a GroupExpr: {g!r}")


def _index_last(ix: OrderExpr) -> Position:
    match ix:
        case Fin(cs):
            return Position((), len(cs) - 1)
        case Sum(parts):
            sub = _index_last(parts[-1])
            return Position((("child", len(parts) - 1),) + sub.steps, sub.offset)
        case Basic(_, _):
            return Position((("copy", 0),), 0)  # w*: coordinate 0 is the top
        case Repeat(_, body):
            sub = _index_last(body)
            return Position((("copy", 0),) + sub.steps, sub.offset)
    raise ChainError(f"bad index: {ix!r}")


def last_position(g: GroupExpr) -> Optional[GPos]:
    """The final (least dominant) index position, when one exists."""
    res = last_component_path(g)
    if res is None:
        return None
    comp, path = res
    if isinstance(comp, RibLeaf):
        return path
    return None  # adjoined blocks have no last coordinate


def has_min_positive(g: GroupExpr) -> bool:
    """True iff the group has a minimum positive element (last rib is Z)."""
    last = last_component(g)
    return isinstance(last, RibLeaf) and last.rib.discrete


def _pdiv_summary(g: GroupExpr, p: int) -> tuple[bool, bool]:
    """(entirely p-divisible, has a non-trivial p-divisible tail)."""

    def comb(l, r):
        return (l[0] and r[0], r[1])

    def chain(ix: OrderExpr, owner: LexSum):
        match ix:
            case Fin(cs):
                out = (True, True)
                started = False
                for c in cs:
                    cur = _pdiv_summary(owner.summand(c), p)
                    out = cur if not started else comb(out, cur)
                    started = True
                return out
            case Sum(parts):
                out = (True, True)
                started = False
                for part in parts:
                    cur = chain(part, owner)
                    out = cur if not started else comb(out, cur)
                    started = True
                return out
            case Basic(shape, c):
                sub = _pdiv_summary(owner.summand(c), p)
                return _shape_pdiv(shape, sub)
            case Repeat(shape, body):
                sub = chain(body, owner)
                return _shape_pdiv(shape, sub)
        raise GroupError(f"bad index: {ix!r}")

    def _shape_pdiv(shape, sub):
        if shape == OMEGA_STAR:
            return (sub[0], sub[1])
        # any end segment of an w/zeta/eta indexed sum contains full copies
        return (sub[0], sub[0])

    match g:
        case RibLeaf(r):
            d = r.p_divisible(p)
            return (d, d)
        case DirectPair(parts):
            out = _pdiv_summary(parts[0], p)
            for part in parts[1:]:
                out = comb(out, _pdiv_summary(part, p))
            return out
        case LexSum(index, _):
            return chain(index, g)
        case Adjoin(_):
            return (False, False)
    raise GroupError(f"not a GroupExpr: {g!r}")


def has_p_divisible_tail(g: GroupExpr, p: int) -> bool:
    """Whether the group has a non-trivial p-divisible convex subgroup."""
    return _pdiv_summary(g, p)[1]


# ---------------------------------------------------------------------------
# Positions within a group's index

# A group position (gpos) is a tuple of steps:
#   ("part", i)        into a DirectPair summand
#   ("at", Position)   at a point of a LexSum index
#   ("coord", i)       at the i-th coordinate of an Adjoin block
# ending at a rib.  A block path is a gpos prefix addressing an Adjoin node.

GPos = tuple


def rib_at(g: GroupExpr, pos: GPos) -> Rib:
    node: GroupExpr = g
    steps = list(pos)
    while True:
        match node:
            case RibLeaf(r):
                if steps:
                    raise GroupError(f"path continues past a rib: {steps!r}")
                return r
            case DirectPair(parts):
                kind, i = steps[0]
                if kind != "part" or not 0 <= i < len(parts):
                    raise GroupError(f"bad step {steps[0]!r}")
                node, steps = parts[i], steps[1:]
            case LexSum(index, _):
                kind, cp = steps[0]
                if kind != "at":
                    raise GroupError(f"bad step {steps[0]!r}")
                node, steps = node.summand(ce.colour_at(index, cp)), steps[1:]
            case Adjoin(_):
                kind, i = steps[0]
                if kind != "coord" or steps[1:] or not (isinstance(i, int) and i >= 0):
                    raise GroupError(f"bad step {steps[0]!r}")
                return Z
            case _:
                raise GroupError(f"not a GroupExpr: {node!r}")


def gpos_compare(g: GroupExpr, a: GPos, b: GPos) -> int:
    rib_at(g, a), rib_at(g, b)  # validate
    node: GroupExpr = g
    sa, sb = list(a), list(b)
    while sa and sb:
        (ka, va), (kb, vb) = sa[0], sb[0]
        if ka != kb:
            raise GroupError("positions address different structure")
        if va != vb:
            if ka == "at":
                assert isinstance(node, LexSum)
                return ce.position_compare(node.index, va, vb)
            return -1 if va < vb else 1
        match node:
            case DirectPair(parts):
                node = parts[va]
            case LexSum(index, _):
                node = node.summand(ce.colour_at(index, va))
            case Adjoin(_):
                pass
        sa, sb = sa[1:], sb[1:]
    if sa or sb:
        raise GroupError("positions have different depths")
    return 0


def is_finite_group(g: GroupExpr) -> bool:
    match g:
        case RibLeaf(_):
            return True
        case DirectPair(parts):
            return all(is_finite_group(p) for p in parts)
        case LexSum(index, assign):
            return ce.is_finite(index) and all(is_finite_group(s) for _, s in assign)
        case Adjoin(_):
            return False
    raise GroupError(f"not a GroupExpr: {g!r}")


def finite_positions(g: GroupExpr) -> list[tuple[GPos, Rib]]:
    """All index positions of a finite group, dominant first."""
    match g:
        case RibLeaf(r):
            return [((), r)]
        case DirectPair(parts):
            out = []
            for i, p in enumerate(parts):
                out.extend(((("part", i),) + q, r) for q, r in finite_positions(p))
            return out
        case LexSum(index, _):
            out = []
            for cp, colour in ce.materialize(index):
                sub = finite_positions(g.summand(colour))
                out.extend(((("at", cp),) + q, r) for q, r in sub)
            return out
        case Adjoin(_):
            raise GroupError("adjoined groups have an infinite index")
    raise GroupError(f"not a GroupExpr: {g!r}")


def _has_position_after(g: GroupExpr, pos: GPos) -> bool:
    node: GroupExpr = g
    steps = list(pos)
    later = False
    while steps and not later:
        kind, v = steps[0]
        match node:
            case DirectPair(parts):
                later = v < len(parts) - 1
                node = parts[v]
            case LexSum(index, _):
                later = not isinstance(ce.suffix_after(index, v), Empty)
                node = node.summand(ce.colour_at(index, v))
            case Adjoin(_):
                return True  # always more coordinates
        steps = steps[1:]
    return later


# ---------------------------------------------------------------------------
# Convex subgroup references


@dataclass(frozen=True)
class ConvexRef:
    """A convex subgroup of a group in the supported class.

    kind "zero"/"whole" are the trivial bounds; "after"/"from" are tails of
    the index cut at a position (open/closed on the dominant side);
    "limit" is the tail starting at the addressed sub-block boundary (no
    adjacent position realizes the cut); "fromlimit" is its closed dual
    arising from upward regular extension.
    """

    kind: str
    pos: Optional[tuple] = None

    def __repr__(self) -> str:
        if self.kind in ("zero", "whole"):
            return f"ConvexRef({self.kind})"
        return f"ConvexRef({self.kind}, {self.pos!r})"


ZERO = ConvexRef("zero")
WHOLE = ConvexRef("whole")


class NotApplicable:
    """Marker: the element is n-divisible, so no fundament is realized."""

    _inst: "NotApplicable | None" = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NotApplicable"


NOT_APPLICABLE = NotApplicable()


def tail_after(g: GroupExpr, pos: GPos) -> ConvexRef:
    return ConvexRef("after", tuple(pos)) if _has_position_after(g, pos) else ZERO


def tail_from(g: GroupExpr, pos: GPos) -> ConvexRef:
    return ConvexRef("from", tuple(pos))


def element_in_ref(g: GroupExpr, x: "GroupElement", ref: ConvexRef) -> bool:
    """Membership of an element in the referenced convex subgroup."""
    if ref.kind == "whole":
        return True
    if x.is_zero():
        return True
    if ref.kind == "zero":
        return False
    dom = dominant_position(g, x)
    if ref.kind == "after":
        return gpos_compare(g, dom, ref.pos) > 0
    if ref.kind == "from":
        return gpos_compare(g, dom, ref.pos) >= 0
    raise UnsupportedError(f"membership in {ref.kind} cuts is not position-comparable")


# ---------------------------------------------------------------------------
# Elements


@dataclass(frozen=True)
class GroupElement:
    """Finite-support vector plus integer diagonal multiples per Adjoin block."""

    group: GroupExpr
    coords: tuple[tuple[GPos, Fraction], ...] = ()
    diags: tuple[tuple[GPos, int], ...] = ()

    def __post_init__(self):
        for pos, v in self.coords:
            r = rib_at(self.group, pos)
            if not r.contains(v):
                raise GroupError(f"{v} is not an element of {r.name} at {pos!r}")
        for path, k in self.diags:
            node = _node_at(self.group, path)
            if not isinstance(node, Adjoin):
                raise GroupError(f"{path!r} does not address an adjoined block")
            if k == 0:
                raise GroupError("zero diagonal multiples must be dropped")

    def coord_map(self) -> dict[GPos, Fraction]:
        return dict(self.coords)

    def diag_map(self) -> dict[GPos, int]:
        return dict(self.diags)

    def is_zero(self) -> bool:
        return not self.coords and not self.diags


def _node_at(g: GroupExpr, path: GPos) -> GroupExpr:
    node = g
    for kind, v in path:
        match node:
            case DirectPair(parts):
                node = parts[v]
            case LexSum(index, _):
                node = node.summand(ce.colour_at(index, v))
            case _:
                raise GroupError(f"bad block path {path!r}")
    return node


def element(
    g: GroupExpr,
    coords: Mapping[GPos, Union[int, Fraction]] = (),
    diags: Mapping[GPos, int] = (),
) -> GroupElement:
    cs = tuple(
        sorted(
            ((tuple(p), Fraction(v)) for p, v in dict(coords).items() if v != 0),
            key=lambda t: t[0],
        )
    )
    ds = tuple(sorted((tuple(p), k) for p, k in dict(diags).items() if k != 0))
    return GroupElement(g, cs, ds)


def zero(g: GroupExpr) -> GroupElement:
    return element(g)


def unit(g: GroupExpr, pos: GPos, v: Union[int, Fraction] = 1) -> GroupElement:
    return element(g, {tuple(pos): v})


def diagonal(g: GroupExpr, path: GPos = (), k: int = 1) -> GroupElement:
    return element(g, {}, {tuple(path): k})


def add(a: GroupElement, b: GroupElement) -> GroupElement:
    if a.group != b.group:
        raise GroupError("elements of different groups")
    cs = a.coord_map()
    for p, v in b.coords:
        cs[p] = cs.get(p, Fraction(0)) + v
    ds = a.diag_map()
    for p, k in b.diags:
        ds[p] = ds.get(p, 0) + k
    return element(a.group, cs, ds)


def negate(a: GroupElement) -> GroupElement:
    return element(a.group, {p: -v for p, v in a.coords}, {p: -k for p, k in a.diags})


def scale(a: GroupElement, m: int) -> GroupElement:
    return element(a.group, {p: v * m for p, v in a.coords}, {p: k * m for p, k in a.diags})


def _block_events(
    g: GroupExpr, coords: dict, diags: dict, path: GPos
) -> Iterator[tuple[GPos, Fraction, Rib, Optional[tuple]]]:
    """Effective coordinates of the element in index order.

    Yields (gpos, value, rib, adjoin_info); for adjoined blocks the scan
    covers the support plus one coordinate beyond it (values are constant
    k*c from there on) and adjoin_info carries (path, k, c, is_tail).
    """
    match g:
        case RibLeaf(_):
            v = coords.get(path)
            if v:
                yield path, v, rib_at(g, ()), None
        case DirectPair(parts):
            for i, part in enumerate(parts):
                sub = path + (("part", i),)
                yield from _block_events(part, coords, diags, sub)
        case LexSum(index, _):
            here = sorted(
                (p for p in coords if len(p) > len(path) and p[: len(path)] == path),
                key=lambda p: _CmpKey(g, path, p),
            )
            seen = []
            for p in here:
                step = p[len(path)]
                if step in seen:
                    continue
                seen.append(step)
                sub = g.summand(ce.colour_at(index, step[1]))
                yield from _block_events(sub, coords, diags, path + (step,))
        case Adjoin(c):
            k = diags.get(path, 0)
            idxs = sorted(p[len(path)][1] for p in coords if p[: len(path)] == path)
            top = (idxs[-1] + 1) if idxs else 0
            for i in range(top + 1):
                pos = path + (("coord", i),)
                val = coords.get(pos, Fraction(0)) + k * c
                is_tail = i == top
                yield pos, val, Z, (path, k, c, is_tail)
        case _:
            raise GroupError(f"not a GroupExpr: {g!r}")


class _CmpKey:
    """Sort key comparing group positions under a common LexSum prefix."""

    __slots__ = ("g", "plen", "pos")

    def __init__(self, g: LexSum, path: GPos, pos: GPos):
        self.g = g
        self.plen = len(path)
        self.pos = pos

    def __lt__(self, other: "_CmpKey") -> bool:
        a, b = self.pos[self.plen][1], other.pos[self.plen][1]
        if a == b:
            return self.pos < other.pos
        return ce.position_compare(self.g.index, a, b) < 0


def sign(a: GroupElement) -> int:
    """Sign of the element under the lexicographic order."""
    coords, diags = a.coord_map(), a.diag_map()
    for _pos, val, _rib, adj in _block_events(a.group, coords, diags, ()):
        if adj is not None:
            _path, k, _c, is_tail = adj
            if val:
                return 1 if val > 0 else -1
            if is_tail and k == 0:
                continue
            if is_tail:
                continue  # tail value is k*c, covered at the tail event
            continue
        if val:
            return 1 if val > 0 else -1
    return 0


def compare(a: GroupElement, b: GroupElement) -> int:
    """Lexicographic comparison: -1, 0 or 1."""
    return sign(add(a, negate(b)))


def abs_element(a: GroupElement) -> GroupElement:
    return a if sign(a) >= 0 else negate(a)


def dominant_position(g: GroupExpr, a: GroupElement) -> GPos:
    """Earliest index position where the element is non-zero."""
    if a.is_zero():
        raise GroupError("the zero element has no dominant position")
    coords, diags = a.coord_map(), a.diag_map()
    for pos, val, _rib, _adj in _block_events(g, coords, diags, ()):
        if val:
            return pos
    raise GroupError("inconsistent element")


def is_n_divisible(g: GroupExpr, a: GroupElement, n: int) -> bool:
    """Whether the element lies in n*G.

    Plain coordinates divide rib-wise.  In an adjoined block an element is
    h + k*d with h of finite support, and n(h' + k'*d) = h + k*d forces
    n | k and n | h_i coordinate-wise (the decomposition is unique since d
    has full support).
    """
    if n < 2:
        raise GroupError("modulus must be at least 2")
    for _path, k in a.diags:
        if k % n:
            return False
    for pos, v in a.coords:
        if pos and pos[-1][0] == "coord":
            # integer coordinate of an adjoined block
            if v.denominator != 1 or v.numerator % n:
                return False
        elif not rib_at(g, pos).value_n_divisible(v, n):
            return False
    return True


def fn_fundament(g: GroupExpr, a: GroupElement, n: int):
    """The n-fundament: the largest convex subgroup avoiding a + nG.

    Returns NOT_APPLICABLE when the element is n-divisible.  The cut is
    found as the earliest point where the prefix of the element cannot be
    cancelled modulo n: a non-divisible coordinate value, a non-divisible
    constant tail k*c of an adjoined block, or an adjoined block whose
    diagonal multiple is not divisible (cancelling the whole block needs
    n | k).
    """
    if n < 2:
        raise GroupError("modulus must be at least 2")
    coords, diags = a.coord_map(), a.diag_map()
    for pos, val, rib, adj in _block_events(g, coords, diags, ()):
        if adj is None:
            if not rib.value_n_divisible(val, n):
                return tail_after(g, pos)
            continue
        path, k, c, is_tail = adj
        if Fraction(val).denominator != 1 or val.numerator % n:
            return tail_after(g, pos)
        if is_tail and k % n:
            # every finite prefix cancels, the whole block does not
            later = _has_position_after(g, path + (("coord", 0),))
            return ConvexRef("limit", path) if later else ZERO
    return NOT_APPLICABLE


# ---------------------------------------------------------------------------
# Regular classes (A_n, B_n, R_n)


def _scan_group_first_nondiv(g: GroupExpr, n: int, path: GPos):
    """First position of g whose rib is not n-divisible, scanning from the
    dominant end; ("limit", path) when obstructions exist but have no first
    position; None when every rib is n-divisible."""
    match g:
        case RibLeaf(r):
            return None if r.n_divisible(n) else ("pos", path)
        case DirectPair(parts):
            for i, part in enumerate(parts):
                res = _scan_group_first_nondiv(part, n, path + (("part", i),))
                if res is not None:
                    return res
            return None
        case LexSum(index, _):
            return _scan_index_first_nondiv(g, index, n, path, ())
        case Adjoin(_):
            return ("pos", path + (("coord", 0),))
    raise GroupError(f"not a GroupExpr: {g!r}")


def _index_all_div(g: LexSum, ix: OrderExpr, n: int) -> bool:
    return all(
        _scan_group_first_nondiv(g.summand(c), n, ()) is None for c in ce.colours(ix)
    )


def _scan_index_first_nondiv(g: LexSum, ix: OrderExpr, n: int, path: GPos, csteps: tuple):
    """Scan an index sub-expression; csteps accumulates chain-position steps."""
    match ix:
        case Empty():
            return None
        case Fin(cs):
            for i, c in enumerate(cs):
                res = _scan_group_first_nondiv(
                    g.summand(c), n, path + (("at", Position(csteps, i)),)
                )
                if res is not None:
                    return res
            return None
        case Sum(parts):
            for i, part in enumerate(parts):
                res = _scan_index_first_nondiv(g, part, n, path, csteps + (("child", i),))
                if res is not None:
                    return res
            return None
        case Basic(shape, c) | Repeat(shape, c):
            body_all_div = (
                _scan_group_first_nondiv(g.summand(c), n, ()) is None
                if isinstance(ix, Basic)
                else _scan_index_first_nondiv(g, c, n, (), ()) is None
            )
            if body_all_div:
                return None
            if shape == OMEGA:
                sub = csteps + (("copy", 0),)
                if isinstance(ix, Basic):
                    return _scan_group_first_nondiv(
                        g.summand(c), n, path + (("at", Position(sub, 0)),)
                    )
                return _scan_index_first_nondiv(g, c, n, path, sub)
            # no first copy: the obstruction is a limit from the left
            return ("limit", path + (("blockat", csteps),))
    raise GroupError(f"bad index: {ix!r}")


def _scan_after(g: GroupExpr, n: int, pos: GPos, path: GPos = ()):
    """Like _scan_group_first_nondiv but restricted to positions after pos."""
    match g:
        case RibLeaf(_):
            return None
        case DirectPair(parts):
            (_, i), rest = pos[0], pos[1:]
            res = _scan_after(parts[i], n, rest, path + (("part", i),))
            if res is not None:
                return res
            for j in range(i + 1, len(parts)):
                res = _scan_group_first_nondiv(parts[j], n, path + (("part", j),))
                if res is not None:
                    return res
            return None
        case LexSum(index, _):
            (_, cp), rest = pos[0], pos[1:]
            res = _scan_after(g.summand(ce.colour_at(index, cp)), n, rest, path + (pos[0],))
            if res is not None:
                return res
            return _scan_suffix(g, index, n, path, cp)
        case Adjoin(_):
            (_, i) = pos[0]
            return ("pos", path + (("coord", i + 1),))
    raise GroupError(f"not a GroupExpr: {g!r}")


def _scan_suffix(g: LexSum, ix: OrderExpr, n: int, path: GPos, cp: Position):
    """First non-divisible position of the index strictly after cp."""

    def go(node: OrderExpr, steps, offset: int, csteps: tuple):
        match node:
            case Fin(cs):
                for i in range(offset + 1, len(cs)):
                    res = _scan_group_first_nondiv(
                        g.summand(cs[i]), n, path + (("at", Position(csteps, i)),)
                    )
                    if res is not None:
                        return res
                return None
            case Sum(parts):
                (_, i), rest = steps[0], steps[1:]
                res = go(parts[i], rest, offset, csteps + (("child", i),))
                if res is not None:
                    return res
                for j in range(i + 1, len(parts)):
                    res = _scan_index_first_nondiv(g, parts[j], n, path, csteps + (("child", j),))
                    if res is not None:
                        return res
                return None
            case Basic(shape, c):
                (_, coord) = steps[0]
                if _scan_group_first_nondiv(g.summand(c), n, ()) is None:
                    return None
                sub_first = _scan_group_first_nondiv
                if shape == OMEGA or shape == ZETA:
                    nxt = coord + 1
                    return sub_first(
                        g.summand(c), n, path + (("at", Position(csteps + (("copy", nxt),), 0)),)
                    )
                if shape == OMEGA_STAR:
                    if coord == 0:
                        return None
                    nxt = coord - 1
                    return sub_first(
                        g.summand(c), n, path + (("at", Position(csteps + (("copy", nxt),), 0)),)
                    )
                return ("limit", path + (("blockafter", csteps, coord),))
            case Repeat(shape, body):
                (_, coord), rest = steps[0], steps[1:]
                res = go(body, rest, offset, csteps + (("copy", coord),))
                if res is not None:
                    return res
                if _scan_index_first_nondiv(g, body, n, (), ()) is None:
                    return None
                if shape == OMEGA or shape == ZETA:
                    return _scan_index_first_nondiv(
                        g, body, n, path, csteps + (("copy", coord + 1),)
                    )
                if shape == OMEGA_STAR:
                    if coord == 0:
                        return None
                    return _scan_index_first_nondiv(
                        g, body, n, path, csteps + (("copy", coord - 1),)
                    )
                return ("limit", path + (("blockafter", csteps, coord),))
        raise GroupError(f"bad index: {node!r}")

    return go(ix, list(cp.steps), cp.offset, ())


def _an_with_terminal(
    g: GroupExpr, a: GroupElement, n: int
) -> tuple[ConvexRef, Optional[GPos]]:
    if n < 2:
        raise GroupError("modulus must be at least 2")
    if a.is_zero():
        raise GroupError("the zero element has no regular class")
    dom = dominant_position(g, a)
    if not rib_at(g, dom).n_divisible(n):
        return tail_after(g, dom), dom
    res = _scan_after(g, n, dom)
    if res is None:
        return ZERO, None
    kind, payload = res
    if kind == "pos":
        return tail_after(g, payload), payload
    return ConvexRef("limit", payload), None


def an_class(g: GroupExpr, a: GroupElement, n: int) -> ConvexRef:
    """Smallest convex subgroup whose quotient from B(a) is n-regular.

    The regular run extends from the dominant position downward (to later
    index positions) through n-divisible ribs and may close with a single
    terminal non-divisible rib when one is directly reachable; otherwise it
    ends at a limit or exhausts the index.
    """
    return _an_with_terminal(g, a, n)[0]


def _scan_before(g: GroupExpr, n: int, pos: GPos, path: GPos = ()):
    """Nearest non-divisible rib strictly before pos, scanning backward."""
    match g:
        case RibLeaf(_):
            return None
        case DirectPair(parts):
            (_, i), rest = pos[0], pos[1:]
            res = _scan_before(parts[i], n, rest, path + (("part", i),))
            if res is not None:
                return res
            for j in range(i - 1, -1, -1):
                res = _scan_group_last_nondiv(parts[j], n, path + (("part", j),))
                if res is not None:
                    return res
            return None
        case LexSum(index, _):
            (_, cp), rest = pos[0], pos[1:]
            res = _scan_before(g.summand(ce.colour_at(index, cp)), n, rest, path + (pos[0],))
            if res is not None:
                return res
            return _scan_prefix(g, index, n, path, cp)
        case Adjoin(_):
            (_, i) = pos[0]
            return ("pos", path + (("coord", i - 1),)) if i > 0 else None
    raise GroupError(f"not a GroupExpr: {g!r}")


def _scan_group_last_nondiv(g: GroupExpr, n: int, path: GPos):
    """Last (least dominant) non-divisible position, scanning backward."""
    match g:
        case RibLeaf(r):
            return None if r.n_divisible(n) else ("pos", path)
        case DirectPair(parts):
            for i in range(len(parts) - 1, -1, -1):
                res = _scan_group_last_nondiv(parts[i], n, path + (("part", i),))
                if res is not None:
                    return res
            return None
        case LexSum(index, _):
            return _scan_index_last_nondiv(g, index, n, path, ())
        case Adjoin(_):
            # backward entry into the block: coordinates are cofinal upward
            return ("limit", path + (("blockat", ()),))
    raise GroupError(f"not a GroupExpr: {g!r}")


def _scan_index_last_nondiv(g: LexSum, ix: OrderExpr, n: int, path: GPos, csteps: tuple):
    match ix:
        case Empty():
            return None
        case Fin(cs):
            for i in range(len(cs) - 1, -1, -1):
                res = _scan_group_last_nondiv(
                    g.summand(cs[i]), n, path + (("at", Position(csteps, i)),)
                )
                if res is not None:
                    return res
            return None
        case Sum(parts):
            for i in range(len(parts) - 1, -1, -1):
                res = _scan_index_last_nondiv(g, parts[i], n, path, csteps + (("child", i),))
                if res is not None:
                    return res
            return None
        case Basic(shape, c) | Repeat(shape, c):
            body_all_div = (
                _scan_group_first_nondiv(g.summand(c), n, ()) is None
                if isinstance(ix, Basic)
                else _scan_index_first_nondiv(g, c, n, (), ()) is None
            )
            if body_all_div:
                return None
            if shape == OMEGA_STAR:
                sub = csteps + (("copy", 0),)
                if isinstance(ix, Basic):
                    return _scan_group_last_nondiv(
                        g.summand(c), n, path + (("at", Position(sub, 0)),)
                    )
                return _scan_index_last_nondiv(g, c, n, path, sub)
            return ("limit", path + (("blockat", csteps),))
    raise GroupError(f"bad index: {ix!r}")


def _scan_prefix(g: LexSum, ix: OrderExpr, n: int, path: GPos, cp: Position):
    def go(node: OrderExpr, steps, offset: int, csteps: tuple):
        match node:
            case Fin(cs):
                for i in range(offset - 1, -1, -1):
                    res = _scan_group_last_nondiv(
                        g.summand(cs[i]), n, path + (("at", Position(csteps, i)),)
                    )
                    if res is not None:
                        return res
                return None
            case Sum(parts):
                (_, i), rest = steps[0], steps[1:]
                res = go(parts[i], rest, offset, csteps + (("child", i),))
                if res is not None:
                    return res
                for j in range(i - 1, -1, -1):
                    res = _scan_index_last_nondiv(g, parts[j], n, path, csteps + (("child", j),))
                    if res is not None:
                        return res
                return None
            case Basic(shape, c):
                (_, coord) = steps[0]
                if _scan_group_first_nondiv(g.summand(c), n, ()) is None:
                    return None
                if shape == OMEGA or shape == ZETA:
                    if shape == OMEGA and coord == 0:
                        return None
                    if shape == OMEGA:
                        prev = coord - 1
                        return _scan_group_last_nondiv(
                            g.summand(c),
                            n,
                            path + (("at", Position(csteps + (("copy", prev),), 0)),),
                        )
                    return ("limit", path + (("blockbefore", csteps, coord),))
                if shape == OMEGA_STAR:
                    prev = coord + 1
                    return _scan_group_last_nondiv(
                        g.summand(c), n, path + (("at", Position(csteps + (("copy", prev),), 0)),)
                    )
                return ("limit", path + (("blockbefore", csteps, coord),))
            case Repeat(shape, body):
                (_, coord), rest = steps[0], steps[1:]
                res = go(body, rest, offset, csteps + (("copy", coord),))
                if res is not None:
                    return res
                if _scan_index_first_nondiv(g, body, n, (), ()) is None:
                    return None
                if shape == OMEGA:
                    if coord == 0:
                        return None
                    return _scan_index_last_nondiv(
                        g, body, n, path, csteps + (("copy", coord - 1),)
                    )
                if shape == OMEGA_STAR:
                    return _scan_index_last_nondiv(
                        g, body, n, path, csteps + (("copy", coord + 1),)
                    )
                return ("limit", path + (("blockbefore", csteps, coord),))
        raise GroupError(f"bad index: {node!r}")

    return go(ix, list(cp.steps), cp.offset, ())


def bn_class(g: GroupExpr, a: GroupElement, n: int) -> ConvexRef:
    """Largest convex subgroup n-regular over A(a).

    Extends upward (to earlier index positions) strictly through
    n-divisible ribs; the dominant rib itself may be arbitrary.
    """
    if n < 2:
        raise GroupError("modulus must be at least 2")
    if a.is_zero():
        raise GroupError("the zero element has no regular class")
    dom = dominant_position(g, a)
    res = _scan_before(g, n, dom)
    if res is None:
        return WHOLE
    kind, payload = res
    if kind == "pos":
        blocker = payload
        nxt = _next_position_after(g, blocker)
        if nxt is None:
            raise GroupError("inconsistent backward scan")
        return tail_from(g, nxt)
    return ConvexRef("fromlimit", payload)


def _next_position_after(g: GroupExpr, pos: GPos) -> Optional[GPos]:
    """The immediate successor position, when one exists."""
    res = _scan_after_any(g, pos, ())
    return res


def _scan_after_any(g: GroupExpr, pos: GPos, path: GPos) -> Optional[GPos]:
    # first position after pos regardless of divisibility; None if the
    # successor is not directly addressable (limit) or absent
    match g:
        case RibLeaf(_):
            return None
        case DirectPair(parts):
            (_, i), rest = pos[0], pos[1:]
            sub = _scan_after_any(parts[i], rest, path + (("part", i),))
            if sub is not None:
                return sub
            for j in range(i + 1, len(parts)):
                first = _first_position(parts[j], path + (("part", j),))
                if first is not None:
                    return first
            return None
        case LexSum(index, _):
            (_, cp), rest = pos[0], pos[1:]
            sub = _scan_after_any(
                g.summand(ce.colour_at(index, cp)), rest, path + (pos[0],)
            )
            if sub is not None:
                return sub
            nxt = _index_next(index, cp)
            if nxt is None:
                return None
            return _first_position(g.summand(ce.colour_at(index, nxt)), path + (("at", nxt),))
        case Adjoin(_):
            (_, i) = pos[0]
            return path + (("coord", i + 1),)
    raise GroupError(f"not a GroupExpr: {g!r}")


def _first_position(g: GroupExpr, path: GPos) -> Optional[GPos]:
    match g:
        case RibLeaf(_):
            return path
        case DirectPair(parts):
            return _first_position(parts[0], path + (("part", 0),))
        case LexSum(index, _):
            ix = index
            cp = _index_first(ix)
            if cp is None:
                return None
            return _first_position(g.summand(ce.colour_at(ix, cp)), path + (("at", cp),))
        case Adjoin(_):
            return path + (("coord", 0),)
    raise GroupError(f"not a GroupExpr: {g!r}")


def _index_first(ix: OrderExpr) -> Optional[Position]:
    if not ce.has_first(ix):
        return None
    match ix:
        case Fin(_):
            return Position((), 0)
        case Sum(parts):
            sub = _index_first(parts[0])
            return Position((("child", 0),) + sub.steps, sub.offset)
        case Basic(_, _):
            return Position((("copy", 0),), 0)
        case Repeat(_, body):
            sub = _index_first(body)
            return Position((("copy", 0),) + sub.steps, sub.offset)
    raise ChainError(f"bad index: {ix!r}")


def _index_next(ix: OrderExpr, cp: Position) -> Optional[Position]:
    """Immediate successor of a position in the index, if addressable."""

    def go(node: OrderExpr, steps, offset: int):
        match node:
            case Fin(cs):
                return Position((), offset + 1) if offset + 1 < len(cs) else None
            case Sum(parts):
                (_, i), rest = steps[0], steps[1:]
                sub = go(parts[i], rest, offset)
                if sub is not None:
                    return Position((("child", i),) + sub.steps, sub.offset)
                for j in range(i + 1, len(parts)):
                    first = _index_first(parts[j])
                    if first is None:
                        return None
                    return Position((("child", j),) + first.steps, first.offset)
                return None
            case Basic(shape, _):
                (_, coord) = steps[0]
                if shape == OMEGA or shape == ZETA:
                    return Position((("copy", coord + 1),), 0)
                if shape == OMEGA_STAR:
                    return Position((("copy", coord - 1),), 0) if coord > 0 else None
                return None
            case Repeat(shape, body):
                (_, coord), rest = steps[0], steps[1:]
                sub = go(body, rest, offset)
                if sub is not None:
                    return Position((("copy", coord),) + sub.steps, sub.offset)
                nxt = None
                if shape == OMEGA or shape == ZETA:
                    nxt = coord + 1
                elif shape == OMEGA_STAR and coord > 0:
                    nxt = coord - 1
                if nxt is None:
                    return None
                first = _index_first(body)
                if first is None:
                    return None
                return Position((("copy", nxt),) + first.steps, first.offset)
        raise ChainError(f"bad index: {node!r}")

    return go(ix, list(cp.steps), cp.offset)


@dataclass(frozen=True)
class RegularRun:
    """The n-regular class around an element: bounds plus rib summary."""

    lower: ConvexRef  # the A_n cut (smaller subgroup)
    upper: ConvexRef  # the B_n cut (larger subgroup)
    terminal_rib: Optional[Rib]
    discrete: bool
    beta: tuple[tuple[int, int], ...]


def rn_regular_class(g: GroupExpr, a: GroupElement, n: int) -> RegularRun:
    """Bounds and invariants of the maximal n-regular class through a.

    In an n-regular run every rib except possibly the terminal one is
    n-divisible, so the p-rank and discreteness of the quotient are read
    off the terminal rib.
    """
    lower, term_pos = _an_with_terminal(g, a, n)
    upper = bn_class(g, a, n)
    terminal = rib_at(g, term_pos) if term_pos is not None else None
    ps = sorted(prime_factors(n))
    if terminal is not None:
        beta = tuple((p, terminal.beta(p)) for p in ps)
        disc = terminal.discrete
    else:
        beta = tuple((p, 0) for p in ps)
        disc = False
    return RegularRun(lower, upper, terminal, disc, beta)


# ---------------------------------------------------------------------------
# Oracles (definition-unfolding computations for finite index chains)


def _cut_avoids(ribs: list[Rib], values: list[Fraction], j: int, n: int) -> bool:
    # the tail from position j avoids a + nG iff some earlier coordinate
    # cannot be cancelled modulo n
    return any(not ribs[i].value_n_divisible(values[i], n) for i in range(j))


def fn_oracle(g: GroupExpr, a: GroupElement, n: int, sample_bound: int = 8):
    """Brute-force fundament via the cut-by-cut avoidance criterion.

    For each candidate tail the coset a + nG is searched for a member of
    the tail; membership is decided coordinate-wise (a witness exists iff
    each blocked coordinate value can be cancelled inside its rib).
    Adjoined blocks additionally search the diagonal multiplier within
    [-sample_bound, sample_bound] for a whole-block cancellation.
    """
    if is_finite_group(g):
        positions = finite_positions(g)
        coords = a.coord_map()
        ribs = [r for _, r in positions]
        values = [coords.get(p, Fraction(0)) for p, _ in positions]
        m = len(positions)
        if not _cut_avoids(ribs, values, m, n):
            return NOT_APPLICABLE
        for j in range(m + 1):
            if _cut_avoids(ribs, values, j, n):
                return tail_after(g, positions[j - 1][0]) if j else WHOLE
        raise GroupError("unreachable")
    if isinstance(g, Adjoin):
        return _fn_oracle_adjoin(g, a, n, sample_bound, ())
    raise UnsupportedError("the oracle needs a finite index chain or a bare adjoined block")


def _fn_oracle_adjoin(g: Adjoin, a: GroupElement, n: int, bound: int, path: GPos):
    coords, diags = a.coord_map(), a.diag_map()
    k = diags.get(path, 0)
    idxs = sorted(p[-1][1] for p in coords if p[: len(path)] == path)
    depth = (idxs[-1] + 2) if idxs else 2
    hs = [int(coords.get(path + (("coord", i),), Fraction(0))) for i in range(depth)]

    # A finite prefix [0, j) of a + nG hits zero iff each coordinate value
    # h_i + k*c admits an integer correction h'_i with value + n h'_i = 0.
    for j in range(1, depth + 1):
        i = j - 1
        if (hs[i] + k * g.c) % n:
            return tail_after(g, path + (("coord", i),))
    # Cancelling the whole block needs y = h' + k'*d with k + n k' = 0 and
    # h_i + n h'_i = 0 for every i (the decomposition is unique); search k'.
    whole_kill = any(k + n * kp == 0 for kp in range(-bound, bound + 1)) and all(
        h % n == 0 for h in hs
    )
    if whole_kill:
        return NOT_APPLICABLE
    later = _has_position_after(g, path + (("coord", 0),))
    return ConvexRef("limit", path) if later else ZERO


def an_oracle(g: GroupExpr, a: GroupElement, n: int) -> ConvexRef:
    """Definitional A_n on finite groups: smallest tail with an n-regular
    quotient from B(a), regularity checked by enumerating sub-quotients."""
    positions = finite_positions(g)
    coords = a.coord_map()
    values = [coords.get(p, Fraction(0)) for p, _ in positions]
    ribs = [r for _, r in positions]
    try:
        d = next(i for i, v in enumerate(values) if v)
    except StopIteration:
        raise GroupError("the zero element has no regular class") from None

    def regular(lo: int, hi: int) -> bool:
        # ribs[lo:hi] as a lex sum: every quotient by a non-trivial convex
        # subgroup (a proper suffix) must be n-divisible
        return all(
            all(ribs[i].n_divisible(n) for i in range(lo, t)) for t in range(lo + 1, hi)
        )

    best = d + 1
    for j in range(d + 1, len(positions) + 1):
        if regular(d, j):
            best = j
    return tail_after(g, positions[best - 1][0]) if best else WHOLE


def bn_oracle(g: GroupExpr, a: GroupElement, n: int) -> ConvexRef:
    positions = finite_positions(g)
    coords = a.coord_map()
    values = [coords.get(p, Fraction(0)) for p, _ in positions]
    ribs = [r for _, r in positions]
    d = next(i for i, v in enumerate(values) if v)

    def regular(lo: int, hi: int) -> bool:
        return all(
            all(ribs[i].n_divisible(n) for i in range(lo, t)) for t in range(lo + 1, hi)
        )

    best = d
    for t in range(d, -1, -1):
        if regular(t, d + 1):
            best = t
    return tail_from(g, positions[best][0]) if best else WHOLE


def lemma_membership_check(
    g: GroupExpr, a: GroupElement, n: int, x: GroupElement, box: int
) -> bool:
    """The absolute-value membership criterion for x in F_n(a).

    Quantifies h over all elements with integer coordinates in
    [-box, box]: x belongs iff every such h with |h| < n|x| keeps a + h
    outside nG.  Exact on finite chains for boxes covering n times the
    coordinate range of a, since coset membership is coordinate-wise.
    """
    positions = finite_positions(g)
    nx = scale(abs_element(x), n)
    ranges = [range(-box, box + 1)] * len(positions)
    for combo in itertools.product(*ranges):
        h = element(g, {positions[i][0]: combo[i] for i in range(len(positions))})
        if any(not positions[i][1].contains(Fraction(v)) for i, v in enumerate(combo)):
            continue
        if compare(abs_element(h), nx) < 0 and is_n_divisible(g, add(a, h), n):
            return False
    return True
