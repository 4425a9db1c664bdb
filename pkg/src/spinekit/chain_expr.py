"""Symbolic coloured linear orders.

An :class:`OrderExpr` denotes a countable coloured chain built from finite
blocks, the shapes ``w`` (omega), ``w*`` (omega reversed), ``zeta`` and
``eta``, concatenation, and shape-indexed repetition ``rep(shape, body)``.
All values are immutable and every operation is a pure function, so the
module is safe for concurrent use without synchronization.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

OMEGA = "w"
OMEGA_STAR = "w*"
ZETA = "zeta"
ETA = "eta"
SHAPES = (OMEGA, OMEGA_STAR, ZETA, ETA)

DEFAULT_COLOUR = "o"


class ChainError(ValueError):
    """Malformed chain expression or unsupported operation."""


class AddressError(ChainError):
    """A Position does not denote a point of the chain."""


@dataclass(frozen=True)
class OrderExpr:
    """Base class for chain expressions."""

    def __add__(self, other: "OrderExpr") -> "OrderExpr":
        return concat(self, other)


@dataclass(frozen=True)
class Empty(OrderExpr):
    pass


@dataclass(frozen=True)
class Fin(OrderExpr):
    """A finite block given by its colour sequence (length >= 1)."""

    colours: tuple[str, ...]

    def __post_init__(self):
        if not self.colours:
            raise ChainError("finite block needs at least one point")


@dataclass(frozen=True)
class Basic(OrderExpr):
    """A monochromatic copy of one of the four basic infinite shapes."""

    shape: str
    colour: str = DEFAULT_COLOUR

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ChainError(f"unknown shape {self.shape!r}")


@dataclass(frozen=True)
class Sum(OrderExpr):
    """Concatenation of two or more non-empty chains."""

    parts: tuple[OrderExpr, ...]

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ChainError("sum needs at least two summands")
        if any(isinstance(p, Empty) for p in self.parts):
            raise ChainError("Empty may only appear as a top-level value")


@dataclass(frozen=True)
class Repeat(OrderExpr):
    """Shape-indexed sum of copies of a non-empty body chain."""

    shape: str
    body: OrderExpr

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ChainError(f"unknown shape {self.shape!r}")
        if isinstance(self.body, Empty):
            raise ChainError("repeat body must be non-empty")


EMPTY = Empty()


def fin(n: int, colour: str = DEFAULT_COLOUR) -> OrderExpr:
    """The n-point monochromatic chain (Empty for n = 0)."""
    if n < 0:
        raise ChainError("negative length")
    return Fin((colour,) * n) if n else EMPTY


def omega(colour: str = DEFAULT_COLOUR) -> Basic:
    return Basic(OMEGA, colour)


def omega_star(colour: str = DEFAULT_COLOUR) -> Basic:
    return Basic(OMEGA_STAR, colour)


def zeta(colour: str = DEFAULT_COLOUR) -> Basic:
    return Basic(ZETA, colour)


def eta(colour: str = DEFAULT_COLOUR) -> Basic:
    return Basic(ETA, colour)


def concat(*parts: OrderExpr) -> OrderExpr:
    """Concatenate chains, flattening sums and dropping Empty."""
    flat: list[OrderExpr] = []
    for p in parts:
        if isinstance(p, Empty):
            continue
        if isinstance(p, Sum):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return EMPTY
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def colours(x: OrderExpr) -> frozenset[str]:
    """The set of colours appearing in the expression."""
    match x:
        case Empty():
            return frozenset()
        case Fin(cs):
            return frozenset(cs)
        case Basic(_, c):
            return frozenset({c})
        case Sum(parts):
            out: frozenset[str] = frozenset()
            for p in parts:
                out |= colours(p)
            return out
        case Repeat(_, body):
            return colours(body)
    raise ChainError(f"not an OrderExpr: {x!r}")


def has_last(x: OrderExpr) -> bool:
    """True iff the denoted chain has a maximum element."""
    match x:
        case Empty():
            return False
        case Fin(_):
            return True
        case Basic(shape, _):
            return shape == OMEGA_STAR
        case Sum(parts):
            return has_last(parts[-1])
        case Repeat(shape, body):
            return shape == OMEGA_STAR and has_last(body)
    raise ChainError(f"not an OrderExpr: {x!r}")


def has_first(x: OrderExpr) -> bool:
    """True iff the denoted chain has a minimum element."""
    match x:
        case Empty():
            return False
        case Fin(_):
            return True
        case Basic(shape, _):
            return shape == OMEGA
        case Sum(parts):
            return has_first(parts[0])
        case Repeat(shape, body):
            return shape == OMEGA and has_first(body)
    raise ChainError(f"not an OrderExpr: {x!r}")


_REV_SHAPE = {OMEGA: OMEGA_STAR, OMEGA_STAR: OMEGA, ZETA: ZETA, ETA: ETA}


def reverse(x: OrderExpr) -> OrderExpr:
    """The order-reversed chain, colours preserved."""
    match x:
        case Empty():
            return x
        case Fin(cs):
            return Fin(tuple(reversed(cs)))
        case Basic(shape, c):
            return Basic(_REV_SHAPE[shape], c)
        case Sum(parts):
            return Sum(tuple(reverse(p) for p in reversed(parts)))
        case Repeat(shape, body):
            return Repeat(_REV_SHAPE[shape], reverse(body))
    raise ChainError(f"not an OrderExpr: {x!r}")


def _as_repeat(x: OrderExpr) -> OrderExpr:
    """View a Basic shape as a repeat of a single point."""
    if isinstance(x, Basic):
        return Repeat(x.shape, Fin((x.colour,)))
    return x


def _same_block(a: OrderExpr, b: OrderExpr) -> bool:
    return a == b or _as_repeat(a) == _as_repeat(b)


def _pair_rewrite(a: OrderExpr, b: OrderExpr) -> Optional[list[OrderExpr]]:
    # Fin merging.
    if isinstance(a, Fin) and isinstance(b, Fin):
        return [Fin(a.colours + b.colours)]
    # Absorb a matching finite run into an adjacent omega block: n + w = w.
    if isinstance(a, Fin) and isinstance(b, Basic) and b.shape == OMEGA:
        k = len(a.colours)
        while k and a.colours[k - 1] == b.colour:
            k -= 1
        if k < len(a.colours):
            return [Fin(a.colours[:k]), b] if k else [b]
    if isinstance(a, Basic) and a.shape == OMEGA_STAR and isinstance(b, Fin):
        k = 0
        while k < len(b.colours) and b.colours[k] == a.colour:
            k += 1
        if k:
            return [a, Fin(b.colours[k:])] if k < len(b.colours) else [a]
    # Absorb one full extra copy next to an infinite run of copies.
    if isinstance(a, Repeat) and a.shape == OMEGA_STAR and _same_block(b, a.body):
        return [a]
    if isinstance(b, Repeat) and b.shape == OMEGA and _same_block(a, b.body):
        return [b]
    if isinstance(a, Basic) and a.shape == OMEGA_STAR and _same_block(b, Fin((a.colour,))):
        return [a]
    if isinstance(b, Basic) and b.shape == OMEGA and _same_block(a, Fin((b.colour,))):
        return [b]
    # Adjacent identical shuffles merge (Q + Q is Q).
    ra, rb = _as_repeat(a), _as_repeat(b)
    if (
        isinstance(ra, Repeat)
        and ra.shape == ETA
        and isinstance(rb, Repeat)
        and rb.shape == ETA
        and ra.body == rb.body
    ):
        return [a]
    return None


def _absorb_copy_run(parts: list[OrderExpr]) -> bool:
    # one full body adjacent to an infinite run of copies, body spanning
    # several summands
    for i, p in enumerate(parts):
        if not isinstance(p, Repeat) or not isinstance(p.body, Sum):
            continue
        bs = list(p.body.parts)
        k = len(bs)
        if p.shape == OMEGA_STAR and parts[i + 1 : i + 1 + k] == bs:
            del parts[i + 1 : i + 1 + k]
            return True
        if p.shape == OMEGA and i >= k and parts[i - k : i] == bs:
            del parts[i - k : i]
            return True
    return False


def _sum_fixpoint(parts: list[OrderExpr]) -> list[OrderExpr]:
    changed = True
    while changed:
        changed = False
        # eta + single matching point + eta collapses to eta.
        for i in range(len(parts) - 2):
            a, m, c = parts[i], parts[i + 1], parts[i + 2]
            if (
                isinstance(a, Basic)
                and a.shape == ETA
                and a == c
                and isinstance(m, Fin)
                and m.colours == (a.colour,)
            ):
                parts[i : i + 3] = [a]
                changed = True
                break
        if changed:
            continue
        if _absorb_copy_run(parts):
            changed = True
            continue
        for i in range(len(parts) - 1):
            new = _pair_rewrite(parts[i], parts[i + 1])
            if new is not None:
                parts[i : i + 2] = new
                changed = True
                break
    return parts


def normalize(x: OrderExpr) -> OrderExpr:
    """Canonical form under a fixed isomorphism-preserving rewrite set.

    Rewrites applied (each preserves the denoted chain up to isomorphism):
    zeta expansion into w* + w, single-point repeat bodies folding into
    Basic, constant finite bodies of w/w* repeats folding into Basic, sum
    flattening, Fin merging, absorption of matching finite runs into
    adjacent w/w* blocks, absorption of one extra copy adjacent to an
    infinite run of the same copies, and eta + point + eta collapse.
    Adjacent-pair rules run to a fixpoint with a fixed deterministic
    scanning strategy.
    """
    match x:
        case Empty() | Fin(_):
            return x
        case Basic(shape, c):
            if shape == ZETA:
                return Sum((Basic(OMEGA_STAR, c), Basic(OMEGA, c)))
            return x
        case Repeat(shape, body):
            nb = normalize(body)
            if shape == ZETA:
                return normalize(concat(Repeat(OMEGA_STAR, nb), Repeat(OMEGA, nb)))
            if isinstance(nb, Fin):
                cs = set(nb.colours)
                if len(cs) == 1 and (len(nb.colours) == 1 or shape in (OMEGA, OMEGA_STAR)):
                    return Basic(shape, nb.colours[0])
            if isinstance(nb, Basic) and shape in (OMEGA, OMEGA_STAR):
                # w-many copies of an endless same-shape run stay as they are,
                # except w of w (and dually) which is not collapsible.
                pass
            return Repeat(shape, nb)
        case Sum(parts):
            flat: list[OrderExpr] = []
            for p in parts:
                np_ = normalize(p)
                if isinstance(np_, Empty):
                    continue
                if isinstance(np_, Sum):
                    flat.extend(np_.parts)
                else:
                    flat.append(np_)
            flat = _sum_fixpoint(flat)
            return concat(*flat)
    raise ChainError(f"not an OrderExpr: {x!r}")


# ---------------------------------------------------------------------------
# Positions


@dataclass(frozen=True)
class Position:
    """Address of a single point: a path of steps plus a leaf offset.

    Steps are ("child", i) into a Sum and ("copy", coord) into a Basic or
    Repeat; the coordinate is a natural for w, a natural counted from the
    top for w*, an integer for zeta and a rational for eta.  The offset
    indexes into the final Fin block (0 for Basic leaves).
    """

    steps: tuple[tuple[str, int | Fraction], ...] = ()
    offset: int = 0


def _check_coord(shape: str, coord) -> None:
    if shape == OMEGA and not (isinstance(coord, int) and coord >= 0):
        raise AddressError(f"w copy coordinate must be a natural, got {coord!r}")
    if shape == OMEGA_STAR and not (isinstance(coord, int) and coord >= 0):
        raise AddressError(f"w* copy coordinate must be a natural from the top, got {coord!r}")
    if shape == ZETA and not isinstance(coord, int):
        raise AddressError(f"zeta copy coordinate must be an integer, got {coord!r}")
    if shape == ETA and not isinstance(coord, (int, Fraction)):
        raise AddressError(f"eta copy coordinate must be rational, got {coord!r}")


def colour_at(x: OrderExpr, pos: Position) -> str:
    """Colour of the point addressed by pos; AddressError if dangling."""
    steps = list(pos.steps)
    node = x
    while True:
        match node:
            case Empty():
                raise AddressError("empty chain has no points")
            case Fin(cs):
                if steps:
                    raise AddressError("path continues past a finite block")
                if not 0 <= pos.offset < len(cs):
                    raise AddressError(f"offset {pos.offset} outside block of size {len(cs)}")
                return cs[pos.offset]
            case Basic(shape, c):
                if not steps or steps[0][0] != "copy":
                    raise AddressError("basic shape expects a copy step")
                _check_coord(shape, steps[0][1])
                if steps[1:]:
                    raise AddressError("path continues past a basic shape")
                if pos.offset != 0:
                    raise AddressError("basic shapes have single-point copies")
                return c
            case Sum(parts):
                if not steps or steps[0][0] != "child":
                    raise AddressError("sum expects a child step")
                i = steps[0][1]
                if not (isinstance(i, int) and 0 <= i < len(parts)):
                    raise AddressError(f"child index {i!r} out of range")
                node = parts[i]
                steps = steps[1:]
            case Repeat(shape, body):
                if not steps or steps[0][0] != "copy":
                    raise AddressError("repeat expects a copy step")
                _check_coord(shape, steps[0][1])
                node = body
                steps = steps[1:]
            case _:
                raise ChainError(f"not an OrderExpr: {node!r}")


def first_colour(x: OrderExpr) -> Optional[str]:
    """Colour of the minimum point, if the chain has one."""
    if not has_first(x):
        return None
    match x:
        case Fin(cs):
            return cs[0]
        case Basic(_, c):
            return c
        case Sum(parts):
            return first_colour(parts[0])
        case Repeat(_, body):
            return first_colour(body)
    raise ChainError(f"not an OrderExpr: {x!r}")


def last_colour(x: OrderExpr) -> Optional[str]:
    """Colour of the maximum point, if the chain has one."""
    if not has_last(x):
        return None
    match x:
        case Fin(cs):
            return cs[-1]
        case Basic(_, c):
            return c
        case Sum(parts):
            return last_colour(parts[-1])
        case Repeat(_, body):
            return last_colour(body)
    raise ChainError(f"not an OrderExpr: {x!r}")


def _step_lt(shape_or_kind, a, b) -> bool:
    if shape_or_kind == OMEGA_STAR:
        return a > b  # counted from the top: larger index is earlier
    return a < b


def position_compare(x: OrderExpr, p: Position, q: Position) -> int:
    """-1/0/1 ordering of two positions of the same chain."""
    colour_at(x, p), colour_at(x, q)  # validate both addresses
    node = x
    ps, qs = list(p.steps), list(q.steps)
    while ps and qs:
        (pk, pv), (qk, qv) = ps[0], qs[0]
        if pk != qk:
            raise AddressError("positions address different structure")
        if pv != qv:
            if isinstance(node, Sum):
                return -1 if pv < qv else 1
            shape = node.shape  # Basic or Repeat
            return -1 if _step_lt(shape, pv, qv) else 1
        if isinstance(node, Sum):
            node = node.parts[pv]
        else:
            node = node.body if isinstance(node, Repeat) else node
        ps, qs = ps[1:], qs[1:]
    if ps or qs:
        raise AddressError("positions have different depths")
    if p.offset != q.offset:
        return -1 if p.offset < q.offset else 1
    return 0


# ---------------------------------------------------------------------------
# Finite chains


def is_finite(x: OrderExpr) -> bool:
    match x:
        case Empty() | Fin(_):
            return True
        case Sum(parts):
            return all(is_finite(p) for p in parts)
        case _:
            return False


def materialize(x: OrderExpr) -> list[tuple[Position, str]]:
    """All points of a finite chain, in order."""

    def walk(node: OrderExpr, prefix) -> Iterator[tuple[Position, str]]:
        match node:
            case Empty():
                return
            case Fin(cs):
                for i, c in enumerate(cs):
                    yield Position(tuple(prefix), i), c
            case Sum(parts):
                for i, p in enumerate(parts):
                    yield from walk(p, prefix + [("child", i)])
            case _:
                raise ChainError("materialize needs a finite chain")

    return list(walk(x, []))


def drop_last(x: OrderExpr) -> OrderExpr:
    """The chain with its maximum removed (requires has_last)."""
    if not has_last(x):
        raise ChainError("chain has no last element")
    match x:
        case Fin(cs):
            return Fin(cs[:-1]) if len(cs) > 1 else EMPTY
        case Basic(_, _):
            # w* minus its top point is again w*
            return x
        case Sum(parts):
            return concat(*parts[:-1], drop_last(parts[-1]))
        case Repeat(_, body):
            # (sum over w* of B) minus its top = same, plus a clipped copy
            return concat(x, drop_last(body))
    raise ChainError(f"not an OrderExpr: {x!r}")


def drop_first(x: OrderExpr) -> OrderExpr:
    """The chain with its minimum removed (requires has_first)."""
    if not has_first(x):
        raise ChainError("chain has no first element")
    match x:
        case Fin(cs):
            return Fin(cs[1:]) if len(cs) > 1 else EMPTY
        case Basic(_, _):
            return x
        case Sum(parts):
            return concat(drop_first(parts[0]), *parts[1:])
        case Repeat(_, body):
            return concat(drop_first(body), x)
    raise ChainError(f"not an OrderExpr: {x!r}")


def suffix_after(x: OrderExpr, pos: Position) -> OrderExpr:
    """The sub-chain of points strictly after the addressed point."""
    colour_at(x, pos)  # validate

    def go(node: OrderExpr, steps, offset: int) -> OrderExpr:
        match node:
            case Fin(cs):
                return Fin(cs[offset + 1 :]) if offset + 1 < len(cs) else EMPTY
            case Sum(parts):
                (_, i), rest = steps[0], steps[1:]
                return concat(go(parts[i], rest, offset), *parts[i + 1 :])
            case Basic(shape, c):
                (_, coord) = steps[0]
                if shape == OMEGA or shape == ZETA:
                    return Basic(OMEGA, c)
                if shape == OMEGA_STAR:
                    return fin(coord, c)  # coord copies remain below the top
                return Basic(ETA, c)
            case Repeat(shape, body):
                (_, coord), rest = steps[0], steps[1:]
                inner = go(body, rest, offset)
                if shape == OMEGA or shape == ZETA:
                    return concat(inner, Repeat(OMEGA, body))
                if shape == OMEGA_STAR:
                    return concat(inner, *([body] * coord))
                return concat(inner, Repeat(ETA, body))
        raise ChainError(f"not an OrderExpr: {node!r}")

    return go(x, list(pos.steps), pos.offset)


def prefix_before(x: OrderExpr, pos: Position) -> OrderExpr:
    """The sub-chain of points strictly before the addressed point."""
    colour_at(x, pos)  # validate

    def go(node: OrderExpr, steps, offset: int) -> OrderExpr:
        match node:
            case Fin(cs):
                return Fin(cs[:offset]) if offset else EMPTY
            case Sum(parts):
                (_, i), rest = steps[0], steps[1:]
                return concat(*parts[:i], go(parts[i], rest, offset))
            case Basic(shape, c):
                (_, coord) = steps[0]
                if shape == OMEGA:
                    return fin(coord, c)
                if shape == OMEGA_STAR or shape == ZETA:
                    return Basic(OMEGA_STAR, c)
                return Basic(ETA, c)
            case Repeat(shape, body):
                (_, coord), rest = steps[0], steps[1:]
                inner = go(body, rest, offset)
                if shape == OMEGA:
                    return concat(*([body] * coord), inner)
                if shape == OMEGA_STAR or shape == ZETA:
                    return concat(Repeat(OMEGA_STAR, body), inner)
                return concat(Repeat(ETA, body), inner)
        raise ChainError(f"not an OrderExpr: {node!r}")

    return go(x, list(pos.steps), pos.offset)


# ---------------------------------------------------------------------------
# Rendering (the DSL syntax; parsing lives in the cli module)


def render(x: OrderExpr) -> str:
    match x:
        case Empty():
            return "0"
        case Fin(cs):
            if len(set(cs)) == 1 and cs[0] == DEFAULT_COLOUR:
                return str(len(cs))
            return f"{len(cs)}[{','.join(cs)}]"
        case Basic(shape, c):
            return shape if c == DEFAULT_COLOUR else f"{shape}@{c}"
        case Sum(parts):
            return " + ".join(render(p) for p in parts)
        case Repeat(shape, body):
            return f"rep({shape}, {render(body)})"
    raise ChainError(f"not an OrderExpr: {x!r}")
