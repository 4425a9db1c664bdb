"""Augmentability deciders for ordered abelian groups.

A group is strongly (resp. weakly) augmentable by infinitesimals when it
embeds elementarily into (resp. is equivalent to) its sum with a
non-trivial convex extension below everything, and by infinites for an
extension above everything.  The deciders reduce to spine shape: strong
augmentability by infinitesimals fails exactly when some spine has a last
fundament point; weak augmentability holds via a divisible tail or via
right-augmentable spines along a divisor filter; augmentability by
infinites always holds.

Quantifiers over all moduli reduce to a finite representative set: spine
structure depends only on which relevant primes divide the modulus, with
exponents capped by the adjoined constants.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

from . import chain_aug as ca
from . import chain_expr as ce
from . import oag_expr as og
from . import spine as sp
from .oag_expr import GroupError, GroupExpr, RibLeaf, prime_factors


class Status(str, enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


class InvariantViolation(AssertionError):
    """Two provably equivalent computations disagreed (a bug trap)."""


@dataclass(frozen=True)
class GroupAugVerdict:
    status: Status
    mode: tuple[str, str]  # (strong|weak, infinitesimal|infinite)
    witness: Optional[Union[GroupExpr, str]] = None
    evidence: tuple[str, ...] = ()


def _nontrivial(g: GroupExpr) -> None:
    # group expressions are non-trivial by construction; guard anyway
    if not isinstance(g, GroupExpr):
        raise GroupError(f"not a GroupExpr: {g!r}")


def modulus_caps(g: GroupExpr) -> dict[int, int]:
    caps: dict[int, int] = {p: 1 for p in og.relevant_primes(g)}
    for c in og.adjoin_constants(g):
        for p, e in prime_factors(c).items():
            caps[p] = max(caps.get(p, 1), e + 1)
    return caps


def representative_moduli(g: GroupExpr) -> list[int]:
    """All products of relevant primes with capped exponents (>= 2)."""
    caps = modulus_caps(g)
    out = set()
    ranges = [[p**e for e in range(caps[p] + 1)] for p in sorted(caps)]
    for combo in itertools.product(*ranges):
        n = 1
        for v in combo:
            n *= v
        if n >= 2:
            out.add(n)
    return sorted(out)


def _has_last_f(s: sp.SpineChain) -> bool:
    last = s.last_point()
    return last is not None and last.f


def strongly_aug_infinitesimals(g: GroupExpr) -> GroupAugVerdict:
    """Yes iff no spine over the representative moduli ends in a fundament
    point (equivalently, no element has the trivial subgroup as fundament)."""
    _nontrivial(g)
    mode = ("strong", "infinitesimal")
    for n in representative_moduli(g):
        s = sp.spine(g, n)
        if _has_last_f(s):
            return GroupAugVerdict(
                Status.NO,
                mode,
                evidence=(f"the {n}-spine has a last point carrying the fundament flag",),
            )
    return GroupAugVerdict(
        Status.YES,
        mode,
        evidence=("no spine over the representative moduli ends in a fundament point",),
    )


def strongly_aug_infinites(g: GroupExpr) -> GroupAugVerdict:
    """Always Yes: a saturated elementary extension realizing a type above
    everything splits off the convex hull, and the quotient is an augment."""
    _nontrivial(g)
    evidence = [
        "the quotient of a sufficiently saturated elementary extension by the"
        " convex hull of the group is an infinite strong augment",
    ]
    if all(ndiv_infinite_augment(g, n) for n in representative_moduli(g)):
        evidence.append("every spine has an initial point, so every infinite augment is divisible")
        witness: Union[GroupExpr, str] = RibLeaf(og.Q)
    else:
        witness = "convex-hull quotient of a saturated elementary extension"
    return GroupAugVerdict(Status.YES, ("strong", "infinite"), witness, tuple(evidence))


def ndiv_infinite_augment(g: GroupExpr, n: int) -> bool:
    """True iff some (equivalently any) infinite strong augment is
    n-divisible, i.e. the n-spine has an initial point."""
    return ce.has_first(sp.spine(g, n).chain)


@dataclass(frozen=True)
class DivisibleAugmentProfile:
    per_prime_divisible_tail: tuple[tuple[int, bool], ...]
    spine_final_not_f: tuple[tuple[int, bool], ...]
    has_min_positive: bool
    q_augmentable: bool


def divisible_augment_profile(g: GroupExpr) -> DivisibleAugmentProfile:
    """Independently evaluate the divisible-augment conditions.

    The structural side asks for a non-trivial p-divisible convex subgroup
    for each relevant prime; the spine side asks every representative
    spine to end in a non-fundament point.  The two are equivalent, and a
    disagreement raises an invariant violation.
    """
    _nontrivial(g)
    primes = og.relevant_primes(g)
    structural = tuple((p, og.has_p_divisible_tail(g, p)) for p in primes)
    spines = []
    for n in representative_moduli(g):
        s = sp.spine(g, n)
        last = s.last_point()
        spines.append((n, last is not None and not last.f))
    s_ok = all(v for _, v in structural)
    c_ok = all(v for _, v in spines)
    if s_ok != c_ok:
        raise InvariantViolation(
            f"divisible-tail analysis ({structural}) disagrees with spine"
            f" endings ({spines})"
        )
    return DivisibleAugmentProfile(
        per_prime_divisible_tail=structural,
        spine_final_not_f=tuple(spines),
        has_min_positive=og.has_min_positive(g),
        q_augmentable=s_ok,
    )


def _rib_witness_from_spine_tails(
    g: GroupExpr, k: int, moduli: list[int], k_max: int
) -> Optional[GroupExpr]:
    """Synthesize a rib witness when every spine augment is the one-point
    colour of a fixed rib."""
    discrete = None
    nondiv: set[int] = set()
    for n in moduli:
        s = sp.spine(g, n)
        v = ca.weakly_augmentable_right(s.chain, k_max)
        if v.status is not ca.Status.YES or v.witness is None:
            return None
        w = ce.normalize(v.witness)
        if not isinstance(w, ce.Fin) or len(w.colours) != 1:
            return None
        col = sp.colour_for_symbol(w.colours[0])
        if not (col.a and col.f):
            return None
        disc_here = col.d
        if discrete is None:
            discrete = disc_here
        elif discrete != disc_here:
            return None
        for p, m in col.beta:
            if m:
                nondiv.add(p)
    if discrete:
        return RibLeaf(og.Z)
    if nondiv:
        return RibLeaf(og.z_local(*sorted(nondiv)))
    return None


def weakly_aug_infinitesimals(g: GroupExpr, k_max: int = 4) -> GroupAugVerdict:
    """Weak augmentability by infinitesimals.

    Yes when a divisible augment exists or when, for some divisor filter k,
    every representative spine of a multiple of k is right-augmentable; No
    when every filter hits a refuted spine and no divisible augment exists
    (the spine criterion is then both necessary and sufficient); Unknown
    otherwise.
    """
    _nontrivial(g)
    mode = ("weak", "infinitesimal")
    profile = divisible_augment_profile(g)
    if profile.q_augmentable:
        return GroupAugVerdict(
            Status.YES,
            mode,
            witness=RibLeaf(og.Q),
            evidence=("a divisible augment exists (non-trivial divisible convex subgroup)",),
        )
    moduli = representative_moduli(g)
    saw_unknown = False
    for k in moduli:
        multiples = [n for n in moduli if n % k == 0]
        verdicts = {n: ca.weakly_augmentable_right(sp.spine(g, n).chain, k_max) for n in multiples}
        if all(v.status is ca.Status.YES for v in verdicts.values()):
            witness = _rib_witness_from_spine_tails(g, k, multiples, k_max)
            ev = (
                f"every spine over multiples of {k} in the representative set"
                " is right-augmentable",
            )
            return GroupAugVerdict(Status.YES, mode, witness=witness, evidence=ev)
        if not any(v.status is ca.Status.NO for v in verdicts.values()):
            saw_unknown = True
    if saw_unknown:
        return GroupAugVerdict(
            Status.UNKNOWN,
            mode,
            evidence=("some divisor filter ended in unresolved spine augmentability",),
        )
    return GroupAugVerdict(
        Status.NO,
        mode,
        evidence=(
            "no divisible augment, and every divisor filter contains a spine"
            " refuted at a finite rank",
        ),
    )


def has_min_positive(g: GroupExpr) -> bool:
    return og.has_min_positive(g)


def closed_in_divisible_hull(g: GroupExpr) -> bool:
    """Closure in the divisible hull.

    A minimum positive element forces closure (differences are bounded
    away from zero); otherwise closure is equivalent to strong
    augmentability by infinitesimals.
    """
    if og.has_min_positive(g):
        return True
    return strongly_aug_infinitesimals(g).status is Status.YES
