"""Seeded randomized corpus of groups and chains plus invariant suites."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import aug_decide as ad
from . import chain_expr as ce
from . import oag_expr as og
from . import spine as sp
from .chain_expr import Basic, Fin, OrderExpr, Repeat
from .oag_expr import Adjoin, DirectPair, GroupExpr, RibLeaf

RIB_CHOICES = (og.Z, og.Q, og.z_local(2), og.z_local(3), og.z_local(2, 3))
SHAPES = (ce.OMEGA, ce.OMEGA_STAR, ce.ZETA, ce.ETA)


def random_chain(rng: random.Random, depth: int = 3, alphabet: tuple[str, ...] = ("a", "b")) -> OrderExpr:
    if depth <= 1 or rng.random() < 0.35:
        kind = rng.randrange(3)
        if kind == 0:
            k = rng.randint(1, 3)
            return Fin(tuple(rng.choice(alphabet) for _ in range(k)))
        return Basic(rng.choice(SHAPES), rng.choice(alphabet))
    if rng.random() < 0.5:
        parts = [random_chain(rng, depth - 1, alphabet) for _ in range(rng.randint(2, 3))]
        return ce.concat(*parts) or Fin((alphabet[0],))
    return Repeat(rng.choice(SHAPES), random_chain(rng, depth - 1, alphabet))


def random_index(rng: random.Random, colours: tuple[str, ...]) -> OrderExpr:
    kind = rng.randrange(4)
    if kind == 0:
        k = rng.randint(1, 3)
        return Fin(tuple(rng.choice(colours) for _ in range(k)))
    if kind == 1:
        return Basic(rng.choice(SHAPES), rng.choice(colours))
    if kind == 2:
        body = Fin(tuple(rng.choice(colours) for _ in range(rng.randint(1, 2))))
        return Repeat(rng.choice(SHAPES), body)
    return ce.concat(
        Basic(rng.choice(SHAPES), rng.choice(colours)),
        Fin((rng.choice(colours),)),
    )


def random_group(rng: random.Random, depth: int = 3) -> GroupExpr:
    if depth <= 1 or rng.random() < 0.3:
        if rng.random() < 0.15:
            return Adjoin(rng.choice((2, 3, 4)))
        return RibLeaf(rng.choice(RIB_CHOICES))
    kind = rng.randrange(3)
    if kind == 0:
        k = rng.randint(2, 3)
        return DirectPair(tuple(random_group(rng, depth - 1) for _ in range(k)))
    if kind == 1:
        cols = ("c0", "c1")
        index = random_index(rng, cols)
        assign = {c: random_group(rng, depth - 1) for c in ce.colours(index)}
        return og.lex_sum(index, assign)
    return Adjoin(rng.choice((2, 3, 4)))


@dataclass
class CorpusReport:
    groups: int = 0
    spines: int = 0
    axiom_failures: list[str] = field(default_factory=list)
    consistency_failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.axiom_failures and not self.consistency_failures


def run_axiom_corpus(
    count: int = 200,
    seed: int = 0,
    moduli: tuple[int, ...] = (2, 3, 4, 6, 8, 12),
    m_max: int = 3,
) -> CorpusReport:
    """Every spine of a seeded random corpus must satisfy the axiom suite."""
    rng = random.Random(seed)
    report = CorpusReport()
    for i in range(count):
        g = random_group(rng, depth=3)
        report.groups += 1
        for n in moduli:
            s = sp.spine(g, n)
            report.spines += 1
            for res in sp.check_schmitt_axioms(s, m_max):
                if not res.passed:
                    report.axiom_failures.append(
                        f"group#{i} n={n} {res.axiom} witness={res.witness}"
                    )
    return report


def run_consistency_corpus(
    count: int = 200, seed: int = 0, k_max: int = 3
) -> CorpusReport:
    """Cross-theorem invariants on a seeded random corpus."""
    rng = random.Random(seed)
    report = CorpusReport()
    for i in range(count):
        g = random_group(rng, depth=3)
        report.groups += 1
        strong = ad.strongly_aug_infinitesimals(g)
        weak = ad.weakly_aug_infinitesimals(g, k_max)
        if strong.status is ad.Status.YES and weak.status is ad.Status.NO:
            report.consistency_failures.append(f"group#{i}: strong Yes but weak No")
        if strong.status is ad.Status.YES and og.has_min_positive(g):
            report.consistency_failures.append(
                f"group#{i}: strongly augmentable with a minimum positive element"
            )
        try:
            ad.divisible_augment_profile(g)
        except ad.InvariantViolation as exc:
            report.consistency_failures.append(f"group#{i}: {exc}")
        h = random_group(rng, depth=2)
        n = rng.choice((2, 3, 6))
        law = sp.spine_sum_law(g, h, n)
        report.spines += 1
        if not law.holds:
            report.consistency_failures.append(
                f"group#{i}: sum law failed ({law.case}) at n={n}"
            )
    return report
