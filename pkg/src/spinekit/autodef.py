"""Definability of henselian valuations from the value group.

A value group makes every henselian valuation with that group definable
(with parameters) exactly when it is not strongly augmentable by
infinitesimals, and parameter-free definable exactly when it is not weakly
augmentable by infinitesimals.  In the definable case the defining formula
is the generalized Robinson formula for a prime p and a witness whose
p-fundament is trivial; its correctness is checkable purely at the value
group level through the multiplicative stabilizer it defines.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import aug_decide as ad
from . import oag_expr as og
from .aug_decide import Status
from .oag_expr import (
    Adjoin,
    GroupElement,
    GroupError,
    GroupExpr,
    RibLeaf,
    prime_factors,
)


@dataclass(frozen=True)
class RingFormula:
    """The generalized Robinson formula for a prime p.

    phi is the p-th power condition (residue characteristic away from p)
    or its Artin-Schreier variant (residue characteristic p); psi defines
    the multiplicative stabilizer of the set phi cuts out.
    """

    p: int

    def phi_text(self, char_p: bool) -> str:
        if char_p:
            return f"(exists y)(1 + t*x^{self.p} = y^{self.p} - y)"
        return f"(exists y)(1 + t*x^{self.p} = y^{self.p})"

    def psi_text(self, char_p: bool) -> str:
        phi_y = self.phi_text(char_p).replace("x^", "y^").replace("*x", "*y")
        phi_xy = self.phi_text(char_p).replace("x^", "(x*y)^").replace("*x", "*(x*y)")
        return f"(forall y)({phi_y} -> {phi_xy})"

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "psi_residue_char_other": self.psi_text(False),
            "psi_residue_char_p": self.psi_text(True),
            "note": "variant selection depends on the residue characteristic",
        }


def has_automatic_definability(g: GroupExpr) -> bool:
    """Every henselian valuation with this value group is definable."""
    return ad.strongly_aug_infinitesimals(g).status is Status.NO


def has_automatic_0_definability(g: GroupExpr, k_max: int = 4) -> Optional[bool]:
    """Parameter-free variant; None propagates an unresolved verdict."""
    v = ad.weakly_aug_infinitesimals(g, k_max)
    if v.status is Status.UNKNOWN:
        return None
    return v.status is Status.NO


@dataclass(frozen=True)
class RobinsonWitness:
    p: int
    gamma: Optional[GroupElement]
    description: str
    formula: RingFormula


def _last_f_generator(g: GroupExpr) -> Optional[tuple[int, Optional[GroupElement], str]]:
    """A prime p and element whose p-fundament is trivial, if any exists.

    The trivial subgroup is a fundament value exactly when the final
    archimedean component blocks divisibility: a last rib that is not
    p-divisible (take its unit), or a final adjoined block whose constant
    is divisible by p (take the diagonal itself).
    """
    res = og.last_component_path(g)
    if res is None:
        return None
    comp, path = res
    if isinstance(comp, RibLeaf):
        rib = comp.rib
        for p in og.relevant_primes(g):
            if not rib.p_divisible(p):
                pos = og.last_position(g)
                return p, og.unit(g, pos), f"unit at the final position (rib {rib.name})"
        return None
    if isinstance(comp, Adjoin):
        p = min(prime_factors(comp.c))
        return (
            p,
            og.diagonal(g, path, 1),
            f"diagonal of the final adjoined block (constant {comp.c})",
        )
    return None


def robinson_formula(g: GroupExpr) -> Optional[RobinsonWitness]:
    """Emit (p, witness, formula) when the group has automatic definability.

    The reduction from a composite modulus to a prime goes through the
    decomposition of fundaments over prime powers; in the supported class
    the final component yields the prime witness directly.
    """
    if not has_automatic_definability(g):
        return None
    found = _last_f_generator(g)
    if found is None:
        raise ad.InvariantViolation(
            "automatic definability without a trivial-fundament generator"
        )
    p, gamma, desc = found
    if gamma is not None:
        ref = og.fn_fundament(g, gamma, p)
        if ref is not og.ZERO:
            raise ad.InvariantViolation(f"emitted witness has fundament {ref!r}")
    return RobinsonWitness(p, gamma, desc, RingFormula(p))


@dataclass(frozen=True)
class StabilizerReport:
    ok: bool
    checked: int
    counterexample: Optional[str] = None


def _sample_elements(g: GroupExpr, box: int, per_axis: int = 5) -> list[GroupElement]:
    positions = og.finite_positions(g)
    vals = sorted({v for v in (-box, -box // 2, -1, 1, box // 2, box) if v != 0})
    out = [og.unit(g, pos, v) for pos, _ in positions for v in vals]
    # a deterministic spread of two-coordinate combinations
    for i in range(len(positions)):
        for j in range(i + 1, len(positions)):
            for vi, vj in ((1, 1), (1, -1), (-1, box), (box, -1)):
                out.append(
                    og.element(g, {positions[i][0]: vi, positions[j][0]: vj})
                )
    out.append(og.zero(g))
    return out


def robinson_semantics_check(
    g: GroupExpr, gamma: GroupElement, p: int, box_bound: int = 8
) -> StabilizerReport:
    """Value-group check of the set the Robinson formula defines.

    With value(t) = gamma, the power condition cuts out
    I = {a : p*a > -gamma}; the formula defines its multiplicative
    stabilizer S = {b : I + b is contained in I}.  The check asserts, over
    a sampled box, that S = {b : b >= 0 or b in F_p(gamma)}.
    """
    if prime_factors(p) != {p: 1}:
        raise GroupError(f"{p} is not prime")
    if og.is_n_divisible(g, gamma, p):
        raise GroupError("the witness value must not be p-divisible")
    if og.sign(gamma) <= 0:
        raise GroupError("the witness value must be positive")
    fund = og.fn_fundament(g, gamma, p)
    neg_gamma = og.negate(gamma)

    def in_i(a: GroupElement) -> bool:
        return og.compare(og.scale(a, p), neg_gamma) > 0

    sample = _sample_elements(g, box_bound)
    members = [a for a in sample if in_i(a)]
    checked = 0
    for b in sample:
        stable = all(in_i(og.add(a, b)) for a in members)
        predicted = og.sign(b) >= 0 or og.element_in_ref(g, b, fund)
        checked += 1
        if stable != predicted:
            return StabilizerReport(
                False,
                checked,
                f"b={dict(b.coords)!r}: stabilizer={stable}, predicted={predicted}",
            )
    return StabilizerReport(True, checked)
