"""Command line front end.

Exit codes: 0 for Yes/pass/true, 1 for No/fail/false, 2 for Unknown,
64 for usage errors, 65 for inputs outside the supported class.

Chain DSL:    1, 3[a,b,a], w, w*, zeta, eta, rep(w, <chain>), colours as @name,
              terms joined with +.
Group DSL:    Z | Q | Z_(2,3) | sum[<chain>](<ribmap>) | adjoin(sum[w](Z), c),
              terms joined with (+).  A ribmap is a single value applied to
              every colour or comma-separated name:value entries; values are
              ribs, adjoin(...), or a parenthesized group.
Sentence DSL: E x. / A x. quantifiers, ~ & | ->, atoms x<y, x=y, x<=y and
              colour predicates written colour(x).
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from fractions import Fraction
from typing import Optional

from . import aug_decide as ad
from . import autodef as at
from . import chain_aug as ca
from . import chain_expr as ce
from . import corpus as corpus_mod
from . import fo_chain as fo
from . import oag_expr as og
from . import spine as sp
from .chain_expr import Basic, ChainError, Fin, OrderExpr, Repeat
from .oag_expr import Adjoin, DirectPair, GroupError, GroupExpr, RibLeaf, UnsupportedError

EXIT_YES = 0
EXIT_NO = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 64
EXIT_UNSUPPORTED = 65


class ParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Tokenizer


_TOKEN = re.compile(
    r"\s*(?:(?P<oplus>\(\+\))|(?P<rib>Z_\(\s*\d+(?:\s*,\s*\d+)*\s*\))"
    r"|(?P<nat>\d+)|(?P<wstar>w\*)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<sym><=|->|[@\[\],()+.:<=~&|]))"
)


def _tokenize(text: str) -> list[str]:
    out, i = [], 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m or m.end() == i:
            if text[i:].strip():
                raise ParseError(f"cannot read input at column {i + 1}: {text[i:i + 12]!r}")
            break
        i = m.end()
        out.append(m.group().strip())
    return out


class _Cursor:
    def __init__(self, tokens: list[str], text: str):
        self.toks = tokens
        self.i = 0
        self.text = text

    def peek(self) -> Optional[str]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError(f"unexpected end of input in {self.text!r}")
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise ParseError(f"expected {tok!r}, got {got!r} in {self.text!r}")

    def done(self) -> None:
        if self.peek() is not None:
            raise ParseError(f"trailing input {self.toks[self.i:]!r} in {self.text!r}")


# ---------------------------------------------------------------------------
# Chain DSL

_SHAPE_TOKENS = {"w": ce.OMEGA, "w*": ce.OMEGA_STAR, "zeta": ce.ZETA, "eta": ce.ETA}


def _parse_colour(cur: _Cursor) -> Optional[str]:
    if cur.peek() == "@":
        cur.next()
        return cur.next()
    return None


def _parse_chain_term(cur: _Cursor) -> OrderExpr:
    tok = cur.next()
    if tok.isdigit():
        n = int(tok)
        if cur.peek() == "[":
            cur.next()
            cols = [cur.next()]
            while cur.peek() == ",":
                cur.next()
                cols.append(cur.next())
            cur.expect("]")
            if len(cols) != n:
                raise ParseError(f"block of length {n} with {len(cols)} colours")
            return Fin(tuple(cols))
        if n == 0:
            return ce.EMPTY
        return ce.fin(n)
    if tok in _SHAPE_TOKENS:
        colour = _parse_colour(cur) or ce.DEFAULT_COLOUR
        return Basic(_SHAPE_TOKENS[tok], colour)
    if tok == "rep":
        cur.expect("(")
        shape_tok = cur.next()
        if shape_tok not in _SHAPE_TOKENS:
            raise ParseError(f"unknown shape {shape_tok!r}")
        cur.expect(",")
        body = _parse_chain_expr(cur)
        cur.expect(")")
        return Repeat(_SHAPE_TOKENS[shape_tok], body)
    raise ParseError(f"unexpected token {tok!r} in a chain")


def _parse_chain_expr(cur: _Cursor) -> OrderExpr:
    parts = [_parse_chain_term(cur)]
    while cur.peek() == "+":
        cur.next()
        parts.append(_parse_chain_term(cur))
    return ce.concat(*parts)


def parse_chain(text: str) -> OrderExpr:
    cur = _Cursor(_tokenize(text), text)
    out = _parse_chain_expr(cur)
    cur.done()
    return out


# ---------------------------------------------------------------------------
# Group DSL


def _parse_rib(tok: str) -> og.Rib:
    if tok == "Z":
        return og.Z
    if tok == "Q":
        return og.Q
    if tok.startswith("Z_("):
        primes = [int(p) for p in tok[3:-1].split(",")]
        return og.z_local(*primes)
    raise ParseError(f"unknown rib {tok!r}")


def _parse_adjoin(cur: _Cursor) -> Adjoin:
    cur.expect("(")
    cur.expect("sum")
    cur.expect("[")
    if cur.next() != "w":
        raise ParseError("adjoined blocks are built over sum[w](Z)")
    cur.expect("]")
    cur.expect("(")
    if cur.next() != "Z":
        raise ParseError("adjoined blocks are built over sum[w](Z)")
    cur.expect(")")
    cur.expect(",")
    c = cur.next()
    if not c.isdigit():
        raise ParseError(f"adjoined constant must be a natural, got {c!r}")
    cur.expect(")")
    return Adjoin(int(c))


def _parse_map_value(cur: _Cursor) -> GroupExpr:
    tok = cur.peek()
    if tok == "adjoin":
        cur.next()
        return _parse_adjoin(cur)
    if tok == "(":
        cur.next()
        g = _parse_group_expr(cur)
        cur.expect(")")
        return g
    return RibLeaf(_parse_rib(cur.next()))


def _try_parse_named_map(cur: _Cursor, index: OrderExpr) -> GroupExpr:
    entries = {}
    while True:
        name = cur.next()
        cur.expect(":")
        entries[name] = _parse_map_value(cur)
        if cur.peek() == ",":
            cur.next()
            continue
        cur.expect(")")
        return og.lex_sum(index, entries)


def _parse_sum_term(cur: _Cursor) -> GroupExpr:
    cur.expect("[")
    index = _parse_chain_expr(cur)
    cur.expect("]")
    cur.expect("(")
    # lookahead: name ':' starts a named map
    save = cur.i
    tok = cur.next()
    if cur.peek() == ":":
        cur.i = save
        return _try_parse_named_map(cur, index)
    cur.i = save
    value = _parse_map_value(cur)
    cur.expect(")")
    return og.lex_sum(index, {c: value for c in ce.colours(index)})


def _parse_group_term(cur: _Cursor) -> GroupExpr:
    tok = cur.peek()
    if tok == "sum":
        cur.next()
        return _parse_sum_term(cur)
    if tok == "adjoin":
        cur.next()
        return _parse_adjoin(cur)
    return RibLeaf(_parse_rib(cur.next()))


def _parse_group_expr(cur: _Cursor) -> GroupExpr:
    parts = [_parse_group_term(cur)]
    while cur.peek() == "(+)":
        cur.next()
        parts.append(_parse_group_term(cur))
    if len(parts) == 1:
        return parts[0]
    return DirectPair(tuple(parts))


def parse_group(text: str) -> GroupExpr:
    cur = _Cursor(_tokenize(text), text)
    out = _parse_group_expr(cur)
    cur.done()
    return out


def render_group(g: GroupExpr) -> str:
    match g:
        case RibLeaf(r):
            return r.name
        case DirectPair(parts):
            return " (+) ".join(render_group(p) for p in parts)
        case Adjoin(c):
            return f"adjoin(sum[w](Z), {c})"
        case og.LexSum(index, assign):
            values = {c: render_group(sub) for c, sub in assign}
            used = {values[c] for c in ce.colours(index)}
            if len(used) == 1:
                body = next(iter(used))
                if not isinstance(g.summand(next(iter(ce.colours(index)))), RibLeaf):
                    body = f"({body})" if not body.startswith("adjoin") else body
                return f"sum[{ce.render(index)}]({body})"
            entries = ", ".join(
                f"{c}:{values[c]}" if isinstance(g.summand(c), RibLeaf) else f"{c}:({values[c]})"
                for c in sorted(ce.colours(index))
            )
            return f"sum[{ce.render(index)}]({entries})"
    raise GroupError(f"not a GroupExpr: {g!r}")


# ---------------------------------------------------------------------------
# Sentence DSL


def parse_sentence(text: str) -> fo.Sentence:
    cur = _Cursor(_tokenize(text), text)
    out = _parse_sentence(cur)
    cur.done()
    return out


def _parse_sentence(cur: _Cursor) -> fo.Sentence:
    tok = cur.peek()
    if tok in ("E", "A", "exists", "forall"):
        cur.next()
        var = cur.next()
        if cur.peek() == ".":
            cur.next()
        body = _parse_sentence(cur)
        return fo.Exists(var, body) if tok in ("E", "exists") else fo.Forall(var, body)
    return _parse_implies(cur)


def _parse_implies(cur: _Cursor) -> fo.Sentence:
    left = _parse_or(cur)
    if cur.peek() == "->":
        cur.next()
        right = _parse_sentence(cur)
        return fo.Implies(left, right)
    return left


def _parse_or(cur: _Cursor) -> fo.Sentence:
    parts = [_parse_and(cur)]
    while cur.peek() == "|":
        cur.next()
        parts.append(_parse_and(cur))
    return parts[0] if len(parts) == 1 else fo.Or(tuple(parts))


def _parse_and(cur: _Cursor) -> fo.Sentence:
    parts = [_parse_unary(cur)]
    while cur.peek() == "&":
        cur.next()
        parts.append(_parse_unary(cur))
    return parts[0] if len(parts) == 1 else fo.And(tuple(parts))


def _parse_unary(cur: _Cursor) -> fo.Sentence:
    tok = cur.peek()
    if tok == "~":
        cur.next()
        return fo.Not(_parse_unary(cur))
    if tok == "(":
        cur.next()
        inner = _parse_sentence(cur)
        cur.expect(")")
        return inner
    if tok in ("E", "A", "exists", "forall"):
        return _parse_sentence(cur)
    name = cur.next()
    nxt = cur.peek()
    if nxt == "(":
        cur.next()
        var = cur.next()
        cur.expect(")")
        return fo.Col(var, frozenset({name}))
    if nxt == "<":
        cur.next()
        return fo.Lt(name, cur.next())
    if nxt == "<=":
        cur.next()
        return fo.le(name, cur.next())
    if nxt == "=":
        cur.next()
        return fo.Eq(name, cur.next())
    raise ParseError(f"unexpected token {nxt!r} after {name!r}")


# ---------------------------------------------------------------------------
# Commands


def _status_exit(status) -> int:
    name = status.value if hasattr(status, "value") else status
    return {"yes": EXIT_YES, "no": EXIT_NO, "unknown": EXIT_UNKNOWN}[name]


def _chain_verdict_json(v: ca.AugVerdict) -> dict:
    return {
        "verdict": v.status.value,
        "witness": ce.render(v.witness) if v.witness is not None else None,
        "base": ce.render(v.base) if v.base is not None else None,
        "refutation_rank": v.refutation_rank,
        "evidence": [v.reason] if v.reason else [],
    }


def _group_verdict_json(v: ad.GroupAugVerdict) -> dict:
    w = v.witness
    if isinstance(w, GroupExpr):
        w = render_group(w)
    return {
        "verdict": v.status.value,
        "mode": list(v.mode),
        "witness": w,
        "evidence": list(v.evidence),
    }


def _cmd_spine(args) -> int:
    g = parse_group(args.group)
    s = sp.spine(g, args.n)
    if args.json:
        print(json.dumps(sp.to_json_dict(s), indent=2, sort_keys=True))
    elif args.dot:
        print(sp.to_dot(s))
    else:
        print(sp.render_ascii(s))
    return EXIT_YES


def _cmd_axioms(args) -> int:
    g = parse_group(args.group)
    s = sp.spine(g, args.n)
    results = sp.check_schmitt_axioms(s, args.m_max)
    ok = True
    for r in results:
        ok &= r.passed
        detail = f" witness={r.witness}" if r.witness else ""
        print(f"{r.axiom}: {'pass' if r.passed else 'FAIL'}{detail}")
    return EXIT_YES if ok else EXIT_NO


def _cmd_aug(args) -> int:
    g = parse_group(args.group)
    if args.side == "sup":
        v = ad.strongly_aug_infinites(g)
        if args.mode == "weak":
            v = ad.GroupAugVerdict(v.status, ("weak", "infinite"), v.witness, v.evidence)
    elif args.mode == "strong":
        v = ad.strongly_aug_infinitesimals(g)
    else:
        v = ad.weakly_aug_infinitesimals(g, args.k_max)
    if args.json:
        print(json.dumps(_group_verdict_json(v), indent=2, sort_keys=True))
    else:
        w = v.witness
        if isinstance(w, GroupExpr):
            w = render_group(w)
        print(f"{v.status.value}" + (f" (witness: {w})" if w else ""))
        for e in v.evidence:
            print(f"  - {e}")
    return _status_exit(v.status)


def _cmd_chain_aug(args) -> int:
    x = parse_chain(args.chain)
    fns = {
        ("strong", "right"): ca.strongly_augmentable_right,
        ("strong", "left"): ca.strongly_augmentable_left,
        ("weak", "right"): lambda c: ca.weakly_augmentable_right(c, args.k_max),
        ("weak", "left"): lambda c: ca.weakly_augmentable_left(c, args.k_max),
    }
    v = fns[(args.mode, args.side)](x)
    if args.json:
        print(json.dumps(_chain_verdict_json(v), indent=2, sort_keys=True))
    else:
        w = f" (witness: {ce.render(v.witness)})" if v.witness is not None else ""
        r = f" (refuted at rank {v.refutation_rank})" if v.refutation_rank else ""
        print(f"{v.status.value}{w}{r}")
    return _status_exit(v.status)


def _cmd_chain_equiv(args) -> int:
    x, y = parse_chain(args.chain1), parse_chain(args.chain2)
    same = fo.equiv_k(x, y, args.k)
    print("equivalent" if same else "distinguishable")
    return EXIT_YES if same else EXIT_NO


def _cmd_eval(args) -> int:
    x = parse_chain(args.chain)
    f = parse_sentence(args.sentence)
    value = fo.eval_sentence(x, f)
    print("true" if value else "false")
    return EXIT_YES if value else EXIT_NO


def _cmd_autodef(args) -> int:
    g = parse_group(args.group)
    if args.empty_set:
        res = at.has_automatic_0_definability(g, args.k_max)
        if res is None:
            print("unknown")
            return EXIT_UNKNOWN
    else:
        res = at.has_automatic_definability(g)
    print("true" if res else "false")
    return EXIT_YES if res else EXIT_NO


def _cmd_robinson(args) -> int:
    g = parse_group(args.group)
    w = at.robinson_formula(g)
    if w is None:
        print("none (the group is strongly augmentable by infinitesimals)")
        return EXIT_NO
    if args.json:
        out = w.formula.to_json_dict()
        out["witness"] = w.description
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        print(f"p = {w.p}")
        print(f"witness value: {w.description}")
        print(f"residue characteristic != {w.p}: {w.formula.psi_text(False)}")
        print(f"residue characteristic  = {w.p}: {w.formula.psi_text(True)}")
    return EXIT_YES


def _cmd_corpus(args) -> int:
    rep = corpus_mod.run_axiom_corpus(args.count, args.seed, m_max=args.m_max)
    print(f"axioms: {rep.groups} groups, {rep.spines} spines, "
          f"{len(rep.axiom_failures)} failures")
    for f in rep.axiom_failures[:10]:
        print(f"  {f}")
    rep2 = corpus_mod.run_consistency_corpus(args.count // 4 or 1, args.seed)
    print(f"consistency: {rep2.groups} groups, {len(rep2.consistency_failures)} failures")
    for f in rep2.consistency_failures[:10]:
        print(f"  {f}")
    return EXIT_YES if rep.ok and rep2.ok else EXIT_NO


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinekit", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("spine", help="compute the n-spine of a group")
    s.add_argument("group")
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--json", action="store_true")
    s.add_argument("--dot", action="store_true")
    s.set_defaults(fn=_cmd_spine)

    s = sub.add_parser("axioms", help="run the spine axiom suite")
    s.add_argument("group")
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--m-max", type=int, default=3)
    s.set_defaults(fn=_cmd_axioms)

    s = sub.add_parser("aug", help="group augmentability")
    s.add_argument("group")
    s.add_argument("--mode", choices=("strong", "weak"), default="strong")
    s.add_argument("--side", choices=("inf", "sup"), default="inf")
    s.add_argument("--k-max", type=int, default=4)
    s.add_argument("--json", action="store_true")
    s.set_defaults(fn=_cmd_aug)

    s = sub.add_parser("chain-aug", help="coloured chain augmentability")
    s.add_argument("chain")
    s.add_argument("--mode", choices=("strong", "weak"), default="weak")
    s.add_argument("--side", choices=("right", "left"), default="right")
    s.add_argument("--k-max", type=int, default=4)
    s.add_argument("--json", action="store_true")
    s.set_defaults(fn=_cmd_chain_aug)

    s = sub.add_parser("chain-equiv", help="bounded-rank equivalence of chains")
    s.add_argument("chain1")
    s.add_argument("chain2")
    s.add_argument("-k", type=int, default=4)
    s.set_defaults(fn=_cmd_chain_equiv)

    s = sub.add_parser("eval", help="evaluate a sentence on a chain")
    s.add_argument("chain")
    s.add_argument("sentence")
    s.set_defaults(fn=_cmd_eval)

    s = sub.add_parser("autodef", help="automatic definability from the value group")
    s.add_argument("group")
    s.add_argument("--empty-set", action="store_true")
    s.add_argument("--k-max", type=int, default=4)
    s.set_defaults(fn=_cmd_autodef)

    s = sub.add_parser("robinson", help="emit the generalized defining formula")
    s.add_argument("group")
    s.add_argument("--json", action="store_true")
    s.set_defaults(fn=_cmd_robinson)

    s = sub.add_parser("corpus", help="randomized invariant suite")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=50)
    s.add_argument("--m-max", type=int, default=3)
    s.set_defaults(fn=_cmd_corpus)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ParseError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnsupportedError,) as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ChainError, GroupError, fo.KRankError, fo.SentenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
