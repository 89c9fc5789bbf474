"""Shared rewriting machinery: domain expansion, assertion propagation,
normalization to a quiescent form, and the inverse-shatter merge.

Everything here assumes (or establishes) the flat convention: no constant
is a member of any domain, so distinct object classes are disjoint.  The
parser produces member constants; `normalize` extracts them first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Optional

from .logic import (
    Clause,
    Const,
    DivisorNote,
    ExistBlock,
    Literal,
    LogicError,
    Population,
    ScopeEntry,
    Theory,
    Var,
    normalize_groups,
)
from .numbers import falling_factorial


class RewriteError(LogicError):
    pass


@dataclass
class Step:
    """One recorded rewrite for tracing."""

    rule: str
    detail: str
    multiplier: Fraction
    result: Theory


@dataclass
class NormalResult:
    theory: Theory
    multiplier: Fraction
    steps: list
    unsat: bool = False


# ---------------------------------------------------------------------------
# assertion patterns


@dataclass(frozen=True)
class Pattern:
    """A set of ground literals: sign, predicate, per-position classes and
    an equality grouping.  Same-class different-group positions denote
    distinct objects, matching the clause distinctness convention."""

    sign: bool
    pred: str
    classes: tuple
    groups: tuple

    def entry(self) -> ScopeEntry:
        return ScopeEntry(self.pred, self.classes, self.groups)


def literal_pattern(lit: Literal, theory: Theory, sign=None) -> Pattern:
    """The pattern a clause literal ranges over (flat theories only)."""
    classes = []
    keys = []
    for a in lit.args:
        if isinstance(a, Var):
            classes.append(a.pop)
            keys.append(("v", a.name))
        else:
            if theory.member_of(a.name) is not None:
                raise RewriteError(
                    f"literal over member constant {a.name}; extract it first"
                )
            classes.append(a.name)
            keys.append(("c", a.name))
    return Pattern(
        lit.sign if sign is None else sign,
        lit.pred,
        tuple(classes),
        normalize_groups(keys),
    )


def pattern_count(p: Pattern, theory: Theory) -> Optional[int]:
    """Ground atoms the pattern covers; None when a size is unknown."""
    by_class = {}
    for c, g in zip(p.classes, p.groups):
        by_class.setdefault(c, set()).add(g)
    total = 1
    for c, groups in by_class.items():
        size = theory.class_size(c)
        if size is None:
            return None
        total *= falling_factorial(size, len(groups))
    return total


# ---------------------------------------------------------------------------
# domain expansion: reveal a constant or split into parts

# A target is ("pop", Population) or ("const", Const).  Expansion rewrites
# every clause and scope entry of the named domain over the targets,
# honoring distinctness: at most one variable per clause may take a given
# constant target, and none may if that constant already occurs there.


def expand_domain(theory: Theory, domain: str, targets: list) -> Theory:
    dom = theory.population(domain)
    const_targets = [t[1] for t in targets if t[0] == "const"]
    pop_targets = [t[1] for t in targets if t[0] == "pop"]
    routed = {c.name for c in const_targets}
    for p in pop_targets:
        routed |= p.members
    if dom.members - routed:
        raise RewriteError(
            f"cannot expand {domain}: members {sorted(dom.members - routed)} "
            f"not routed to any part"
        )
    for p in pop_targets:
        if p.root != dom.root:
            raise RewriteError("expansion part has mismatched root")
        if theory.has_population(p.name):
            raise RewriteError(f"expansion part {p.name} already exists")

    new_clauses = []
    for cl in theory.clauses:
        new_clauses.extend(_expand_clause(cl, domain, const_targets, pop_targets))
    # Deduplicate while preserving order.
    seen = set()
    clauses = []
    for cl in new_clauses:
        if cl not in seen:
            seen.add(cl)
            clauses.append(cl)

    new_scope = []
    for e in theory.scope:
        new_scope.extend(_expand_entry(e, domain, const_targets, pop_targets))

    pops = tuple(p for p in theory.populations if p.name != domain) + tuple(
        pop_targets
    )
    known = {c.name for c in theory.constants}
    consts = theory.constants + tuple(
        c for c in const_targets if c.name not in known
    )
    for n in theory.divisor_notes:
        if n.domain == domain:
            raise RewriteError("cannot expand a domain with a pending divisor")
    return theory.replace(
        populations=pops,
        constants=consts,
        clauses=tuple(clauses),
        scope=tuple(new_scope),
    )


def _expand_clause(cl: Clause, domain, const_targets, pop_targets):
    dom_unis = [v for v in cl.universals if v.pop == domain]
    dom_exis = [v for v in cl.existentials if v.pop == domain]
    if len(dom_exis) > 1:
        raise RewriteError(
            "expansion over a domain with two existential logvars in one "
            "clause is not supported"
        )
    if dom_exis and any(isinstance(d, ExistBlock) for d in cl.disjuncts):
        raise RewriteError(
            "expansion of an existential prefix over a clause with nested "
            "blocks is not supported"
        )
    clause_const_names = {c.name for c in cl.constants_used()}

    choices = []
    for v in dom_unis:
        opts = [("const", c) for c in const_targets] + [
            ("pop", p) for p in pop_targets
        ]
        choices.append(opts)
    out = []
    for combo in iproduct(*choices):
        taken = set()
        ok = True
        for kind, target in combo:
            if kind == "const":
                if target.name in taken or target.name in clause_const_names:
                    ok = False
                    break
                taken.add(target.name)
        if not ok:
            continue
        subst = {}
        new_unis = []
        for v in cl.universals:
            if v.pop != domain:
                new_unis.append(v)
                continue
            kind, target = combo[dom_unis.index(v)]
            if kind == "const":
                subst[v.name] = target
            else:
                nv = Var(v.name, target.name)
                subst[v.name] = nv
                new_unis.append(nv)
        variant_consts = clause_const_names | taken
        out.extend(
            _expand_clause_exis(
                cl, new_unis, subst, dom_exis, domain, const_targets,
                pop_targets, variant_consts,
            )
        )
    return out


def _expand_clause_exis(
    cl, new_unis, subst, dom_exis, domain, const_targets, pop_targets,
    variant_consts,
):
    """Expand the existential prefix variable (if any) and the blocks."""
    if dom_exis:
        ev = dom_exis[0]
        other_exis = tuple(v for v in cl.existentials if v is not ev)
        disjuncts = []
        for c in const_targets:
            if c.name in variant_consts:
                continue
            s2 = dict(subst)
            s2[ev.name] = c
            for d in cl.disjuncts:
                disjuncts.append(_subst_literal(d, s2))
        for p in pop_targets:
            nv = Var(ev.name, p.name)
            s2 = dict(subst)
            s2[ev.name] = nv
            body = tuple(_subst_literal(d, s2) for d in cl.disjuncts)
            disjuncts.append(ExistBlock(nv, body))
        return [Clause(tuple(new_unis), other_exis, _dedupe(disjuncts))]

    disjuncts = []
    for d in cl.disjuncts:
        if isinstance(d, ExistBlock) and d.var.pop == domain:
            for c in const_targets:
                if c.name in variant_consts:
                    continue
                s2 = dict(subst)
                s2[d.var.name] = c
                for lit in d.body:
                    disjuncts.append(_subst_literal(lit, s2))
            for p in pop_targets:
                nv = Var(d.var.name, p.name)
                s2 = dict(subst)
                s2[d.var.name] = nv
                disjuncts.append(
                    ExistBlock(nv, tuple(_subst_literal(l, s2) for l in d.body))
                )
        else:
            disjuncts.append(_subst_disjunct(d, subst))
    return [Clause(tuple(new_unis), cl.existentials, _dedupe(disjuncts))]


def _dedupe(items):
    seen = set()
    out = []
    for it in items:
        if it not in seen:
            seen.add(it)
            out.append(it)
    return tuple(out)


def _subst_literal(lit: Literal, subst) -> Literal:
    args = tuple(
        subst.get(a.name, a) if isinstance(a, Var) else a for a in lit.args
    )
    return Literal(lit.sign, lit.pred, args)


def _subst_disjunct(d, subst):
    if isinstance(d, ExistBlock):
        inner = {k: v for k, v in subst.items() if k != d.var.name}
        return ExistBlock(d.var, tuple(_subst_literal(l, inner) for l in d.body))
    return _subst_literal(d, subst)


def _expand_entry(e: ScopeEntry, domain, const_targets, pop_targets):
    dom_groups = sorted(
        {g for c, g in zip(e.classes, e.groups) if c == domain}
    )
    if not dom_groups:
        return [e]
    opts = [("const", c) for c in const_targets] + [("pop", p) for p in pop_targets]
    out = []
    for combo in iproduct(opts, repeat=len(dom_groups)):
        taken = set()
        ok = True
        for kind, target in combo:
            if kind == "const":
                if target.name in taken:
                    ok = False
                    break
                taken.add(target.name)
        if not ok:
            continue
        assign = dict(zip(dom_groups, combo))
        classes = []
        for c, g in zip(e.classes, e.groups):
            if c == domain:
                kind, target = assign[g]
                classes.append(target.name)
            else:
                classes.append(c)
        out.append(ScopeEntry(e.pred, tuple(classes), e.groups))
    return out


# ---------------------------------------------------------------------------
# assertion propagation


def assert_pattern(theory: Theory, pattern: Pattern, weighted=True):
    """Assert every ground literal of the pattern.

    Returns (theory, multiplier).  The asserted atoms leave the scope;
    clauses satisfied by the assertion are dropped and falsified literal
    occurrences are removed.  An emptied clause stays as the
    unsatisfiable marker.
    """
    entry = pattern.entry()
    if entry not in theory.scope:
        raise RewriteError(f"asserted atoms not in scope: {pattern}")
    mult = Fraction(1)
    if weighted:
        count = pattern_count(pattern, theory)
        if count is None:
            raise RewriteError("cannot weight an assertion over unsized domains")
        pos, neg = theory.weights.get(pattern.pred)
        mult = (pos if pattern.sign else neg) ** count
    notes = list(theory.divisor_notes)
    for n in list(notes):
        if _note_matches(n, pattern):
            notes.remove(n)
            if pattern.sign:
                # Every tracked atom true: the witness overcount is the
                # domain size plus the witness itself.
                if weighted:
                    size = theory.class_size(n.domain)
                    if size is None:
                        raise RewriteError("divisor discharge needs a size")
                    mult /= size + 1
            # A full negative assertion pins the count to the witness
            # alone; no correction needed.

    new_clauses = []
    for cl in theory.clauses:
        kept = _apply_assertion_clause(cl, pattern, theory)
        if kept is not None:
            new_clauses.append(kept)
    scope = tuple(e for e in theory.scope if e != entry)
    out = theory.replace(
        clauses=_dedupe(new_clauses), scope=scope, divisor_notes=tuple(notes)
    )
    return out, mult


def _note_matches(note: DivisorNote, pattern: Pattern) -> bool:
    if note.pred != pattern.pred:
        return False
    fixed = list(note.fixed_args)
    for i, c in enumerate(pattern.classes):
        if i == note.position:
            if c != note.domain:
                return False
        else:
            expect = fixed.pop(0)
            if c != expect.name:
                return False
    return True


def _apply_assertion_clause(cl: Clause, pattern: Pattern, theory):
    """None = clause satisfied and dropped; otherwise the rewritten clause."""
    new_disjuncts = []
    for d in cl.disjuncts:
        if isinstance(d, ExistBlock):
            body = []
            satisfied = False
            for lit in d.body:
                m = _matches(lit, pattern, theory)
                if m and lit.sign == pattern.sign:
                    satisfied = True
                    break
                if m:
                    continue  # falsified literal drops out of the block
                body.append(lit)
            if satisfied:
                return None
            if body:
                new_disjuncts.append(ExistBlock(d.var, tuple(body)))
            # An emptied block disappears from the disjunction.
        else:
            m = _matches(d, pattern, theory)
            if m and d.sign == pattern.sign:
                return None
            if m:
                continue
            new_disjuncts.append(d)
    return Clause(cl.universals, cl.existentials, tuple(new_disjuncts))


def _matches(lit: Literal, pattern: Pattern, theory) -> bool:
    if lit.pred != pattern.pred:
        return False
    p = literal_pattern(lit, theory)
    return p.classes == pattern.classes and p.groups == pattern.groups


def find_unit(theory: Theory) -> Optional[int]:
    """Index of the first unit clause: one plain literal, no existentials."""
    for i, cl in enumerate(theory.clauses):
        if (
            len(cl.disjuncts) == 1
            and not cl.existentials
            and isinstance(cl.disjuncts[0], Literal)
        ):
            return i
    return None


# ---------------------------------------------------------------------------
# member extraction (the constant-splitting half of shattering)


def extract_member(theory: Theory, const_name: str) -> Theory:
    """Pull a member constant out of its domain: D becomes {C} plus D'."""
    dom_name = theory.member_of(const_name)
    if dom_name is None:
        raise RewriteError(f"{const_name} is not a member of any domain")
    dom = theory.population(dom_name)
    rest = Population(
        fresh_population_name(theory, dom_name),
        None if dom.size is None else dom.size - 1,
        dom.root,
        dom.members - {const_name},
    )
    const = theory.constant(const_name)
    return expand_domain(theory, dom_name, [("const", const), ("pop", rest)])


def fresh_population_name(theory: Theory, base: str) -> str:
    taken = {p.name for p in theory.populations}
    taken |= {c.name for c in theory.constants}
    i = 2
    root = base.rstrip("0123456789") or base
    while True:
        cand = f"{root}{i}"
        if cand not in taken:
            return cand
        i += 1


def fresh_constant_name(theory: Theory, base: str) -> str:
    taken = {c.name for c in theory.constants}
    taken |= {p.name for p in theory.populations}
    if base not in taken:
        return base
    i = 2
    while True:
        cand = f"{base}{i}"
        if cand not in taken:
            return cand
        i += 1


# ---------------------------------------------------------------------------
# structural simplification


def simplify_clauses(theory: Theory):
    """Size-aware structural cleanup; returns (theory, changed, unsat).

    Drops vacuous clauses (unsatisfiable prefixes over small domains),
    removes empty existential parts, deduplicates, drops tautologies, and
    hoists single-block clauses back into prefix form.
    """
    changed = False
    out = []
    for cl in theory.clauses:
        if cl.is_empty:
            out.append(cl)
            continue
        res = _simplify_clause(cl, theory)
        if res is cl:
            out.append(cl)
            continue
        changed = True
        if res is not None:
            out.append(res)
    deduped = _dedupe(out)
    if len(deduped) != len(out):
        changed = True
    t = theory.replace(clauses=tuple(deduped)) if changed else theory
    return t, changed


def _admissible_count(pop_size, n_vars):
    if pop_size is None:
        return None
    return falling_factorial(pop_size, n_vars)


def _simplify_clause(cl: Clause, theory: Theory):
    """None = drop (vacuous or tautological); otherwise a clause."""
    # Vacuous universal prefix: some domain cannot seat its distinct vars.
    by_pop = {}
    for v in cl.universals:
        by_pop.setdefault(v.pop, []).append(v)
    for pop, vs in by_pop.items():
        size = theory.population(pop).size
        if size is not None and falling_factorial(size, len(vs)) == 0:
            return None

    # Existential prefix over an impossible domain falsifies the clause.
    exi_by_pop = {}
    for v in cl.existentials:
        exi_by_pop.setdefault(v.pop, []).append(v)
    for pop, vs in exi_by_pop.items():
        size = theory.population(pop).size
        need = len(vs) + len(by_pop.get(pop, ()))
        if size is not None and falling_factorial(size, need) == 0:
            return Clause(cl.universals, (), ())

    disjuncts = []
    changed = False
    for d in cl.disjuncts:
        if isinstance(d, ExistBlock):
            size = theory.population(d.var.pop).size
            need = 1 + len(by_pop.get(d.var.pop, ())) + len(
                exi_by_pop.get(d.var.pop, ())
            )
            if size is not None and falling_factorial(size, need) == 0:
                changed = True
                continue  # block over an empty remainder is false
            body = _dedupe(d.body)
            if _tautological(body):
                return None
            if len(body) != len(d.body):
                changed = True
            disjuncts.append(ExistBlock(d.var, body))
        else:
            disjuncts.append(d)
    disjuncts = _dedupe(disjuncts)
    if _tautological([d for d in disjuncts if isinstance(d, Literal)]):
        return None
    if len(disjuncts) != len(cl.disjuncts):
        changed = True

    # A clause that is nothing but one existential block is a prefix
    # existential in disguise; hoisting reunifies split forms.
    if len(disjuncts) == 1 and isinstance(disjuncts[0], ExistBlock):
        b = disjuncts[0]
        return Clause(cl.universals, cl.existentials + (b.var,), b.body)

    # Prefix vars used by no literal quantify nothing; dropping one is
    # sound unless a surviving same-domain variable would lose a
    # distinctness constraint through it.
    used = set()
    block_pops = set()
    for d in disjuncts:
        lits = d.body if isinstance(d, ExistBlock) else (d,)
        if isinstance(d, ExistBlock):
            block_pops.add(d.var.pop)
        for lit in lits:
            for a in lit.args:
                if isinstance(a, Var):
                    used.add(a.name)

    def droppable(v):
        if v.name in used:
            return False
        return v.pop not in block_pops and not any(
            w.pop == v.pop for w in cl.existentials if w.name != v.name
        )

    exis = tuple(v for v in cl.existentials if not droppable(v))
    unis = tuple(v for v in cl.universals if not droppable(v))
    if exis != cl.existentials or unis != cl.universals:
        changed = True

    if not changed:
        return cl
    return Clause(unis, exis, disjuncts)


def _tautological(lits) -> bool:
    seen = {l for l in lits if isinstance(l, Literal)}
    return any(l.negate() in seen for l in seen)
