"""WMC-preserving theory rewrites and the normalization driver.

Public operations: skolemize_step / skolemize, unit_propagate, shatter,
instantiate_witness.  `normalize` chains the non-branching rules
(simplification, member extraction, unit propagation, population merge,
scope factoring) to quiescence; the solver calls it before every cache
boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .canon import canonical_form
from .logic import (
    Clause,
    Const,
    DivisorNote,
    ExistBlock,
    Literal,
    LogicError,
    Population,
    Predicate,
    ScopeEntry,
    Theory,
    Var,
    full_scope_entries,
)
from .numbers import falling_factorial
from .rewrite import (
    NormalResult,
    Pattern,
    RewriteError,
    Step,
    assert_pattern,
    expand_domain,
    extract_member,
    find_unit,
    fresh_constant_name,
    fresh_population_name,
    literal_pattern,
    pattern_count,
    simplify_clauses,
)


@dataclass(frozen=True)
class RewriteResult:
    """A rewrite with its exact accounting.

    WMC(input) = multiplier * WMC(theory), where a non-None
    branch_divisor_rule obliges any later lifted case analysis on the
    matching atoms to divide branch i by i + 1.
    """

    theory: Theory
    multiplier: Optional[Fraction]
    branch_divisor_rule: Optional[DivisorNote] = None


class TransformError(LogicError):
    pass


# ---------------------------------------------------------------------------
# Skolemization


def _clause_has_existential(cl: Clause) -> bool:
    return bool(cl.existentials) or any(
        isinstance(d, ExistBlock) for d in cl.disjuncts
    )


def _fresh_pred_name(theory: Theory) -> str:
    used = {p.name for p in theory.predicates}
    used |= {p.name for p in theory.populations}
    used |= {c.name for c in theory.constants}
    for letter in "ABCDEFGHIJKLMNOPQRSTUVWXYZ":
        if letter not in used:
            return letter
    i = 1
    while f"A{i}" in used:
        i += 1
    return f"A{i}"


def skolemize_step(theory: Theory, clause_index: int) -> Theory:
    """Eliminate the existential structure of one clause.

    The clause `forall X (exists Y): D1 | ... | Dk` is replaced by one
    clause `forall X, Y(, W): !Di' | A(X)` per disjunct, with A fresh and
    weighted (1, -1); block-bound variables are universalized alongside.
    """
    if not 0 <= clause_index < len(theory.clauses):
        raise TransformError(f"no clause at index {clause_index}")
    cl = theory.clauses[clause_index]
    if not _clause_has_existential(cl):
        raise TransformError("clause has no existential quantifier")

    name = _fresh_pred_name(theory)
    a_args = tuple(cl.universals)
    a_pred = Predicate(name, tuple(theory.population(v.pop).root for v in a_args))
    a_lit = Literal(True, name, a_args)

    new_clauses = []
    base_prefix = cl.universals + cl.existentials
    for d in cl.disjuncts:
        if isinstance(d, ExistBlock):
            for lit in d.body:
                new_clauses.append(
                    Clause(base_prefix + (d.var,), (), (lit.negate(), a_lit))
                )
        else:
            new_clauses.append(Clause(base_prefix, (), (d.negate(), a_lit)))

    clauses = (
        theory.clauses[:clause_index]
        + tuple(new_clauses)
        + theory.clauses[clause_index + 1 :]
    )
    a_scope = full_scope_entries(a_pred, [[v.pop] for v in a_args])
    return theory.replace(
        predicates=theory.predicates + (a_pred,),
        clauses=clauses,
        weights=theory.weights.with_entry(name, Fraction(1), Fraction(-1)),
        scope=theory.scope + tuple(a_scope),
    )


def skolemize(theory: Theory) -> Theory:
    """Fixpoint of skolemize_step; exact WMC is preserved."""
    while True:
        for i, cl in enumerate(theory.clauses):
            if _clause_has_existential(cl):
                theory = skolemize_step(theory, i)
                break
        else:
            return theory


# ---------------------------------------------------------------------------
# unit propagation (single application, public surface)


def unit_propagate(theory: Theory, unit_clause_index: int) -> RewriteResult:
    """Assert one unit clause across the theory.

    The clause must be a single positive or negative literal under an
    all-universal prefix.  Weight accounting happens here: the multiplier
    carries phi (or phi-bar) to the number of groundings.
    """
    if not 0 <= unit_clause_index < len(theory.clauses):
        raise TransformError(f"no clause at index {unit_clause_index}")
    cl = theory.clauses[unit_clause_index]
    if (
        len(cl.disjuncts) != 1
        or cl.existentials
        or not isinstance(cl.disjuncts[0], Literal)
    ):
        raise TransformError("clause is not unit")
    pattern = literal_pattern(cl.disjuncts[0], theory)
    out, mult = assert_pattern(theory, pattern)
    return RewriteResult(out, mult)


# ---------------------------------------------------------------------------
# shattering


def shatter(theory: Theory) -> Theory:
    """Extract every member constant so argument classes are homogeneous.

    Clauses over a domain with a named member split into the member's
    instances and the remainder domain; repeated to fixpoint.  Semantics
    are preserved exactly.
    """
    while True:
        member = None
        for c in theory.constants:
            if theory.member_of(c.name) is not None:
                member = c.name
                break
        if member is None:
            return theory
        theory = extract_member(theory, member)


# ---------------------------------------------------------------------------
# existential witness instantiation


def instantiate_witness(theory: Theory, clause_index: int) -> RewriteResult:
    """Replace a ground existential by a named witness object.

    For a clause `exists v in D: L(..., v, ...)` whose other arguments
    are constants, reveal a fresh constant M in D with L true, rewrite
    the theory over D' = D minus M, and multiply by |D| (the number of
    ways to pick M).  The returned divisor note records the pending
    i + 1 correction for any later case analysis on L over D'.
    """
    if not 0 <= clause_index < len(theory.clauses):
        raise TransformError(f"no clause at index {clause_index}")
    cl = theory.clauses[clause_index]
    ok = (
        not cl.universals
        and len(cl.existentials) == 1
        and len(cl.disjuncts) == 1
        and isinstance(cl.disjuncts[0], Literal)
        and cl.disjuncts[0].sign
    )
    if ok:
        lit = cl.disjuncts[0]
        v = cl.existentials[0]
        ok = all(
            (isinstance(a, Var) and a == v) or isinstance(a, Const)
            for a in lit.args
        ) and any(isinstance(a, Var) and a == v for a in lit.args)
    if not ok:
        raise TransformError(
            "witness instantiation needs a clause of the form "
            "'exists v: L(v, constants...)'"
        )
    dom = theory.population(v.pop)
    if dom.members:
        raise TransformError("witness domain has unextracted members")
    if sum(1 for a in lit.args if isinstance(a, Var)) != 1:
        raise TransformError("the witness variable must fill exactly one slot")

    m = Const(fresh_constant_name(theory, "M"), dom.root)
    rest = Population(
        fresh_population_name(theory, dom.name),
        None if dom.size is None else dom.size - 1,
        dom.root,
        frozenset(),
    )
    base = theory.replace(
        clauses=theory.clauses[:clause_index] + theory.clauses[clause_index + 1 :]
    )
    expanded = expand_domain(base, dom.name, [("const", m), ("pop", rest)])
    position = next(
        i for i, a in enumerate(lit.args) if isinstance(a, Var) and a == v
    )
    unit = Literal(True, lit.pred, tuple(
        m if isinstance(a, Var) else a for a in lit.args
    ))
    note = DivisorNote(
        lit.pred,
        rest.name,
        position,
        tuple(a for a in lit.args if isinstance(a, Const)),
    )
    out = expanded.replace(
        clauses=expanded.clauses + (Clause((), (), (unit,)),),
        divisor_notes=expanded.divisor_notes + (note,),
    )
    multiplier = None if dom.size is None else Fraction(dom.size)
    return RewriteResult(out, multiplier, note)


def find_ground_existential(theory: Theory) -> Optional[int]:
    """Index of the first clause instantiate_witness can consume."""
    for i, cl in enumerate(theory.clauses):
        if (
            not cl.universals
            and len(cl.existentials) == 1
            and len(cl.disjuncts) == 1
            and isinstance(cl.disjuncts[0], Literal)
            and cl.disjuncts[0].sign
        ):
            lit = cl.disjuncts[0]
            v = cl.existentials[0]
            if (
                sum(1 for a in lit.args if isinstance(a, Var)) == 1
                and any(isinstance(a, Var) and a == v for a in lit.args)
                and all(
                    isinstance(a, Const) or a == v for a in lit.args
                )
                and not theory.population(v.pop).members
            ):
                return i
    return None


# ---------------------------------------------------------------------------
# population merge (inverse shattering over a forgotten split)


def try_merge(theory: Theory):
    """Merge two same-root domains when the clause set is exactly the
    shattering of a single merged domain; returns the merged theory or
    None.  Verified by round-tripping through expand_domain."""
    pops = list(theory.populations)
    noted = {n.domain for n in theory.divisor_notes}
    for i in range(len(pops)):
        for j in range(i + 1, len(pops)):
            d1, d2 = pops[i], pops[j]
            if d1.root != d2.root:
                continue
            if d1.name in noted or d2.name in noted:
                continue
            if (d1.size is None) != (d2.size is None):
                continue
            merged = _merge_candidate(theory, d1, d2)
            if merged is None:
                continue
            back = expand_domain(
                merged["theory"],
                merged["name"],
                [("pop", d1), ("pop", d2)],
            )
            if canonical_form(back).text == canonical_form(theory).text:
                return merged["theory"]
    return None


def _merge_candidate(theory: Theory, d1: Population, d2: Population):
    name = fresh_population_name(theory, d1.root)
    size = None if d1.size is None else d1.size + d2.size
    m = Population(name, size, d1.root, d1.members | d2.members)

    def map_var(v: Var) -> Var:
        return Var(v.name, name) if v.pop in (d1.name, d2.name) else v

    def map_literal(lit: Literal) -> Literal:
        return Literal(
            lit.sign,
            lit.pred,
            tuple(map_var(a) if isinstance(a, Var) else a for a in lit.args),
        )

    clauses = []
    for cl in theory.clauses:
        disjuncts = []
        for d in cl.disjuncts:
            if isinstance(d, ExistBlock):
                disjuncts.append(
                    ExistBlock(map_var(d.var), tuple(map_literal(l) for l in d.body))
                )
            else:
                disjuncts.append(map_literal(d))
        clauses.append(
            Clause(
                tuple(map_var(v) for v in cl.universals),
                tuple(map_var(v) for v in cl.existentials),
                tuple(disjuncts),
            )
        )
    seen = set()
    merged_clauses = []
    for cl in clauses:
        if cl not in seen:
            seen.add(cl)
            merged_clauses.append(cl)

    scope = []
    sseen = set()
    for e in theory.scope:
        classes = tuple(
            name if c in (d1.name, d2.name) else c for c in e.classes
        )
        ne = ScopeEntry(e.pred, classes, e.groups)
        if ne not in sseen:
            sseen.add(ne)
            scope.append(ne)

    pops = tuple(
        p for p in theory.populations if p.name not in (d1.name, d2.name)
    ) + (m,)
    return {
        "theory": theory.replace(
            populations=pops, clauses=tuple(merged_clauses), scope=tuple(scope)
        ),
        "name": name,
    }


# ---------------------------------------------------------------------------
# scope factoring: pay out atoms no clause constrains


def factor_scope(theory: Theory, weighted=True):
    """Multiply out unconstrained atoms and prune unused symbols.

    Returns (theory, multiplier).  Every scope entry not mentioned by any
    clause literal contributes (phi + phi-bar) ** count; the remaining
    scope is exactly the mentioned entries.
    """
    mentioned = set()
    for cl in theory.clauses:
        for lit in cl.literals():
            mentioned.add(literal_pattern(lit, theory).entry())
    missing = mentioned - set(theory.scope)
    if missing:
        raise RewriteError(f"clauses mention out-of-scope atoms: {missing}")
    mult = Fraction(1)
    keep = []
    for e in theory.scope:
        if e in mentioned:
            keep.append(e)
            continue
        if weighted:
            count = pattern_count(
                Pattern(True, e.pred, e.classes, e.groups), theory
            )
            if count is None:
                raise RewriteError("cannot factor unsized scope")
            pos, neg = theory.weights.get(e.pred)
            mult *= (pos + neg) ** count
    scope = tuple(keep)

    used_pops = set()
    used_consts = set()
    used_preds = set()
    for cl in theory.clauses:
        used_pops |= cl.domains_used()
        used_consts |= {c.name for c in cl.constants_used()}
        used_preds |= {lit.pred for lit in cl.literals()}
    pop_names = {p.name for p in theory.populations}
    for e in scope:
        used_preds.add(e.pred)
        for c in e.classes:
            (used_pops if c in pop_names else used_consts).add(c)
    for n in theory.divisor_notes:
        used_pops.add(n.domain)
        used_preds.add(n.pred)
        used_consts |= {a.name for a in n.fixed_args}
    for p in theory.populations:
        if p.name in used_pops:
            used_consts |= p.members

    out = theory.replace(
        populations=tuple(p for p in theory.populations if p.name in used_pops),
        constants=tuple(c for c in theory.constants if c.name in used_consts),
        predicates=tuple(p for p in theory.predicates if p.name in used_preds),
        weights=theory.weights.restricted(used_preds),
        scope=scope,
    )
    return out, mult


# ---------------------------------------------------------------------------
# normalization driver


def normalize(theory: Theory, weighted=True, collect=None) -> NormalResult:
    """Chain non-branching rules to quiescence.

    Order per iteration: structural simplification, member extraction,
    unit propagation, population merge.  Scope factoring runs once at the
    end.  Halts immediately at an empty clause (the unsatisfiable
    marker), leaving the residual untouched for inspection.
    """
    mult = Fraction(1)
    steps = collect if collect is not None else []

    def record(rule, detail, m, t):
        steps.append(Step(rule, detail, m, t))

    while True:
        if theory.has_empty_clause:
            return NormalResult(theory, mult, steps, unsat=True)

        simplified, changed = simplify_clauses(theory)
        if changed:
            theory = simplified
            record("simplify", "structural cleanup", Fraction(1), theory)
            continue

        member = None
        for c in theory.constants:
            dom = theory.member_of(c.name)
            if dom is None:
                continue
            if any(c in cl.constants_used() for cl in theory.clauses):
                member = c.name
                break
        if member is not None:
            theory = extract_member(theory, member)
            record("shatter", f"extract {member}", Fraction(1), theory)
            continue

        idx = find_unit(theory)
        if idx is not None:
            lit = theory.clauses[idx].disjuncts[0]
            pattern = literal_pattern(lit, theory)
            theory, m = assert_pattern(theory, pattern, weighted=weighted)
            mult *= m
            record("unit_propagation", f"assert {lit!r}", m, theory)
            continue

        widx = find_ground_existential(theory)
        if widx is not None:
            res = instantiate_witness(theory, widx)
            theory = res.theory
            m = res.multiplier if res.multiplier is not None else Fraction(1)
            mult *= m
            record("witness", f"instantiate clause {widx}", m, theory)
            continue

        merged = try_merge(theory)
        if merged is not None:
            theory = merged
            record("merge", "rejoin split domains", Fraction(1), theory)
            continue

        break

    factored, m = factor_scope(theory, weighted=weighted)
    if m != 1 or factored != theory:
        theory = factored
        mult *= m
        record("factor", "unconstrained atoms", m, theory)
    return NormalResult(theory, mult, steps)
