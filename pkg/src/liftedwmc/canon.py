"""Deterministic canonical forms for theories.

The form is invariant under renaming of logvars, populations, and
constants, and under reordering of clauses, disjuncts, and prefix
variables within a quantifier kind.  Population sizes are excluded from
the form and carried alongside as a vector in canonical order, which is
what the subproblem cache keys on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations, product as iproduct

from .logic import Clause, Const, ExistBlock, Literal, Theory, Var
from .numbers import format_rational


@dataclass(frozen=True)
class CanonicalForm:
    text: str
    pop_order: tuple  # population names, canonical order
    const_order: tuple

    def digest(self) -> str:
        import hashlib

        return hashlib.sha1(self.text.encode()).hexdigest()[:12]


def _used_names(theory: Theory):
    pops = []
    consts = []
    seen_p, seen_c = set(), set()

    def add_pop(name):
        if name not in seen_p:
            seen_p.add(name)
            pops.append(name)

    def add_const(name):
        if name not in seen_c:
            seen_c.add(name)
            consts.append(name)

    for cl in theory.clauses:
        for v in cl.variables():
            add_pop(v.pop)
        for c in cl.constants_used():
            add_const(c.name)
    pop_names = {p.name for p in theory.populations}
    for e in theory.scope:
        for cname in e.classes:
            (add_pop if cname in pop_names else add_const)(cname)
    for n in theory.divisor_notes:
        add_pop(n.domain)
        for a in n.fixed_args:
            add_const(a.name)
    for p in theory.populations:
        if p.name in seen_p:
            for m in sorted(p.members):
                add_const(m)
    return pops, consts


def _occurrence_profile(theory: Theory, pops, consts):
    """Name-independent starting colors for the refinement."""
    prof = {name: [] for name in pops + consts}
    for cl in theory.clauses:
        kind = {}
        for v in cl.universals:
            kind[v.name] = "u"
        for v in cl.existentials:
            kind[v.name] = "e"
        for d in cl.disjuncts:
            lits = d.body if isinstance(d, ExistBlock) else (d,)
            if isinstance(d, ExistBlock):
                kind[d.var.name] = "b"
            for lit in lits:
                for i, a in enumerate(lit.args):
                    tag = (lit.pred, i, lit.sign)
                    if isinstance(a, Var):
                        prof[a.pop].append(("v", kind.get(a.name, "b")) + tag)
                    else:
                        prof[a.name].append(("c",) + tag)
    for e in theory.scope:
        for i, cname in enumerate(e.classes):
            if cname in prof:
                prof[cname].append(("s", e.pred, i))
    membership = {}
    for p in theory.populations:
        for m in p.members:
            membership[m] = p.name
    colors = {}
    for name in pops:
        members = sorted(
            m for m, pn in membership.items() if pn == name and m in prof
        )
        colors[name] = ("P", tuple(sorted(prof[name])), len(members))
    for name in consts:
        colors[name] = ("C", tuple(sorted(prof[name])), name in membership)
    return colors


def _serialize(theory: Theory, pop_id, const_id) -> str:
    """Full canonical text for one candidate naming."""
    clause_texts = sorted({_clause_text(cl, pop_id, const_id) for cl in theory.clauses})
    scope_texts = sorted(
        "{}[{}]{}".format(
            e.pred,
            ",".join(_class_token(c, pop_id, const_id) for c in e.classes),
            "".join(str(g) for g in e.groups),
        )
        for e in theory.scope
    )
    weight_texts = sorted(
        f"{name}:{format_rational(pos)}:{format_rational(neg)}"
        for name, pos, neg in theory.weights.items
    )
    note_texts = sorted(
        "div:{}:{}:{}:{}".format(
            n.pred,
            pop_id[n.domain],
            n.position,
            ",".join(_class_token(a.name, pop_id, const_id) for a in n.fixed_args),
        )
        for n in theory.divisor_notes
    )
    member_texts = []
    for p in theory.populations:
        if p.name in pop_id:
            ms = sorted(const_id[m] for m in p.members if m in const_id)
            if ms:
                member_texts.append(f"mem:P{pop_id[p.name]}:{ms}")
    member_texts.sort()
    return ";".join(
        [
            "|".join(clause_texts),
            "|".join(scope_texts),
            "|".join(weight_texts),
            "|".join(note_texts),
            "|".join(member_texts),
        ]
    )


def _class_token(name, pop_id, const_id):
    if name in pop_id:
        return f"P{pop_id[name]}"
    return f"K{const_id[name]}"


def _clause_text(cl: Clause, pop_id, const_id) -> str:
    """Minimal serialization over admissible prefix reorderings.

    Universals may be permuted freely, as may existentials; the boundary
    between the two blocks is semantic and preserved.
    """
    best = None
    for uni in _var_orderings(cl.universals, pop_id):
        for exi in _var_orderings(cl.existentials, pop_id):
            names = {v.name: f"u{i}" for i, v in enumerate(uni)}
            names.update({v.name: f"e{i}" for i, v in enumerate(exi)})
            dtexts = sorted(_disjunct_text(d, names, pop_id, const_id) for d in cl.disjuncts)
            prefix = ",".join(f"u{i}P{pop_id[v.pop]}" for i, v in enumerate(uni))
            prefix += ";" + ",".join(f"e{i}P{pop_id[v.pop]}" for i, v in enumerate(exi))
            text = prefix + "." + "|".join(dtexts)
            if best is None or text < best:
                best = text
    return best


def _var_orderings(vs, pop_id):
    """Orderings grouped by population id; permutes within groups only."""
    if len(vs) <= 1:
        yield tuple(vs)
        return
    ordered = sorted(vs, key=lambda v: pop_id[v.pop])
    groups = []
    for v in ordered:
        if groups and pop_id[groups[-1][0].pop] == pop_id[v.pop]:
            groups[-1].append(v)
        else:
            groups.append([v])
    for combo in iproduct(*[permutations(g) for g in groups]):
        yield tuple(v for group in combo for v in group)


def _disjunct_text(d, names, pop_id, const_id):
    if isinstance(d, ExistBlock):
        inner_names = dict(names)
        inner_names[d.var.name] = "w"
        body = sorted(_literal_text(l, inner_names, pop_id, const_id) for l in d.body)
        return f"(wP{pop_id[d.var.pop]}:{'|'.join(body)})"
    return _literal_text(d, names, pop_id, const_id)


def _literal_text(lit: Literal, names, pop_id, const_id):
    args = []
    for a in lit.args:
        if isinstance(a, Var):
            args.append(names[a.name])
        else:
            args.append(f"K{const_id[a.name]}")
    return ("" if lit.sign else "!") + lit.pred + "(" + ",".join(args) + ")"


def _refine(theory: Theory, pops, consts, colors, rounds=2):
    for _ in range(rounds):
        order = sorted(pops, key=lambda n: (colors[n], n == n))
        # Provisional ids from current colors; ties share an id.
        pop_rank = {}
        for n in sorted(pops, key=lambda n: colors[n]):
            pop_rank.setdefault(colors[n], len(pop_rank))
        const_rank = {}
        for n in sorted(consts, key=lambda n: colors[n]):
            const_rank.setdefault(colors[n], len(const_rank))
        pop_id = {n: pop_rank[colors[n]] for n in pops}
        const_id = {n: const_rank[colors[n]] for n in consts}
        signature = {n: [] for n in pops + consts}
        for cl in theory.clauses:
            text = _clause_text(cl, pop_id, const_id)
            for v in cl.variables():
                signature[v.pop].append(text)
            for c in cl.constants_used():
                signature[c.name].append(text)
        new = {}
        for n in pops + consts:
            new[n] = (colors[n], tuple(sorted(signature[n])))
        if all(
            (new[a] == new[b]) == (colors[a] == colors[b])
            for a in pops + consts
            for b in pops + consts
        ):
            colors = new
            break
        colors = new
    return colors


@lru_cache(maxsize=200000)
def canonical_form(theory: Theory) -> CanonicalForm:
    """Compute the canonical form; cached per theory value."""
    pops, consts = _used_names(theory)
    colors = _occurrence_profile(theory, pops, consts)
    if len(pops) + len(consts) > 1:
        colors = _refine(theory, pops, consts, colors)

    def tie_groups(namelist):
        groups = {}
        for n in namelist:
            groups.setdefault(colors[n], []).append(n)
        return [groups[c] for c in sorted(groups)]

    pop_groups = tie_groups(pops)
    const_groups = tie_groups(consts)
    best = None
    best_orders = None
    for pop_perm in iproduct(*[permutations(g) for g in pop_groups]):
        pop_order = [n for g in pop_perm for n in g]
        pop_id = {n: i for i, n in enumerate(pop_order)}
        for const_perm in iproduct(*[permutations(g) for g in const_groups]):
            const_order = [n for g in const_perm for n in g]
            const_id = {n: i for i, n in enumerate(const_order)}
            text = _serialize(theory, pop_id, const_id)
            if best is None or text < best:
                best = text
                best_orders = (tuple(pop_order), tuple(const_order))
    if best is None:  # no populations or constants at all
        best = _serialize(theory, {}, {})
        best_orders = ((), ())
    return CanonicalForm(best, best_orders[0], best_orders[1])


def canonicalize(theory: Theory) -> CanonicalForm:
    """Public alias; see canonical_form."""
    return canonical_form(theory)


def theories_isomorphic(a: Theory, b: Theory) -> bool:
    """Structural identity up to renaming; population sizes are ignored."""
    return canonical_form(a).text == canonical_form(b).text


def cache_key(theory: Theory):
    """(canonical text, size vector, weight fingerprint) for memoization."""
    form = canonical_form(theory)
    sizes = tuple(theory.population(n).size for n in form.pop_order)
    return (form.text, sizes)
