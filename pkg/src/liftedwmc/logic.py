"""Core types for finite-domain, function-free clausal first-order theories.

Conventions baked into the representation:

* Distinctness: two logvars of the same domain in one clause always denote
  different objects, and a logvar is distinct from any constant that is a
  member of its domain and appears in the same clause.  No explicit
  disequality literals exist anywhere.
* Domains with the same root label but different names are disjoint object
  sets (a split of the root population).  Constants that are not a member
  of any domain are standalone objects of their root.
* Everything is immutable after construction; theories can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Iterable, Iterator, Optional, Union

from .numbers import falling_factorial


class LogicError(Exception):
    """Base for all errors raised by this package."""


class ValidationError(LogicError):
    """A structurally ill-formed theory component."""


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class Var:
    """A logical variable, scoped to the clause that binds it."""

    name: str
    pop: str  # name of the domain it ranges over

    def __repr__(self):
        return f"{self.name}:{self.pop}"


@dataclass(frozen=True)
class Const:
    """A named object.  `root` is the declared population it was drawn from."""

    name: str
    root: str

    def __repr__(self):
        return self.name


Term = Union[Var, Const]


# ---------------------------------------------------------------------------
# populations and predicates


@dataclass(frozen=True)
class Population:
    """A finite domain of anonymous objects plus optionally named members.

    `size`, when bound, counts named members as well as anonymous objects.
    `root` names the declared population this domain descends from; splits
    and reveals produce fresh domains sharing the ancestor's root.
    """

    name: str
    size: Optional[int] = None
    root: Optional[str] = None
    members: frozenset = frozenset()

    def __post_init__(self):
        if self.root is None:
            object.__setattr__(self, "root", self.name)
        if not isinstance(self.members, frozenset):
            object.__setattr__(self, "members", frozenset(self.members))
        if self.size is not None:
            if self.size < 0:
                raise ValidationError(f"population {self.name} has negative size")
            if len(self.members) > self.size:
                raise ValidationError(
                    f"population {self.name}: {len(self.members)} named members "
                    f"exceed size {self.size}"
                )


@dataclass(frozen=True)
class Predicate:
    name: str
    arg_roots: tuple

    @property
    def arity(self) -> int:
        return len(self.arg_roots)


# ---------------------------------------------------------------------------
# literals, existential blocks, clauses


@dataclass(frozen=True)
class Literal:
    sign: bool  # True = positive
    pred: str
    args: tuple

    def negate(self) -> "Literal":
        return Literal(not self.sign, self.pred, self.args)

    @property
    def atom(self):
        return (self.pred, self.args)

    def __repr__(self):
        s = "" if self.sign else "!"
        return f"{s}{self.pred}({', '.join(map(repr, self.args))})"


@dataclass(frozen=True)
class ExistBlock:
    """An existentially quantified disjunction nested inside a clause.

    Only single-variable blocks are supported; the bound variable must
    occur in every body literal's argument list is not required, but it
    must occur somewhere in the body.
    """

    var: Var
    body: tuple  # tuple[Literal, ...]

    def __post_init__(self):
        if not self.body:
            raise ValidationError("existential block with empty body")
        if not any(self.var in lit.args for lit in self.body):
            raise ValidationError(
                f"existential block variable {self.var.name} unused in its body"
            )

    def __repr__(self):
        return f"(exists {self.var!r} . {' | '.join(map(repr, self.body))})"


Disjunct = Union[Literal, ExistBlock]


@dataclass(frozen=True)
class Clause:
    """A prenex generalized clause: quantifier prefix plus a disjunction.

    The prefix is `forall universals, exists existentials`; further
    existential structure lives in ExistBlock disjuncts.  An empty
    disjunct tuple is falsity (the unsatisfiable marker).
    """

    universals: tuple = ()
    existentials: tuple = ()
    disjuncts: tuple = ()

    def __post_init__(self):
        bound = {}
        for v in self.universals + self.existentials:
            if v.name in bound:
                raise ValidationError(f"logvar {v.name} bound twice in clause prefix")
            bound[v.name] = v
        for d in self.disjuncts:
            if isinstance(d, ExistBlock):
                if d.var.name in bound:
                    raise ValidationError(
                        f"block variable {d.var.name} shadows the clause prefix"
                    )
                inner = dict(bound)
                inner[d.var.name] = d.var
                for lit in d.body:
                    _check_literal_vars(lit, inner)
            else:
                _check_literal_vars(d, bound)

    @property
    def is_empty(self) -> bool:
        return not self.disjuncts

    def literals(self) -> Iterator[Literal]:
        """All literals, including those inside blocks."""
        for d in self.disjuncts:
            if isinstance(d, ExistBlock):
                yield from d.body
            else:
                yield d

    def variables(self) -> tuple:
        """Every variable bound by this clause, prefix then block vars."""
        out = list(self.universals) + list(self.existentials)
        for d in self.disjuncts:
            if isinstance(d, ExistBlock):
                out.append(d.var)
        return tuple(out)

    def domains_used(self) -> set:
        return {v.pop for v in self.variables()}

    def constants_used(self) -> set:
        out = set()
        for lit in self.literals():
            for a in lit.args:
                if isinstance(a, Const):
                    out.add(a)
        return out

    def __repr__(self):
        parts = []
        if self.universals:
            parts.append("forall " + ",".join(v.name for v in self.universals))
        if self.existentials:
            parts.append("exists " + ",".join(v.name for v in self.existentials))
        head = " ".join(parts)
        body = " | ".join(map(repr, self.disjuncts)) if self.disjuncts else "FALSE"
        return f"[{head} . {body}]" if head else f"[. {body}]"


def _check_literal_vars(lit: Literal, bound: dict):
    for a in lit.args:
        if isinstance(a, Var):
            if a.name not in bound:
                raise ValidationError(f"unbound logvar {a.name} in {lit!r}")
            if bound[a.name].pop != a.pop:
                raise ValidationError(
                    f"logvar {a.name} used with domain {a.pop}, bound over "
                    f"{bound[a.name].pop}"
                )


# ---------------------------------------------------------------------------
# atom scope: which ground atoms a theory owns

# A scope entry is (pred, classes, groups): `classes` maps argument
# positions to a domain or constant name; `groups` is an equality pattern
# over positions of the same class (same group = same object, different
# groups of one class = distinct objects).  Entries denote disjoint atom
# sets, and their union is exactly the set of ground atoms whose weights
# this theory is responsible for.


@dataclass(frozen=True)
class ScopeEntry:
    pred: str
    classes: tuple
    groups: tuple

    def __post_init__(self):
        # Groups must be normalized: first occurrences in increasing order.
        seen = {}
        for g in self.groups:
            if g not in seen:
                if g != len(seen):
                    raise ValidationError(f"unnormalized scope groups {self.groups}")
                seen[g] = True


def normalize_groups(raw: Iterable) -> tuple:
    """Renumber an equality pattern into first-occurrence order."""
    mapping = {}
    out = []
    for g in raw:
        if g not in mapping:
            mapping[g] = len(mapping)
        out.append(mapping[g])
    return tuple(out)


def _set_partitions(items: list) -> Iterator[list]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def full_scope_entries(pred: Predicate, position_classes: list) -> list:
    """All entries covering the full product of per-position class choices.

    `position_classes` gives, per argument position, the list of class
    names that can fill it.  Same-class positions are expanded over every
    equality pattern so that distinct entries stay disjoint.
    """
    out = []
    for combo in iproduct(*position_classes):
        by_class = {}
        for i, c in enumerate(combo):
            by_class.setdefault(c, []).append(i)
        # Cartesian product of set partitions per class.
        per_class = []
        for c, positions in by_class.items():
            per_class.append(list(_set_partitions(positions)))
        for chosen in iproduct(*per_class):
            group_of = {}
            gid = 0
            for partition in chosen:
                for block in partition:
                    for pos in block:
                        group_of[pos] = gid
                    gid += 1
            groups = normalize_groups(group_of[i] for i in range(len(combo)))
            out.append(ScopeEntry(pred.name, tuple(combo), groups))
    return out


def entry_atom_count(entry: ScopeEntry, class_size) -> int:
    """Number of ground atoms an entry denotes. `class_size(name) -> int`."""
    by_class = {}
    for c, g in zip(entry.classes, entry.groups):
        by_class.setdefault(c, set()).add(g)
    total = 1
    for c, groups in by_class.items():
        total *= falling_factorial(class_size(c), len(groups))
    return total


# ---------------------------------------------------------------------------
# divisor notes (symmetry corrections pending a future case analysis)


@dataclass(frozen=True)
class DivisorNote:
    """Marks that a case analysis on matching atoms must divide branch i
    by i+1: the witness multiplier counted each model once per eligible
    witness object, and branch i has i+1 of them."""

    pred: str
    domain: str  # the reduced domain the tracked logvar ranges over
    position: int  # argument position holding the tracked logvar
    fixed_args: tuple  # constants at the remaining positions, in order


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class Weights:
    """Per-predicate (positive, negative) weight pairs; default (1, 1)."""

    items: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(sorted(self.items)))

    def get(self, pred: str):
        for name, pos, neg in self.items:
            if name == pred:
                return (pos, neg)
        return (Fraction(1), Fraction(1))

    def with_entry(self, pred: str, pos, neg) -> "Weights":
        rest = tuple(it for it in self.items if it[0] != pred)
        return Weights(rest + ((pred, Fraction(pos), Fraction(neg)),))

    def restricted(self, preds) -> "Weights":
        return Weights(tuple(it for it in self.items if it[0] in preds))

    def declared(self, pred: str) -> bool:
        return any(name == pred for name, _, _ in self.items)


# ---------------------------------------------------------------------------
# theory


@dataclass(frozen=True)
class Theory:
    populations: tuple = ()
    predicates: tuple = ()
    clauses: tuple = ()
    constants: tuple = ()
    weights: Weights = Weights()
    scope: tuple = ()  # tuple[ScopeEntry, ...]
    divisor_notes: tuple = ()

    # -- lookups ------------------------------------------------------------

    def population(self, name: str) -> Population:
        for p in self.populations:
            if p.name == name:
                return p
        raise LogicError(f"unknown population {name!r}")

    def has_population(self, name: str) -> bool:
        return any(p.name == name for p in self.populations)

    def predicate(self, name: str) -> Predicate:
        for p in self.predicates:
            if p.name == name:
                return p
        raise LogicError(f"unknown predicate {name!r}")

    def constant(self, name: str) -> Const:
        for c in self.constants:
            if c.name == name:
                return c
        raise LogicError(f"unknown constant {name!r}")

    def member_of(self, const_name: str) -> Optional[str]:
        """Name of the population this constant is a member of, if any."""
        for p in self.populations:
            if const_name in p.members:
                return p.name
        return None

    @property
    def has_empty_clause(self) -> bool:
        return any(c.is_empty for c in self.clauses)

    def class_size(self, name: str) -> Optional[int]:
        for p in self.populations:
            if p.name == name:
                return p.size
        for c in self.constants:
            if c.name == name:
                return 1
        raise LogicError(f"unknown object class {name!r}")

    def class_root(self, name: str) -> str:
        for p in self.populations:
            if p.name == name:
                return p.root
        for c in self.constants:
            if c.name == name:
                return c.root
        raise LogicError(f"unknown object class {name!r}")

    def sized(self) -> bool:
        return all(p.size is not None for p in self.populations)

    # -- derived views -------------------------------------------------------

    def ground_atom_count(self) -> int:
        if not self.sized():
            raise LogicError("ground atom count undefined for unsized theory")
        return sum(entry_atom_count(e, self.class_size) for e in self.scope)

    def scope_for(self, pred: str) -> list:
        return [e for e in self.scope if e.pred == pred]

    def replace(self, **kw) -> "Theory":
        data = {
            "populations": self.populations,
            "predicates": self.predicates,
            "clauses": self.clauses,
            "constants": self.constants,
            "weights": self.weights,
            "scope": self.scope,
            "divisor_notes": self.divisor_notes,
        }
        data.update(kw)
        return Theory(**data)

    def with_sizes(self, sizes: dict) -> "Theory":
        """Bind or override population sizes; unknown names are an error."""
        known = {p.name for p in self.populations}
        for name in sizes:
            if name not in known:
                raise LogicError(f"unknown population {name!r} in size binding")
        pops = tuple(
            Population(p.name, sizes.get(p.name, p.size), p.root, p.members)
            for p in self.populations
        )
        return self.replace(populations=pops)

    def __repr__(self):
        pops = ", ".join(
            f"{p.name}({p.size if p.size is not None else '?'})"
            for p in self.populations
        )
        lines = [f"Theory[{pops}]"]
        lines += [f"  {c!r}" for c in self.clauses]
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# construction and validation


def make_theory(
    populations: Iterable = (),
    predicates: Iterable = (),
    clauses: Iterable = (),
    constants: Iterable = (),
    weights: Weights = None,
    scope=None,
    divisor_notes: Iterable = (),
) -> Theory:
    """Validate and assemble a Theory; computes the default atom scope.

    The default scope is the full product of root-compatible object
    classes per predicate argument.  Member constants are covered by
    their population's entries and do not form classes of their own.
    """
    pops = tuple(populations)
    preds = tuple(predicates)
    clauses = tuple(clauses)
    consts = tuple(constants)
    weights = weights if weights is not None else Weights()

    names = [p.name for p in pops]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate population names")
    pred_names = [p.name for p in preds]
    if len(set(pred_names)) != len(pred_names):
        raise ValidationError("duplicate predicate names")
    const_names = [c.name for c in consts]
    if len(set(const_names)) != len(const_names):
        raise ValidationError("duplicate constant names")
    if set(const_names) & set(names):
        raise ValidationError("constant and population share a name")

    pop_by_name = {p.name: p for p in pops}
    const_by_name = {c.name: c for c in consts}
    membership = {}
    for p in pops:
        for m in p.members:
            if m not in const_by_name:
                raise ValidationError(
                    f"population {p.name} lists unknown member {m!r}"
                )
            if const_by_name[m].root != p.root:
                raise ValidationError(
                    f"member {m!r} of {p.name} has mismatched root"
                )
            if m in membership:
                raise ValidationError(f"constant {m!r} is a member of two domains")
            membership[m] = p.name

    pred_by_name = {p.name: p for p in preds}
    for cl in clauses:
        for v in cl.variables():
            if v.pop not in pop_by_name:
                raise ValidationError(f"logvar {v.name} over unknown domain {v.pop}")
        for lit in cl.literals():
            if lit.pred not in pred_by_name:
                raise ValidationError(f"unknown predicate {lit.pred!r}")
            sig = pred_by_name[lit.pred]
            if len(lit.args) != sig.arity:
                raise ValidationError(
                    f"arity mismatch: {lit.pred} expects {sig.arity} args, "
                    f"got {len(lit.args)}"
                )
            for arg, root in zip(lit.args, sig.arg_roots):
                if isinstance(arg, Var):
                    if pop_by_name[arg.pop].root != root:
                        raise ValidationError(
                            f"{lit.pred}: argument {arg.name} ranges over root "
                            f"{pop_by_name[arg.pop].root}, expected {root}"
                        )
                else:
                    if arg.name not in const_by_name:
                        raise ValidationError(f"unknown constant {arg.name!r}")
                    if arg.root != root:
                        raise ValidationError(
                            f"{lit.pred}: constant {arg.name} has root "
                            f"{arg.root}, expected {root}"
                        )

    if scope is None:
        scope = default_scope(pops, preds, consts, membership)
    return Theory(
        populations=pops,
        predicates=preds,
        clauses=clauses,
        constants=consts,
        weights=weights,
        scope=tuple(scope),
        divisor_notes=tuple(divisor_notes),
    )


def default_scope(pops, preds, consts, membership=None) -> tuple:
    if membership is None:
        membership = {}
        for p in pops:
            for m in p.members:
                membership[m] = p.name
    out = []
    for pred in preds:
        position_classes = []
        for root in pred.arg_roots:
            classes = [p.name for p in pops if p.root == root]
            classes += [
                c.name for c in consts if c.root == root and c.name not in membership
            ]
            position_classes.append(classes)
        out.extend(full_scope_entries(pred, position_classes))
    return tuple(out)


def same_domain_distinct_pairs(clause: Clause) -> list:
    """Pairs of clause variables constrained unequal by the convention."""
    vs = clause.variables()
    out = []
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            if vs[i].pop == vs[j].pop:
                out.append((vs[i], vs[j]))
    return out
