"""Brute-force grounding semantics: the correctness authority.

Deliberately unclever: ground every clause, enumerate every
interpretation, sum exact model weights.  The only concession to speed is
that interpretations are swept with vectorized bit masks; the enumeration
itself is plain binary counting.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct

import numpy as np

from .logic import Clause, ExistBlock, Literal, LogicError, Theory, Var, Weights

DEFAULT_ATOM_CAP = 30

_POPCOUNT = np.array(
    [bin(i).count("1") for i in range(1 << 16)], dtype=np.uint32
)


class OracleError(LogicError):
    pass


class CapExceeded(OracleError):
    pass


@dataclass(frozen=True)
class GroundAtomTable:
    """Deterministically ordered ground atoms plus a reverse index."""

    atoms: tuple  # tuple[(pred, (obj, ...)), ...]
    index: dict

    def __len__(self):
        return len(self.atoms)


class _Universe:
    """Concrete objects for every domain and constant of a sized theory."""

    def __init__(self, theory: Theory):
        self.theory = theory
        self.pop_objects = {}
        self.const_obj = {}
        for p in theory.populations:
            if p.size is None:
                raise OracleError(f"population {p.name} has no size")
            members = sorted(p.members)
            objs = list(members) + [
                f"{p.name}#{i}" for i in range(p.size - len(members))
            ]
            self.pop_objects[p.name] = objs
            for m in members:
                self.const_obj[m] = m
        for c in theory.constants:
            if c.name not in self.const_obj:
                self.const_obj[c.name] = c.name

    def class_objects(self, name):
        if name in self.pop_objects:
            return self.pop_objects[name]
        return [self.const_obj[name]]


def build_atom_table(theory: Theory) -> GroundAtomTable:
    uni = _Universe(theory)
    atoms = []
    seen = set()
    for entry in theory.scope:
        group_classes = {}
        for cname, g in zip(entry.classes, entry.groups):
            group_classes.setdefault(g, cname)
        gids = sorted(group_classes)
        for combo in _distinct_assignments(
            [group_classes[g] for g in gids], uni
        ):
            chosen = dict(zip(gids, combo))
            objs = tuple(chosen[g] for g in entry.groups)
            atom = (entry.pred, objs)
            if atom in seen:
                raise OracleError(f"overlapping scope entries at {atom}")
            seen.add(atom)
            atoms.append(atom)
    return GroundAtomTable(tuple(atoms), {a: i for i, a in enumerate(atoms)})


def _distinct_assignments(class_list, uni):
    """Assign one object per slot; same-class slots get distinct objects."""

    def rec(i, taken, acc):
        if i == len(class_list):
            yield tuple(acc)
            return
        for obj in uni.class_objects(class_list[i]):
            if (class_list[i], obj) in taken:
                continue
            taken.add((class_list[i], obj))
            acc.append(obj)
            yield from rec(i + 1, taken, acc)
            acc.pop()
            taken.discard((class_list[i], obj))

    yield from rec(0, set(), [])


def _clause_assignments(clause: Clause, vs, uni: _Universe, theory: Theory, fixed):
    """All admissible assignments for `vs` given already-fixed objects.

    Honors the distinctness convention: same-domain variables differ, and
    a variable avoids member constants of its domain that appear in the
    same clause.
    """
    clause_consts = clause.constants_used()
    excluded = {}
    for v in vs:
        ex = set()
        for c in clause_consts:
            if theory.member_of(c.name) == v.pop:
                ex.add(uni.const_obj[c.name])
        excluded[v.name] = ex

    def rec(i, acc):
        if i == len(vs):
            yield dict(acc)
            return
        v = vs[i]
        used = {obj for (name, pop), obj in acc.items() if pop == v.pop}
        used |= {
            obj
            for (name, pop), obj in fixed.items()
            if pop == v.pop
        }
        for obj in uni.pop_objects[v.pop]:
            if obj in used or obj in excluded[v.name]:
                continue
            acc[(v.name, v.pop)] = obj
            yield from rec(i + 1, acc)
            del acc[(v.name, v.pop)]

    yield from rec(0, dict(fixed))


def _instantiate_literal(lit: Literal, assignment, uni):
    objs = []
    for a in lit.args:
        if isinstance(a, Var):
            objs.append(assignment[(a.name, a.pop)])
        else:
            objs.append(uni.const_obj[a.name])
    return (lit.sign, lit.pred, tuple(objs))


def ground(theory: Theory, sizes: dict = None, max_atoms: int = DEFAULT_ATOM_CAP):
    """Ground every clause over the concrete universe.

    Returns a deduplicated list of ground clauses, each a frozenset of
    (sign, pred, objects) triples.  Existential prefixes and blocks
    expand into finite disjunctions; instantiations that violate the
    distinctness convention are skipped; tautological ground clauses are
    dropped.
    """
    if sizes:
        theory = theory.with_sizes(sizes)
    if not theory.sized():
        unsized = [p.name for p in theory.populations if p.size is None]
        raise OracleError(f"unsized populations: {', '.join(unsized)}")
    n_atoms = theory.ground_atom_count()
    if n_atoms > max_atoms:
        raise CapExceeded(
            f"{n_atoms} ground atoms exceed the cap of {max_atoms}"
        )
    uni = _Universe(theory)
    out = []
    seen = set()
    for clause in theory.clauses:
        for gc in _ground_clause(clause, uni, theory):
            if gc is None:
                continue
            if gc not in seen:
                seen.add(gc)
                out.append(gc)
    return out


def _ground_clause(clause: Clause, uni, theory):
    """Yield frozensets of ground literals; None marks a tautology."""
    for uassign in _clause_assignments(clause, clause.universals, uni, theory, {}):
        lits = set()
        tautology = False
        # Existential prefix becomes one big disjunction over its
        # admissible assignments.
        for eassign in _clause_assignments(
            clause, clause.existentials, uni, theory, uassign
        ):
            for d in clause.disjuncts:
                if isinstance(d, ExistBlock):
                    for bassign in _clause_assignments(
                        clause, (d.var,), uni, theory, eassign
                    ):
                        for lit in d.body:
                            lits.add(_instantiate_literal(lit, bassign, uni))
                else:
                    lits.add(_instantiate_literal(d, eassign, uni))
        for sign, pred, objs in lits:
            if (not sign, pred, objs) in lits:
                tautology = True
                break
        if tautology:
            continue
        yield frozenset(lits)


def brute_force_wmc(
    theory: Theory,
    sizes: dict = None,
    weights=None,
    max_atoms: int = DEFAULT_ATOM_CAP,
) -> Fraction:
    """Exact WMC by full enumeration of interpretations."""
    if sizes:
        theory = theory.with_sizes(sizes)
    if weights is not None:
        theory = theory.replace(weights=weights)
    ground_clauses = ground(theory, max_atoms=max_atoms)
    table = build_atom_table(theory)
    n = len(table)

    if any(len(gc) == 0 for gc in ground_clauses):
        return Fraction(0)

    pred_bits = {}
    for i, (pred, _) in enumerate(table.atoms):
        pred_bits.setdefault(pred, []).append(i)
    preds = sorted(pred_bits)
    pred_masks = {
        p: sum(1 << i for i in pred_bits[p]) for p in preds
    }

    clause_masks = []
    for gc in ground_clauses:
        pos = neg = 0
        for sign, pred, objs in gc:
            bit = 1 << table.index[(pred, objs)]
            if sign:
                pos |= bit
            else:
                neg |= bit
        clause_masks.append((pos, neg))

    radix = []
    r = 1
    for p in preds:
        radix.append(r)
        r *= len(pred_bits[p]) + 1

    bucket_counts = {}
    full = (1 << n) - 1
    chunk_bits = min(n, 20)
    total = 1 << n
    dtype = np.uint64
    for base in range(0, total, 1 << chunk_bits):
        hi = min(total, base + (1 << chunk_bits))
        interps = np.arange(base, hi, dtype=dtype)
        sat = np.ones(interps.shape, dtype=bool)
        for pos, neg in clause_masks:
            ok = np.zeros(interps.shape, dtype=bool)
            if pos:
                ok |= (interps & dtype(pos)) != 0
            if neg:
                unset = (~interps) & dtype(full)
                ok |= (unset & dtype(neg)) != 0
            sat &= ok
        models = interps[sat]
        if models.size == 0:
            continue
        keys = np.zeros(models.shape, dtype=np.int64)
        for p, rad in zip(preds, radix):
            masked = models & dtype(pred_masks[p])
            counts = _popcount(masked)
            keys += counts.astype(np.int64) * rad
        uniq, cnts = np.unique(keys, return_counts=True)
        for k, c in zip(uniq.tolist(), cnts.tolist()):
            bucket_counts[k] = bucket_counts.get(k, 0) + c

    total_wmc = Fraction(0)
    for key, count in bucket_counts.items():
        w = Fraction(1)
        k = key
        # Decode the mixed-radix key back into per-predicate true counts.
        for idx in range(len(preds) - 1, -1, -1):
            t = k // radix[idx]
            k -= t * radix[idx]
            pos_w, neg_w = theory.weights.get(preds[idx])
            n_p = len(pred_bits[preds[idx]])
            w *= pos_w**t * neg_w ** (n_p - t)
        total_wmc += w * count
    return total_wmc


def _popcount(arr):
    lo = (arr & np.uint64(0xFFFF)).astype(np.int64)
    mid = ((arr >> np.uint64(16)) & np.uint64(0xFFFF)).astype(np.int64)
    hi = ((arr >> np.uint64(32)) & np.uint64(0xFFFF)).astype(np.int64)
    return _POPCOUNT[lo] + _POPCOUNT[mid] + _POPCOUNT[hi]


def count_models(
    theory: Theory, sizes: dict = None, max_atoms: int = DEFAULT_ATOM_CAP
) -> int:
    """Model count: WMC with every weight equal to 1."""
    value = brute_force_wmc(
        theory, sizes=sizes, weights=Weights(), max_atoms=max_atoms
    )
    assert value.denominator == 1
    return value.numerator
