"""Concrete text syntax: parser and printer for theory files.

    population p 5           # declares a domain, size optional
    predicate S(c, p)
    weight S 3/10 0.4        # positive then negative weight, exact
    forall c:c exists p:p . S(c,p)
    forall p:p, c1,c2:c . !S(c1,p) | !S(c2,p)
    . P(A) | Q(B)            # empty prefix; unbound names are constants

'#' starts a comment.  Undeclared predicates are inferred from their first
use when every argument is a bound logvar.  A parenthesized
"(exists v:pop . L1 | L2)" disjunct denotes a nested existential block.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .logic import (
    Clause,
    Const,
    ExistBlock,
    Literal,
    LogicError,
    Population,
    Predicate,
    Theory,
    Var,
    Weights,
    make_theory,
)
from .numbers import format_rational, parse_rational


class ParseError(LogicError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<number>[+-]?\d+(\.\d+)?(/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[.,:()|!])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"population", "predicate", "weight", "forall", "exists"}


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.kind}:{self.text!r}@{self.line}:{self.col}"


def _tokenize(text: str):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            col = 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append(_Token(kind, value, line, col))
            col += len(value)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.populations = []
        self.pop_index = {}
        self.predicates = []
        self.pred_index = {}
        self.weights = []
        self.clauses = []
        self.constants = []
        self.const_index = {}
        self.members = {}  # population name -> set of constant names

    # -- token helpers -------------------------------------------------------

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind, text=None):
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            raise ParseError(f"expected {want!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    # -- grammar -------------------------------------------------------------

    def parse(self) -> Theory:
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind == "ident" and tok.text == "population":
                self.pop_decl()
            elif tok.kind == "ident" and tok.text == "predicate":
                self.pred_decl()
            elif tok.kind == "ident" and tok.text == "weight":
                self.weight_decl()
            elif (tok.kind == "ident" and tok.text in ("forall", "exists")) or (
                tok.kind == "punct" and tok.text == "."
            ):
                self.clause()
            else:
                self.error(f"expected a declaration or clause, found {tok.text!r}")
        pops = [
            Population(p.name, p.size, p.root, frozenset(self.members.get(p.name, ())))
            for p in self.populations
        ]
        try:
            return make_theory(
                populations=pops,
                predicates=self.predicates,
                clauses=self.clauses,
                constants=self.constants,
                weights=Weights(tuple(self.weights)),
            )
        except LogicError as exc:
            raise ParseError(str(exc), self.peek().line, 1) from exc

    def pop_decl(self):
        self.expect("ident", "population")
        name = self.expect("ident")
        if name.text in _KEYWORDS:
            self.error("keyword cannot name a population", name)
        if name.text in self.pop_index:
            self.error(f"population {name.text!r} declared twice", name)
        size = None
        if self.peek().kind == "number":
            tok = self.next()
            if not re.fullmatch(r"\d+", tok.text):
                self.error("population size must be a nonnegative integer", tok)
            size = int(tok.text)
        pop = Population(name.text, size)
        self.pop_index[name.text] = len(self.populations)
        self.populations.append(pop)

    def pred_decl(self):
        self.expect("ident", "predicate")
        name = self.expect("ident")
        if name.text in self.pred_index:
            self.error(f"predicate {name.text!r} declared twice", name)
        self.expect("punct", "(")
        roots = [self._pop_name()]
        while self.peek().text == ",":
            self.next()
            roots.append(self._pop_name())
        self.expect("punct", ")")
        self._add_predicate(name.text, tuple(roots))

    def _pop_name(self):
        tok = self.expect("ident")
        if tok.text not in self.pop_index:
            self.error(f"unknown population {tok.text!r}", tok)
        return tok.text

    def _add_predicate(self, name, roots):
        self.pred_index[name] = len(self.predicates)
        self.predicates.append(Predicate(name, roots))

    def weight_decl(self):
        self.expect("ident", "weight")
        name = self.expect("ident")
        pos = self._rational()
        neg = self._rational()
        self.weights.append((name.text, pos, neg))

    def _rational(self) -> Fraction:
        tok = self.expect("number")
        try:
            return parse_rational(tok.text)
        except ValueError as exc:
            self.error(str(exc), tok)

    def clause(self):
        universals = []
        existentials = []
        bound = {}
        while self.peek().text in ("forall", "exists"):
            kw = self.next().text
            names = [self.expect("ident")]
            while self.peek().text == ",":
                self.next()
                names.append(self.expect("ident"))
            self.expect("punct", ":")
            pop = self._pop_name()
            for n in names:
                if n.text in bound:
                    self.error(f"logvar {n.text!r} bound twice", n)
                v = Var(n.text, pop)
                bound[n.text] = v
                (universals if kw == "forall" else existentials).append(v)
        self.expect("punct", ".")
        disjuncts = [self._disjunct(bound)]
        while self.peek().text == "|":
            self.next()
            disjuncts.append(self._disjunct(bound))
        self.clauses.append(
            Clause(tuple(universals), tuple(existentials), tuple(disjuncts))
        )

    def _disjunct(self, bound):
        if self.peek().text == "(":
            return self._exist_block(bound)
        return self._literal(bound)

    def _exist_block(self, bound):
        self.expect("punct", "(")
        self.expect("ident", "exists")
        name = self.expect("ident")
        if name.text in bound:
            self.error(f"block variable {name.text!r} shadows the prefix", name)
        self.expect("punct", ":")
        pop = self._pop_name()
        var = Var(name.text, pop)
        inner = dict(bound)
        inner[name.text] = var
        self.expect("punct", ".")
        body = [self._literal(inner)]
        while self.peek().text == "|":
            self.next()
            body.append(self._literal(inner))
        self.expect("punct", ")")
        return ExistBlock(var, tuple(body))

    def _literal(self, bound):
        sign = True
        if self.peek().text == "!":
            self.next()
            sign = False
        name = self.expect("ident")
        self.expect("punct", "(")
        arg_tokens = []
        if self.peek().text != ")":
            arg_tokens.append(self.expect("ident"))
            while self.peek().text == ",":
                self.next()
                arg_tokens.append(self.expect("ident"))
        self.expect("punct", ")")

        if name.text not in self.pred_index:
            self._infer_predicate(name, arg_tokens, bound)
        sig = self.predicates[self.pred_index[name.text]]
        if len(arg_tokens) != sig.arity:
            self.error(
                f"arity mismatch: {name.text} expects {sig.arity} arguments, "
                f"got {len(arg_tokens)}",
                name,
            )
        args = []
        for tok, root in zip(arg_tokens, sig.arg_roots):
            if tok.text in bound:
                v = bound[tok.text]
                if self.populations[self.pop_index[v.pop]].root != root:
                    self.error(
                        f"logvar {tok.text!r} has population {v.pop!r}, "
                        f"expected {root!r}",
                        tok,
                    )
                args.append(v)
            else:
                args.append(self._constant(tok, root))
        return Literal(sign, name.text, tuple(args))

    def _infer_predicate(self, name, arg_tokens, bound):
        roots = []
        for tok in arg_tokens:
            if tok.text not in bound:
                self.error(
                    f"unknown predicate {name.text!r}; declare it to use "
                    f"constant arguments",
                    name,
                )
            roots.append(bound[tok.text].pop)
        self._add_predicate(name.text, tuple(roots))

    def _constant(self, tok, root):
        if tok.text in self.const_index:
            c = self.constants[self.const_index[tok.text]]
            if c.root != root:
                self.error(
                    f"constant {tok.text!r} already used with population "
                    f"{c.root!r}",
                    tok,
                )
            return c
        if tok.text in self.pop_index:
            self.error(f"population name {tok.text!r} used as a term", tok)
        c = Const(tok.text, root)
        self.const_index[tok.text] = len(self.constants)
        self.constants.append(c)
        self.members.setdefault(root, set()).add(tok.text)
        return c


def parse_theory(text: str) -> Theory:
    """Parse a theory file; raises ParseError with line and column."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing


def _term_str(t):
    return t.name


def _literal_str(lit: Literal) -> str:
    body = f"{lit.pred}({','.join(_term_str(a) for a in lit.args)})"
    return body if lit.sign else "!" + body


def _disjunct_str(d) -> str:
    if isinstance(d, ExistBlock):
        inner = " | ".join(_literal_str(l) for l in d.body)
        return f"(exists {d.var.name}:{d.var.pop} . {inner})"
    return _literal_str(d)


def _prefix_str(clause: Clause) -> str:
    parts = []
    for kw, vs in (("forall", clause.universals), ("exists", clause.existentials)):
        i = 0
        while i < len(vs):
            j = i
            while j < len(vs) and vs[j].pop == vs[i].pop:
                j += 1
            names = ",".join(v.name for v in vs[i:j])
            parts.append(f"{kw} {names}:{vs[i].pop}")
            i = j
    return " ".join(parts)


def clause_str(clause: Clause) -> str:
    prefix = _prefix_str(clause)
    body = " | ".join(_disjunct_str(d) for d in clause.disjuncts)
    return (prefix + " . " + body).strip() if body else (prefix + " .").strip()


def print_theory(theory: Theory) -> str:
    """Render a theory in the file grammar; inverse of parse_theory."""
    lines = []
    for p in theory.populations:
        lines.append(
            f"population {p.name}" + (f" {p.size}" if p.size is not None else "")
        )
    for pred in theory.predicates:
        lines.append(f"predicate {pred.name}({','.join(pred.arg_roots)})")
    for name, pos, neg in theory.weights.items:
        lines.append(
            f"weight {name} {format_rational(pos)} {format_rational(neg)}"
        )
    for clause in theory.clauses:
        lines.append(clause_str(clause))
    return "\n".join(lines) + "\n"
