"""Front end for theory files, predicate files, states and proof scripts.

The term syntax is functional notation plus a small fixed set of special
forms: braces {t} and [t] wrap states, < oid | atts > builds objects,
juxtaposition builds configuration soups, commas and semicolons build the
declared collection operators, and ==, =/=, and, or are infix.  Comments
start with --- and run to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ParseError, UnsupportedAxioms
from .formulas import And, Eq, Not, Or, TrueF, conj, disj
from .patterns import AndPred, Bottom, ConstrainedPattern, OrPred
from .rewriting import Equation
from .terms import BUILTIN_EQ, BUILTIN_NEQ, OpDecl, Signature, SortGraph, Var
from .theory import RewriteTheory, Rule

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>---[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z](?:[A-Za-z0-9'@#]|-(?![>\s]))*)
  | (?P<punct>=>\*|->|=>|=/=|==|/\\|\\/|[{}\[\]<>|(),;.:=_~])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "sort",
    "subsort",
    "op",
    "var",
    "eq",
    "rl",
    "pred",
    "if",
    "goal",
    "invariant",
    "rules",
    "on",
    "do",
    "end",
    "case",
    "split",
    "subst",
    "axiom",
    "subsume",
    "auto-invariant",
    "qed",
    "step",
}


@dataclass
class Tok:
    kind: str  # int / name / punct
    text: str
    line: int


def tokenize(text):
    toks = []
    line = 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line)
        pos = m.end()
        kind = m.lastgroup
        val = m.group()
        line += val.count("\n")
        if kind in ("ws", "comment"):
            continue
        toks.append(Tok(kind, val, line - val.count("\n")))
    return toks


class TokenStream:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def next(self):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input")
        self.i += 1
        return t

    def accept(self, text):
        t = self.peek()
        if t is not None and t.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text):
        t = self.peek()
        if t is None or t.text != text:
            got = t.text if t else "end of input"
            raise ParseError(f"expected {text!r}, found {got!r}", t.line if t else None)
        self.i += 1
        return t

    def at_end(self):
        return self.i >= len(self.toks)


# ---------------------------------------------------------------------------
# terms
# ---------------------------------------------------------------------------


class TermParser:
    def __init__(self, sig: Signature, variables: dict[str, Var]):
        self.sig = sig
        self.vars = variables

    def parse(self, ts: TokenStream):
        return self._or(ts)

    def _or(self, ts):
        t = self._and(ts)
        while True:
            nxt = ts.peek()
            if nxt is not None and nxt.text == "or":
                ts.next()
                r = self._and(ts)
                t = self.sig.app("_or_", (t, r))
            else:
                return t

    def _and(self, ts):
        t = self._cmp(ts)
        while True:
            nxt = ts.peek()
            if nxt is not None and nxt.text == "and":
                ts.next()
                r = self._cmp(ts)
                t = self.sig.app("_and_", (t, r))
            else:
                return t

    def _cmp(self, ts):
        t = self._juxt(ts)
        nxt = ts.peek()
        if nxt is not None and nxt.text in ("==", "=/="):
            op = ts.next().text
            r = self._juxt(ts)
            return self.sig.app(BUILTIN_EQ if op == "==" else BUILTIN_NEQ, (t, r))
        return t

    def _juxt(self, ts):
        items = [self._primary(ts)]
        while self._starts_primary(ts.peek()):
            items.append(self._primary(ts))
        if len(items) == 1:
            return items[0]
        if not self.sig.has_op("__"):
            raise ParseError("juxtaposition used but no __ operator declared",
                             ts.peek().line if ts.peek() else None)
        return self.sig.app("__", tuple(items))

    def _starts_primary(self, tok):
        if tok is None:
            return False
        if tok.kind in ("int",):
            return True
        if tok.kind == "name" and tok.text not in ("and", "or", "if") and tok.text not in KEYWORDS:
            return True
        return tok.text in ("{", "[", "<", "(")

    def _primary(self, ts):
        tok = ts.next()
        if tok.kind == "int":
            return self._numeral(int(tok.text), tok.line)
        if tok.text == "(":
            items, seps = self._arglist(ts, closing=")")
            ts.expect(")")
            if len(items) == 1:
                return items[0]
            return self._fold(items, seps, prefer="_,_", line=tok.line)
        if tok.text == "{":
            inner = self._or(ts)
            ts.expect("}")
            return self.sig.app("{_}", (inner,))
        if tok.text == "[":
            inner = self._or(ts)
            ts.expect("]")
            return self.sig.app("[_]", (inner,))
        if tok.text == "<":
            oid = self._or(ts)
            ts.expect("|")
            items, seps = self._arglist(ts, closing=">")
            ts.expect(">")
            atts = self._fold(items, seps, prefer="_,_", line=tok.line)
            return self.sig.app("<_|_>", (oid, atts))
        if tok.kind != "name":
            raise ParseError(f"unexpected token {tok.text!r} in term", tok.line)
        name = tok.text
        # inline sorted variable X:Sort
        nxt = ts.peek()
        if (
            nxt is not None
            and nxt.text == ":"
            and ts.peek(1) is not None
            and ts.peek(1).kind == "name"
            and name not in self.vars
            and not self.sig.has_op(name)
        ):
            ts.next()
            sort = ts.next().text
            v = Var(name, sort)
            self.vars[name] = v  # later bare occurrences resolve to it
            return v
        if nxt is not None and nxt.text == "(":
            ts.next()
            items, seps = self._arglist(ts, closing=")")
            ts.expect(")")
            return self._resolve_call(name, items, seps, tok.line)
        if name in self.vars:
            return self.vars[name]
        if self.sig.has_op(name):
            try:
                return self.sig.constant(name)
            except Exception as e:
                raise ParseError(str(e), tok.line)
        raise ParseError(f"unknown identifier {name!r}", tok.line)

    def _numeral(self, n, line):
        if not self.sig.has_op("0"):
            raise ParseError("numerals need the naturals from the prelude", line)
        t = self.sig.constant("0")
        for _ in range(n):
            t = self.sig.app("s", (t,))
        return t

    def _arglist(self, ts, closing):
        items = [self._or(ts)]
        seps = []
        while True:
            nxt = ts.peek()
            if nxt is None:
                raise ParseError(f"missing {closing!r}")
            if nxt.text in (",", ";"):
                seps.append(ts.next().text)
                items.append(self._or(ts))
            else:
                return items, seps

    def _fold(self, items, seps, prefer, line):
        if len(items) == 1:
            return items[0]
        if any(s != seps[0] for s in seps):
            raise ParseError("mixed , and ; separators in one collection", line)
        op = "_,_" if seps[0] == "," else "_;_"
        if not self.sig.has_op(op):
            raise ParseError(f"collection operator {op} not declared", line)
        return self.sig.app(op, tuple(items))

    def _resolve_call(self, name, items, seps, line):
        if not self.sig.has_op(name):
            raise ParseError(f"unknown operator {name!r}", line)
        arities = set()
        for d in self.sig.decls(name):
            for argsorts, _res in d.typings:
                arities.add(len(argsorts))
        if len(items) in arities and all(s == "," for s in seps):
            try:
                return self.sig.app(name, tuple(items))
            except Exception:
                if 1 not in arities:
                    raise
        if 1 in arities and len(items) > 1:
            folded = self._fold(items, seps, prefer="_,_", line=line)
            return self.sig.app(name, (folded,))
        try:
            return self.sig.app(name, tuple(items))
        except Exception as e:
            raise ParseError(f"cannot apply {name}: {e}", line)


# ---------------------------------------------------------------------------
# formulas
# ---------------------------------------------------------------------------


class FormulaParser:
    def __init__(self, term_parser: TermParser):
        self.tp = term_parser

    def parse(self, ts, allow_or=True):
        parts = [self._conj(ts)]
        while allow_or and ts.peek() is not None and ts.peek().text == "\\/":
            ts.next()
            parts.append(self._conj(ts))
        return disj(parts) if len(parts) > 1 else parts[0]

    def _conj(self, ts):
        parts = [self._atom(ts)]
        while ts.peek() is not None and ts.peek().text == "/\\":
            ts.next()
            parts.append(self._atom(ts))
        return conj(parts) if len(parts) > 1 else parts[0]

    def _atom(self, ts):
        if ts.accept("~"):
            return Not(self._atom(ts))
        if ts.peek() is not None and ts.peek().text == "(":
            # look ahead: a parenthesized formula or a parenthesized term?
            save = ts.i
            try:
                ts.expect("(")
                f = self.parse(ts, allow_or=True)
                ts.expect(")")
                if ts.peek() is not None and ts.peek().text in ("=", "=/="):
                    raise ParseError("term context")  # backtrack
                return f
            except ParseError:
                ts.i = save
        t = self.tp.parse(ts)
        nxt = ts.peek()
        if nxt is not None and nxt.text == "=":
            ts.next()
            r = self.tp.parse(ts)
            return Eq(t, r)
        if nxt is not None and nxt.text == "=/=":
            ts.next()
            r = self.tp.parse(ts)
            return Not(Eq(t, r))
        # bare boolean term
        return Eq(t, self.tp.sig.constant("true"))


# ---------------------------------------------------------------------------
# theory files
# ---------------------------------------------------------------------------

PRELUDE = """
sort Bool Nat .

op true : -> Bool [ctor] .
op false : -> Bool [ctor] .
op _and_ : Bool Bool -> Bool .
op _or_ : Bool Bool -> Bool .
op not : Bool -> Bool .

op 0 : -> Nat [ctor] .
op s : Nat -> Nat [ctor] .
op lte : Nat Nat -> Bool .
op lt : Nat Nat -> Bool .

var B : Bool .
var N M : Nat .

eq true and B = B .
eq B and true = B .
eq false and B = false .
eq B and false = false .
eq true or B = true .
eq B or true = true .
eq false or B = B .
eq B or false = B .
eq not(true) = false .
eq not(false) = true .

eq lte(0, N) = true .
eq lte(s(N), 0) = false .
eq lte(s(N), s(M)) = lte(N, M) .
eq lt(N, M) = lte(s(N), M) .
"""


class TheoryBuilder:
    """Accumulates declarations from one or more theory files."""

    def __init__(self, prelude=True, top_sort="State"):
        self.sig = Signature(SortGraph())
        self.vars: dict[str, Var] = {}
        self.equations = []
        self.rules = []
        self.top_sort = top_sort
        if prelude:
            self.load_text(PRELUDE, name="<prelude>")

    def load_text(self, text, name="<string>"):
        """Two passes: declarations first so equations and rules may refer
        to operators declared later in the file."""
        try:
            toks = tokenize(text)
            ts = TokenStream(toks)
            while not ts.at_end():
                if ts.peek().text in ("eq", "rl"):
                    while not ts.accept("."):
                        ts.next()
                else:
                    self._statement(ts)
            ts = TokenStream(toks)
            while not ts.at_end():
                if ts.peek().text in ("eq", "rl"):
                    self._statement(ts)
                else:
                    while not ts.accept("."):
                        ts.next()
        except ParseError as e:
            raise ParseError(f"{name}: {e}") from None
        return self

    def load_file(self, path):
        with open(path, encoding="utf-8") as fh:
            return self.load_text(fh.read(), name=str(path))

    def build(self) -> RewriteTheory:
        self.sig.sort_graph.finalize()
        return RewriteTheory(self.sig, self.equations, self.rules, self.top_sort)

    # -- statements ------------------------------------------------------------

    def _statement(self, ts: TokenStream):
        tok = ts.next()
        if tok.text == "sort":
            while not ts.accept("."):
                self.sig.sort_graph.add_sort(ts.next().text)
        elif tok.text == "subsort":
            lows = []
            while ts.peek().text != "<":
                lows.append(ts.next().text)
            ts.expect("<")
            highs = []
            while not ts.accept("."):
                highs.append(ts.next().text)
            for lo in lows:
                for hi in highs:
                    self.sig.sort_graph.add_subsort(lo, hi)
        elif tok.text == "op":
            self._op_decl(ts)
        elif tok.text == "var":
            names = []
            while ts.peek().text != ":":
                names.append(ts.next().text)
            ts.expect(":")
            sort = ts.next().text
            ts.expect(".")
            for n in names:
                self.vars[n] = Var(n, sort)
        elif tok.text == "eq":
            tp = TermParser(self.sig, self.vars)
            lhs = tp.parse(ts)
            ts.expect("=")
            rhs = tp.parse(ts)
            cond = TrueF()
            if ts.accept("if"):
                cond = FormulaParser(tp).parse(ts, allow_or=False)
            ts.expect(".")
            self.equations.append(Equation(lhs, rhs, cond))
        elif tok.text == "rl":
            label = ts.next().text
            ts.expect(":")
            tp = TermParser(self.sig, self.vars)
            lhs = tp.parse(ts)
            ts.expect("=>")
            rhs = tp.parse(ts)
            cond = TrueF()
            if ts.accept("if"):
                cond = FormulaParser(tp).parse(ts, allow_or=False)
            ts.expect(".")
            self.rules.append(Rule(label, lhs, rhs, cond))
        else:
            raise ParseError(f"unexpected declaration {tok.text!r}", tok.line)

    def _op_decl(self, ts: TokenStream):
        name_parts = []
        while ts.peek().text != ":":
            name_parts.append(ts.next().text)
        name = "".join(name_parts)
        ts.expect(":")
        argsorts = []
        while ts.peek().text != "->":
            argsorts.append(ts.next().text)
        ts.expect("->")
        result = ts.next().text
        attrs = set()
        identity = None
        if ts.accept("["):
            while not ts.accept("]"):
                a = ts.next().text
                if a == "id":
                    ts.expect(":")
                    identity = ts.next().text
                elif a in ("ctor", "assoc", "comm"):
                    attrs.add(a)
                else:
                    raise ParseError(f"unknown operator attribute {a!r}")
        ts.expect(".")
        is_ctor = "ctor" in attrs
        attrs.discard("ctor")
        for s in argsorts + [result]:
            self.sig.sort_graph.add_sort(s)
        existing = [
            d
            for d in self.sig.decls(name)
            if d.attributes == frozenset(attrs)
            and d.identity == identity
            and d.is_constructor == is_ctor
        ]
        typing = ((tuple(argsorts), result),)
        if existing and not attrs and identity is None:
            old = existing[0]
            merged = OpDecl(
                name,
                old.typings + typing,
                old.attributes,
                old.identity,
                old.is_constructor or is_ctor,
            )
            self.sig._decls[name].remove(old)
            self.sig.add_op(merged)
        else:
            decl = OpDecl(name, typing, frozenset(attrs), identity, is_ctor)
            decl.axiom_class  # raises UnsupportedAxioms early
            self.sig.add_op(decl)


# ---------------------------------------------------------------------------
# predicate files
# ---------------------------------------------------------------------------


def parse_pred_text(text, theory, existing=None, name="<preds>"):
    sig = theory.signature
    preds = dict(existing or {})
    variables: dict[str, Var] = {}
    try:
        ts = TokenStream(tokenize(text))
        while not ts.at_end():
            tok = ts.next()
            if tok.text == "var":
                names = []
                while ts.peek().text != ":":
                    names.append(ts.next().text)
                ts.expect(":")
                sort = ts.next().text
                ts.expect(".")
                for n in names:
                    variables[n] = Var(n, sort)
            elif tok.text == "pred":
                pname = ts.next().text
                ts.expect(":")
                _sort = ts.next().text
                ts.expect("=")
                body = _parse_pred_expr(ts, sig, variables, preds)
                ts.expect(".")
                preds[pname] = body
            else:
                raise ParseError(f"unexpected token {tok.text!r} in predicate file", tok.line)
    except ParseError as e:
        raise ParseError(f"{name}: {e}") from None
    return preds


def _parse_pred_expr(ts, sig, variables, preds):
    parts = [_parse_pred_term(ts, sig, variables, preds)]
    while ts.peek() is not None and ts.peek().text == "\\/":
        ts.next()
        parts.append(_parse_pred_term(ts, sig, variables, preds))
    if len(parts) == 1:
        return parts[0]
    return OrPred(tuple(parts))


def _parse_pred_term(ts, sig, variables, preds):
    parts = [_parse_pred_atom(ts, sig, variables, preds)]
    while ts.peek() is not None and ts.peek().text == "/\\":
        ts.next()
        parts.append(_parse_pred_atom(ts, sig, variables, preds))
    if len(parts) == 1:
        return parts[0]
    return AndPred(tuple(parts))


def _parse_pred_atom(ts, sig, variables, preds):
    tok = ts.peek()
    if tok is None:
        raise ParseError("unexpected end of predicate")
    if tok.text == "(":
        ts.next()
        inner = _parse_pred_expr(ts, sig, variables, preds)
        ts.expect(")")
        return inner
    if tok.text == "{":
        tp = TermParser(sig, variables)
        pattern = tp.parse(ts)
        constraint = TrueF()
        if ts.peek() is not None and ts.peek().text == "|":
            ts.next()
            constraint = FormulaParser(tp).parse(ts, allow_or=False)
        return ConstrainedPattern(pattern, constraint)
    if tok.kind == "name":
        ts.next()
        if tok.text == "bottom":
            return Bottom()
        if tok.text not in preds:
            raise ParseError(f"unknown predicate {tok.text!r}", tok.line)
        return preds[tok.text]
    raise ParseError(f"unexpected token {tok.text!r} in predicate", tok.line)


# ---------------------------------------------------------------------------
# state files and bare terms
# ---------------------------------------------------------------------------


def parse_term(text, theory_or_sig, variables=None):
    sig = getattr(theory_or_sig, "signature", theory_or_sig)
    ts = TokenStream(tokenize(text))
    t = TermParser(sig, dict(variables or {})).parse(ts)
    if not ts.at_end() and not (ts.accept(".") and ts.at_end()):
        tok = ts.peek()
        raise ParseError(f"trailing input after term: {tok.text!r}", tok.line)
    return t


def parse_state_file(path, theory):
    variables: dict[str, Var] = {}
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    ts = TokenStream(tokenize(text))
    while ts.peek() is not None and ts.peek().text == "var":
        ts.next()
        names = []
        while ts.peek().text != ":":
            names.append(ts.next().text)
        ts.expect(":")
        sort = ts.next().text
        ts.expect(".")
        for n in names:
            variables[n] = Var(n, sort)
    t = TermParser(theory.signature, variables).parse(ts)
    ts.accept(".")
    if not ts.at_end():
        tok = ts.peek()
        raise ParseError(f"{path}: trailing input {tok.text!r}", tok.line)
    return t


def parse_formula(text, theory, variables=None):
    sig = getattr(theory, "signature", theory)
    ts = TokenStream(tokenize(text))
    tp = TermParser(sig, dict(variables or {}))
    f = FormulaParser(tp).parse(ts)
    if not ts.at_end():
        tok = ts.peek()
        raise ParseError(f"trailing input after formula: {tok.text!r}", tok.line)
    return f


# ---------------------------------------------------------------------------
# proof scripts
# ---------------------------------------------------------------------------


@dataclass
class Command:
    name: str
    args: dict = field(default_factory=dict)


@dataclass
class OnBlock:
    pattern_text: str
    commands: list


@dataclass
class ProofScript:
    invariant: str | None = None
    goal: tuple | None = None  # (name, lhs predicate name/text, rhs)
    rule_filter: list | None = None
    blocks: list = field(default_factory=list)  # OnBlock or Command


def parse_script_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_script_text(fh.read(), name=str(path))


def parse_script_text(text, name="<script>"):
    script = ProofScript()
    try:
        ts = TokenStream(tokenize(text))
        while not ts.at_end():
            tok = ts.next()
            if tok.text == "invariant":
                script.invariant = ts.next().text
                ts.expect(".")
            elif tok.text == "rules":
                labels = []
                while not ts.accept("."):
                    labels.append(ts.next().text)
                script.rule_filter = labels
            elif tok.text == "on":
                pat_toks = []
                depth = 0
                while True:
                    t = ts.next()
                    if t.text == "do" and depth == 0:
                        break
                    if t.text in ("{", "(", "[", "<"):
                        depth += 1
                    if t.text in ("}", ")", "]", ">"):
                        depth -= 1
                    pat_toks.append(t.text)
                cmds = []
                while not ts.accept("end"):
                    cmds.append(_parse_command(ts))
                script.blocks.append(OnBlock(" ".join(pat_toks), cmds))
            elif tok.text in ("case", "split", "subst", "axiom", "subsume", "step"):
                ts.i -= 1
                script.blocks.append(_parse_command(ts))
            elif tok.text in ("auto-invariant", "qed"):
                ts.expect(".")
            else:
                raise ParseError(f"unexpected script token {tok.text!r}", tok.line)
    except ParseError as e:
        raise ParseError(f"{name}: {e}") from None
    return script


def _parse_command(ts):
    tok = ts.next()
    if tok.text == "case":
        var = ts.next().text
        ts.expect(".")
        return Command("case", {"var": var})
    if tok.text == "split":
        toks = []
        while ts.peek().text != ".":
            toks.append(ts.next().text)
        ts.expect(".")
        return Command("split", {"term_text": " ".join(toks)})
    if tok.text == "subst":
        toks = []
        while ts.peek().text != ".":
            toks.append(ts.next().text)
        ts.expect(".")
        return Command("subst", {"eq_text": " ".join(toks)})
    if tok.text in ("axiom", "subsume", "step"):
        ts.expect(".")
        return Command(tok.text)
    raise ParseError(f"unknown proof command {tok.text!r}", tok.line)
