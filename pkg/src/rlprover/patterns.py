"""Constrained constructor pattern predicates.

A constrained pattern (u | phi) denotes the canonical ground instances of u
whose constraint holds in the initial model.  Predicates are built from
bottom, patterns, unions and intersections; normalization removes every
intersection by disjoint unification of the pattern terms.

The subsumption check (is every instance of A an instance of B?) reduces to
matching plus a constraint implication, which is discharged by a layered
best-effort procedure.  Only a definite Yes is ever acted on downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iproduct

from .errors import BudgetExceeded, TruncatedUnification
from .formulas import (
    And,
    Eq,
    FalseF,
    Not,
    Or,
    TrueF,
    apply_subst_formula,
    conj,
    conjuncts,
    formula_vars,
)
from .printing import formula_to_str
from .rewriting import Normalizer, decidably_different
from .terms import App, FreshGen, Subst, Var, rename_apart, term_key, vars_of
from .unification import match_iter, match_modulo_B, unify_modulo_B


@dataclass(frozen=True)
class ConstrainedPattern:
    pattern: object
    constraint: object = TrueF()

    def vars(self):
        return vars_of(self.pattern) | formula_vars(self.constraint)

    def __str__(self):
        from .printing import term_to_str

        c = formula_to_str(self.constraint)
        return f"{term_to_str(self.pattern)} | {c}"


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class OrPred:
    parts: tuple


@dataclass(frozen=True)
class AndPred:
    parts: tuple


BOTTOM = Bottom()
PatternPredicate = object


def pred_vars(p):
    if isinstance(p, Bottom):
        return frozenset()
    if isinstance(p, ConstrainedPattern):
        return p.vars()
    out = frozenset()
    for q in p.parts:
        out |= pred_vars(q)
    return out


def disjuncts_of(p):
    """The disjuncts of a normal predicate (no And nodes)."""
    if isinstance(p, Bottom):
        return []
    if isinstance(p, ConstrainedPattern):
        return [p]
    if isinstance(p, OrPred):
        out = []
        for q in p.parts:
            out.extend(disjuncts_of(q))
        return out
    raise ValueError("predicate is not in normal form (contains an intersection)")


def is_normal(p) -> bool:
    if isinstance(p, (Bottom, ConstrainedPattern)):
        return True
    if isinstance(p, OrPred):
        return all(is_normal(q) for q in p.parts)
    return False


# ---------------------------------------------------------------------------
# ground membership
# ---------------------------------------------------------------------------


def ground_membership(theory, state, pred, normalizer=None) -> bool:
    """Is a canonical ground state an instance of the predicate?"""
    nz = normalizer or Normalizer(theory)
    if isinstance(pred, Bottom):
        return False
    if isinstance(pred, OrPred):
        return any(ground_membership(theory, state, q, nz) for q in pred.parts)
    if isinstance(pred, AndPred):
        return all(ground_membership(theory, state, q, nz) for q in pred.parts)
    for sigma in match_iter(theory.signature, pred.pattern, state):
        v = nz._eval_formula(pred.constraint, sigma)
        if v is True:
            return True
    return False


# ---------------------------------------------------------------------------
# normalization by disjoint unification
# ---------------------------------------------------------------------------


def constraint_unsat(theory, phi, normalizer=None) -> bool:
    """Cheap, sound unsatisfiability filter on a constraint."""
    nz = normalizer or Normalizer(theory)
    sig = theory.signature
    eqs = set()
    neqs = set()
    for atom in conjuncts(phi):
        if isinstance(atom, FalseF):
            return True
        if isinstance(atom, Eq):
            l = nz.normalize(atom.lhs)
            r = nz.normalize(atom.rhs)
            if decidably_different(sig, l, r):
                return True
            if (l == sig.constant("true") and r == sig.constant("false")) or (
                l == sig.constant("false") and r == sig.constant("true")
            ):
                return True
            eqs.add(frozenset((l, r)) if l != r else None)
            eqs.discard(None)
        elif isinstance(atom, Not) and isinstance(atom.arg, Eq):
            l = nz.normalize(atom.arg.lhs)
            r = nz.normalize(atom.arg.rhs)
            if l == r:
                return True
            neqs.add(frozenset((l, r)))
    return bool(eqs & neqs)


def normalize_predicate(theory, pred, budget=None, drop_unsat=True):
    """Normal form: a union of constrained patterns, intersections resolved
    by disjoint unification of the pattern terms."""
    sig = theory.signature
    nz = Normalizer(theory)

    def norm(p):
        if isinstance(p, Bottom):
            return []
        if isinstance(p, ConstrainedPattern):
            return [p]
        if isinstance(p, OrPred):
            out = []
            for q in p.parts:
                out.extend(norm(q))
            return out
        if isinstance(p, AndPred):
            lists = [norm(q) for q in p.parts]
            acc = [ConstrainedPattern(None, TrueF())]
            for cps in lists:
                nxt = []
                for a in acc:
                    for b in cps:
                        if a.pattern is None:
                            nxt.append(b)
                            continue
                        nxt.extend(meet(a, b))
                acc = nxt
            return [a for a in acc if a.pattern is not None]
        raise TypeError(f"not a predicate: {p!r}")

    def meet(a, b):
        # unify with disjoint variables
        avoid = a.vars()
        fresh = FreshGen(avoid)
        bpat, ren = rename_apart(sig, b.pattern, avoid, fresh)
        bcon = apply_subst_formula(sig, ren, b.constraint)
        sols = unify_modulo_B(sig, [(a.pattern, bpat)], budget=budget)
        if not sols.complete:
            raise TruncatedUnification(
                "predicate normalization hit the unification budget; "
                "the result would be unsound for subsumption"
            )
        out = []
        for alpha in sols:
            pat = alpha.apply(sig, a.pattern)
            con = conj(
                [
                    apply_subst_formula(sig, alpha, a.constraint),
                    apply_subst_formula(sig, alpha, bcon),
                ]
            )
            cp = ConstrainedPattern(pat, con)
            if drop_unsat and constraint_unsat(theory, con, nz):
                continue
            out.append(cp)
        return out

    cps = norm(pred)
    if drop_unsat:
        cps = [cp for cp in cps if not constraint_unsat(theory, cp.constraint, nz)]
    # drop disjuncts already covered by another one (keeps the general form)
    if len(cps) > 1:
        alive = list(cps)
        kept = []
        while alive:
            a = alive.pop(0)
            others = kept + alive
            if any(subsumes(theory, a, b, find_counterexample=False) for b in others):
                continue
            kept.append(a)
        cps = kept
    if not cps:
        return BOTTOM
    if len(cps) == 1:
        return cps[0]
    return OrPred(tuple(cps))


# ---------------------------------------------------------------------------
# implication validity (layered heuristics)
# ---------------------------------------------------------------------------

VALID = "valid"
UNKNOWN = "unknown"


@dataclass
class ImplicationResult:
    status: str
    layer: str | None = None
    residual: list = field(default_factory=list)

    def __bool__(self):
        return self.status == VALID


def _atom_key(sig, atom):
    if isinstance(atom, Eq):
        pair = sorted((atom.lhs, atom.rhs), key=term_key)
        return ("eq", tuple(pair))
    if isinstance(atom, Not) and isinstance(atom.arg, Eq):
        pair = sorted((atom.arg.lhs, atom.arg.rhs), key=term_key)
        return ("neq", tuple(pair))
    return ("other", atom)


def _saturate(theory, atoms, nz):
    """Close hypothesis atoms under normalization and boolean decomposition.

    Returns (facts, contradiction) where facts is a dict atom-key -> atom.
    """
    sig = theory.signature
    tt = sig.constant("true")
    ff = sig.constant("false")
    facts = {}
    pending = list(atoms)
    contradiction = False
    budget = 2000
    while pending and budget > 0:
        budget -= 1
        atom = pending.pop()
        if isinstance(atom, TrueF):
            continue
        if isinstance(atom, FalseF):
            contradiction = True
            continue
        if isinstance(atom, Not) and isinstance(atom.arg, Eq):
            l = nz.normalize(atom.arg.lhs)
            r = nz.normalize(atom.arg.rhs)
            if l == r:
                contradiction = True
                continue
            a2 = Not(Eq(l, r))
            key = _atom_key(sig, a2)
            if key not in facts:
                facts[key] = a2
            continue
        if isinstance(atom, (And,)):
            pending.extend(atom.parts)
            continue
        if not isinstance(atom, Eq):
            key = _atom_key(sig, atom)
            facts.setdefault(key, atom)
            continue
        l = nz.normalize(atom.lhs)
        r = nz.normalize(atom.rhs)
        if l == r:
            continue
        if decidably_different(sig, l, r):
            contradiction = True
            continue
        # orient boolean facts into term decompositions
        if r in (tt, ff) and isinstance(l, App):
            val = r == tt
            op = l.op
            if op == "_and_" and val:
                pending.extend(Eq(a, tt) for a in l.args)
                continue
            if op == "_or_" and not val:
                pending.extend(Eq(a, ff) for a in l.args)
                continue
            if op == "not" and len(l.args) == 1:
                pending.append(Eq(l.args[0], ff if val else tt))
                continue
            if op == "_==_":
                pending.append(Eq(*l.args) if val else Not(Eq(*l.args)))
                continue
            if op == "_=/=_":
                pending.append(Not(Eq(*l.args)) if val else Eq(*l.args))
                continue
        elif l in (tt, ff) and isinstance(r, App):
            pending.append(Eq(r, l))
            continue
        a2 = Eq(l, r)
        key = _atom_key(sig, a2)
        if key not in facts:
            facts[key] = a2
    # derived equalities may contradict recorded disequalities
    eqs = {k[1] for k in facts if k[0] == "eq"}
    neqs = {k[1] for k in facts if k[0] == "neq"}
    if eqs & neqs:
        contradiction = True
    return facts, contradiction


def _oriented_substitution(sig, facts):
    """Variable-to-term bindings extracted from hypothesis equalities."""
    mapping = {}
    for key, atom in facts.items():
        if key[0] != "eq":
            continue
        l, r = atom.lhs, atom.rhs
        for a, b in ((l, r), (r, l)):
            if isinstance(a, Var) and a not in mapping and a not in vars_of(b):
                mapping[a] = b
                break
    # avoid chains x -> y, y -> t by iterating a bounded fixpoint
    s = Subst(mapping)
    for _ in range(5):
        new = {x: s.apply(sig, t) for x, t in s.mapping.items()}
        s2 = Subst(new)
        if s2 == s:
            break
        s = s2
    return s


class _Congruence:
    """Ground congruence closure over a finite subterm universe."""

    def __init__(self, sig):
        self.sig = sig
        self.parent = {}
        self.terms = set()

    def add(self, t):
        if t in self.terms:
            return
        self.terms.add(t)
        self.parent[t] = t
        if isinstance(t, App):
            for a in t.args:
                self.add(a)

    def find(self, t):
        while self.parent[t] != t:
            self.parent[t] = self.parent[self.parent[t]]
            t = self.parent[t]
        return t

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def close(self):
        # naive congruence: merge applications with congruent arguments
        changed = True
        while changed:
            changed = False
            apps = [t for t in self.terms if isinstance(t, App)]
            by_shape = {}
            for t in apps:
                shape = (t.op, tuple(self.find(a) for a in t.args))
                other = by_shape.get(shape)
                if other is None:
                    by_shape[shape] = t
                elif self.find(other) != self.find(t):
                    self.union(other, t)
                    changed = True

    def equal(self, a, b):
        if a not in self.terms or b not in self.terms:
            return False
        return self.find(a) == self.find(b)


def implication_valid(theory, hypothesis, conclusion, log=None) -> ImplicationResult:
    """Layered validity check for hypothesis => conclusion in the initial model.

    L1: the conclusion atom normalizes away.
    L2: the atom matches a hypothesis fact modulo axioms.
    L3: hypothesis equalities applied as a substitution, then L1/L2 again.
    L4: congruence closure over the hypothesis equalities, then recheck.
    """
    sig = theory.signature
    nz = Normalizer(theory, budget=1_000_000)
    facts, contradiction = _saturate(theory, conjuncts(hypothesis), nz)
    if contradiction:
        if log is not None:
            log.append({"layer": "L0-unsat-hypothesis"})
        return ImplicationResult(VALID, "L0-unsat-hypothesis")

    goals = conjuncts(conclusion)
    subst = None
    cong = None
    residual = []
    layers_used = []

    def try_atom(atom, facts_, sub):
        nonlocal cong
        if isinstance(atom, TrueF):
            return "L1"
        if isinstance(atom, FalseF):
            return None
        if sub is not None:
            atom = apply_subst_formula(sig, sub, atom)
        if isinstance(atom, Or):
            for part in atom.parts:
                if try_atom(part, facts_, None):
                    return "L2"
            return None
        if isinstance(atom, Eq):
            l = nz.normalize(atom.lhs)
            r = nz.normalize(atom.rhs)
            if l == r:
                return "L1"
            tt = sig.constant("true")
            ff = sig.constant("false")
            if r in (tt, ff) and isinstance(l, App):
                val = r == tt
                if l.op == "_and_" and val:
                    lays = [try_atom(Eq(a, tt), facts_, None) for a in l.args]
                    return max(lays) if all(lays) else None
                if l.op == "_or_" and val:
                    for a in l.args:
                        lay = try_atom(Eq(a, tt), facts_, None)
                        if lay:
                            return lay
                    return None
                if l.op == "_or_" and not val:
                    lays = [try_atom(Eq(a, ff), facts_, None) for a in l.args]
                    return max(lays) if all(lays) else None
                if l.op == "not" and len(l.args) == 1:
                    return try_atom(Eq(l.args[0], ff if val else tt), facts_, None)
                if l.op == "_==_":
                    goal2 = Eq(*l.args) if val else Not(Eq(*l.args))
                    return try_atom(goal2, facts_, None)
                if l.op == "_=/=_":
                    goal2 = Not(Eq(*l.args)) if val else Eq(*l.args)
                    return try_atom(goal2, facts_, None)
            if _atom_key(sig, Eq(l, r)) in facts_:
                return "L2"
            if cong is not None and cong.equal(l, r):
                return "L4"
            return None
        if isinstance(atom, Not) and isinstance(atom.arg, Eq):
            l = nz.normalize(atom.arg.lhs)
            r = nz.normalize(atom.arg.rhs)
            if decidably_different(sig, l, r):
                return "L1"
            if _atom_key(sig, Not(Eq(l, r))) in facts_:
                return "L2"
            if cong is not None:
                for key, f in facts_.items():
                    if key[0] != "neq":
                        continue
                    a, b = f.arg.lhs, f.arg.rhs
                    if (cong.equal(a, l) and cong.equal(b, r)) or (
                        cong.equal(a, r) and cong.equal(b, l)
                    ):
                        return "L4"
            return None
        key = _atom_key(sig, atom)
        return "L2" if key in facts_ else None

    # pass 1: L1/L2
    remaining = []
    for g in goals:
        layer = try_atom(g, facts, None)
        if layer:
            layers_used.append(layer)
        else:
            remaining.append(g)
    # pass 2: substitution propagation (L3)
    if remaining:
        subst = _oriented_substitution(sig, facts)
        if len(subst):
            atoms2 = [apply_subst_formula(sig, subst, f) for f in facts.values()]
            facts2, contradiction = _saturate(theory, atoms2, nz)
            if contradiction:
                if log is not None:
                    log.append({"layer": "L0-unsat-hypothesis"})
                return ImplicationResult(VALID, "L0-unsat-hypothesis")
            still = []
            for g in remaining:
                layer = try_atom(g, facts2, subst)
                if layer:
                    layers_used.append("L3")
                else:
                    still.append(g)
            remaining = still
            facts = facts2
    # pass 3: congruence closure (L4)
    if remaining:
        cong = _Congruence(sig)
        for key, f in facts.items():
            if key[0] == "eq":
                cong.add(f.lhs)
                cong.add(f.rhs)
        for g in remaining:
            for atom in conjuncts(g):
                if isinstance(atom, Eq):
                    cong.add(nz.normalize(atom.lhs))
                    cong.add(nz.normalize(atom.rhs))
                elif isinstance(atom, Not) and isinstance(atom.arg, Eq):
                    cong.add(nz.normalize(atom.arg.lhs))
                    cong.add(nz.normalize(atom.arg.rhs))
        for key, f in facts.items():
            if key[0] == "eq":
                cong.union(f.lhs, f.rhs)
        cong.close()
        still = []
        for g in remaining:
            layer = try_atom(g, facts, subst if subst and len(subst) else None)
            if layer:
                layers_used.append("L4")
            else:
                still.append(g)
        remaining = still
        residual = remaining

    if not remaining:
        layer = max(layers_used) if layers_used else "L1"
        if log is not None:
            log.append({"layer": layer})
        return ImplicationResult(VALID, layer)
    return ImplicationResult(UNKNOWN, None, residual)


# ---------------------------------------------------------------------------
# subsumption
# ---------------------------------------------------------------------------

YES = "yes"
NO = "no"


@dataclass
class SubsumptionResult:
    kind: str  # yes / no / unknown
    matcher: object = None
    disjunct: object = None
    reason: str = ""
    residual: list = field(default_factory=list)
    layer: str | None = None
    counterexample: object = None

    def __bool__(self):
        return self.kind == YES


def subsumes(theory, a: ConstrainedPattern, b_pred, log=None, find_counterexample=True) -> SubsumptionResult:
    """Check [[a]] subset of [[b_pred]] by matching plus constraint implication.

    Disjuncts are tried in declaration order; the first Yes wins.  A No is
    only reported with a concrete ground counterexample state.
    """
    sig = theory.signature
    best = None
    for d in disjuncts_of(b_pred):
        for alpha in match_iter(sig, d.pattern, a.pattern):
            concl = apply_subst_formula(sig, alpha, d.constraint)
            res = implication_valid(theory, a.constraint, concl, log=log)
            if res:
                return SubsumptionResult(
                    YES, matcher=alpha, disjunct=d, layer=res.layer
                )
            if best is None or len(res.residual) < len(best[0].residual):
                best = (res, d, alpha)
    cex = _ground_counterexample(theory, a, b_pred) if find_counterexample else None
    if cex is not None:
        return SubsumptionResult(NO, reason="ground counterexample", counterexample=cex)
    if best is None:
        return SubsumptionResult(
            "unknown", reason="no disjunct pattern matches the subject pattern"
        )
    res, d, alpha = best
    return SubsumptionResult(
        "unknown",
        disjunct=d,
        matcher=alpha,
        reason="undischarged implication: "
        + " /\\ ".join(formula_to_str(f) for f in res.residual),
        residual=res.residual,
    )


def enumerate_ground_terms(sig, sort, depth):
    """All ground constructor terms of a sort up to a construction depth."""
    if depth <= 0:
        return []
    out = []
    for decl, argsorts, _res in sig.constructors_of_sort(sort):
        if not argsorts:
            out.append(sig.constant(decl.name))
            continue
        if depth == 1:
            continue
        arg_universes = [enumerate_ground_terms(sig, s, depth - 1) for s in argsorts]
        if any(not u for u in arg_universes):
            continue
        for combo in iproduct(*arg_universes):
            try:
                out.append(sig.app(decl.name, combo))
            except Exception:
                continue
    seen = set()
    uniq = []
    for t in out:
        if t not in seen:
            seen.add(t)
            uniq.append(t)
    return uniq


def _ground_counterexample(theory, a, b_pred, depth=3, cap=400):
    sig = theory.signature
    avars = sorted(a.vars(), key=term_key)
    if not avars:
        universe_sizes = 1
        combos = [()]
    else:
        universes = []
        for v in avars:
            u = enumerate_ground_terms(sig, v.sort, depth)
            if not u or len(u) > cap:
                return None
            universes.append(u)
        total = 1
        for u in universes:
            total *= len(u)
            if total > cap:
                return None
        combos = iproduct(*universes)
    nz = Normalizer(theory)
    for combo in combos:
        sigma = Subst(dict(zip(avars, combo)))
        try:
            if nz._eval_formula(a.constraint, sigma) is not True:
                continue
            state = nz.normalize(sigma.apply(sig, a.pattern))
            if not ground_membership(theory, state, b_pred, normalizer=nz):
                return state
        except Exception:
            continue
    return None
