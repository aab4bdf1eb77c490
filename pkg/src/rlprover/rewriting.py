"""Reduction to canonical form with conditional equations modulo axioms.

The strategy is innermost: arguments are normalized first, then equations
are tried at the root.  Equations are applied to open terms as well; a
conditional equation only fires when its condition instance provably
holds (each atom reduces to identical canonical forms / to true), which is
sound for every ground instance.

Equality atoms between terms are decided by canonical-form comparison in
the initial model; the built-in operators _==_ and _=/=_ evaluate the same
way at the term level, including on open terms when both sides are
identical or are constructor terms with a decidable clash.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import ConditionUnevaluated, ExecutabilityError, StepBudgetExceeded
from .formulas import And, Eq, FalseF, Not, Or, TrueF, conjuncts, formula_vars
from .terms import (
    BUILTIN_EQ,
    BUILTIN_NEQ,
    App,
    Subst,
    Var,
    is_var,
    vars_of,
)
from .unification import match_iter

DEFAULT_STEP_BUDGET = 100_000


@dataclass(frozen=True)
class Equation:
    lhs: object
    rhs: object
    condition: object = TrueF()
    label: str | None = None

    def check_executable(self):
        if is_var(self.lhs):
            raise ExecutabilityError("equation left-hand side is a bare variable")
        lv = vars_of(self.lhs)
        extra = (vars_of(self.rhs) | formula_vars(self.condition)) - lv
        if extra:
            names = ", ".join(sorted(v.name for v in extra))
            raise ExecutabilityError(
                f"equation for {self.lhs.op} uses right-hand/condition variables not in "
                f"the left-hand side: {names}"
            )


def decidably_different(sig, t, u) -> bool:
    """True when no ground instance can make the two canonical terms equal.

    Conservative: only free-constructor clashes count, never AC collections.
    """
    if isinstance(t, Var) or isinstance(u, Var):
        return False
    if sig.axiom_class_of(t.op) != "free" or sig.axiom_class_of(u.op) != "free":
        return False
    if not (sig.is_constructor_term_root(t) and sig.is_constructor_term_root(u)):
        return False
    if t.op != u.op or len(t.args) != len(u.args):
        return True
    return any(decidably_different(sig, a, b) for a, b in zip(t.args, u.args))


# is_constructor_term_root: operator itself is a constructor (args not checked)
def _is_ctor_root(sig, t):
    return any(d.is_constructor for d in sig.decls(t.op))


# attach to Signature without widening its module
from .terms import Signature as _Sig  # noqa: E402

_Sig.is_constructor_term_root = _is_ctor_root


class Normalizer:
    """Innermost normalization against a theory's equations.

    A fixed equation/matcher order makes results reproducible; a seeded
    random order exercises the convergence of the equations.
    """

    def __init__(self, theory, budget=None, rng: random.Random | None = None):
        self.theory = theory
        self.sig = theory.signature
        self.budget = budget if budget is not None else DEFAULT_STEP_BUDGET
        self.rng = rng
        self.steps = 0
        self._cache: dict = {}
        self._by_root: dict[str, list[Equation]] = {}
        for eq in theory.equations:
            self._by_root.setdefault(eq.lhs.op, []).append(eq)

    def _spend(self):
        self.steps += 1
        if self.steps > self.budget:
            raise StepBudgetExceeded(f"normalization exceeded {self.budget} rewrite steps")

    def normalize(self, t):
        if isinstance(t, Var):
            return t
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        args = tuple(self.normalize(a) for a in t.args)
        cur = self.sig.app(t.op, args)
        if isinstance(cur, App):
            hit = self._cache.get(cur)
            if hit is None:
                red = self._root_step(cur)
                if red is None:
                    hit = cur
                else:
                    self._spend()
                    hit = self.normalize(red)
                self._cache[cur] = hit
            cur = hit
        self._cache[t] = cur
        return cur

    def _root_step(self, t):
        if t.op in (BUILTIN_EQ, BUILTIN_NEQ):
            return self._eval_builtin(t)
        eqs = self._by_root.get(t.op)
        if not eqs:
            return None
        if self.rng is not None:
            eqs = list(eqs)
            self.rng.shuffle(eqs)
        for eq in eqs:
            matchers = list(match_iter(self.sig, eq.lhs, t))
            if self.rng is not None:
                self.rng.shuffle(matchers)
            for sigma in matchers:
                if self._condition_holds(eq.condition, sigma):
                    return sigma.apply(self.sig, eq.rhs)
        return None

    def _eval_builtin(self, t):
        l, r = t.args
        tt = self.sig.constant("true")
        ff = self.sig.constant("false")
        if l == r:
            res = True
        elif self.sig.is_ground(l) and self.sig.is_ground(r):
            res = False
        elif decidably_different(self.sig, l, r):
            res = False
        else:
            return None  # stuck on open, undecided arguments
        if t.op == BUILTIN_NEQ:
            res = not res
        return tt if res else ff

    def _condition_holds(self, cond, sigma) -> bool:
        """Does the condition instance provably hold (for all ground instances)?"""
        v = self._eval_formula(cond, sigma)
        return v is True

    def _eval_formula(self, f, sigma):
        """Three-valued formula evaluation: True, False, or None (unknown)."""
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, Eq):
            l = self.normalize(sigma.apply(self.sig, f.lhs))
            r = self.normalize(sigma.apply(self.sig, f.rhs))
            if l == r:
                return True
            if self.sig.is_ground(l) and self.sig.is_ground(r):
                return False
            if decidably_different(self.sig, l, r):
                return False
            return None
        if isinstance(f, Not):
            v = self._eval_formula(f.arg, sigma)
            return None if v is None else not v
        if isinstance(f, And):
            out = True
            for p in f.parts:
                v = self._eval_formula(p, sigma)
                if v is False:
                    return False
                if v is None:
                    out = None
            return out
        if isinstance(f, Or):
            out = False
            for p in f.parts:
                v = self._eval_formula(p, sigma)
                if v is True:
                    return True
                if v is None:
                    out = None
            return out
        raise TypeError(f"not a formula: {f!r}")


def normalize(theory, t, budget=None, rng=None):
    return Normalizer(theory, budget=budget, rng=rng).normalize(t)


def eval_condition(theory, phi, sigma=None, budget=None) -> bool:
    """Decide a ground condition instance by reduction to canonical form."""
    nz = Normalizer(theory, budget=budget)
    sigma = sigma or Subst()
    for atom in conjuncts(phi):
        inst_vars = formula_vars(atom) - set(sigma.domain())
        leftover = {v for v in inst_vars if sigma.get(v) == v}
        if leftover:
            names = ", ".join(sorted(v.name for v in leftover))
            raise ConditionUnevaluated(f"condition atom has unbound variables: {names}")
    v = nz._eval_formula(phi, sigma)
    if v is None:
        raise ConditionUnevaluated("condition did not reduce to a truth value")
    return v
