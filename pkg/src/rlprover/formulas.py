"""Quantifier-free formulas over terms: equalities under and/or/not."""

from __future__ import annotations

from dataclasses import dataclass

from .terms import vars_of


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Eq:
    lhs: object
    rhs: object


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


TRUE = TrueF()
FALSE = FalseF()


def neq(l, r):
    return Not(Eq(l, r))


def conj(parts):
    flat = []
    for p in parts:
        if isinstance(p, TrueF):
            continue
        if isinstance(p, FalseF):
            return FALSE
        if isinstance(p, And):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(parts):
    flat = []
    for p in parts:
        if isinstance(p, FalseF):
            continue
        if isinstance(p, TrueF):
            return TRUE
        if isinstance(p, Or):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def conjuncts(f):
    if isinstance(f, And):
        out = []
        for p in f.parts:
            out.extend(conjuncts(p))
        return out
    if isinstance(f, TrueF):
        return []
    return [f]


def formula_vars(f):
    if isinstance(f, (TrueF, FalseF)):
        return frozenset()
    if isinstance(f, Eq):
        return vars_of(f.lhs) | vars_of(f.rhs)
    if isinstance(f, Not):
        return formula_vars(f.arg)
    if isinstance(f, (And, Or)):
        out = frozenset()
        for p in f.parts:
            out |= formula_vars(p)
        return out
    raise TypeError(f"not a formula: {f!r}")


def apply_subst_formula(sig, subst, f):
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Eq):
        return Eq(subst.apply(sig, f.lhs), subst.apply(sig, f.rhs))
    if isinstance(f, Not):
        return Not(apply_subst_formula(sig, subst, f.arg))
    if isinstance(f, And):
        return And(tuple(apply_subst_formula(sig, subst, p) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(apply_subst_formula(sig, subst, p) for p in f.parts))
    raise TypeError(f"not a formula: {f!r}")
