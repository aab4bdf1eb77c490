"""Rendering of terms, formulas and substitutions back to surface syntax."""

from __future__ import annotations

from .terms import App, Var

_INFIX = {"_==_": "==", "_=/=_": "=/=", "_and_": "and", "_or_": "or"}
_SEP = {"_,_": ", ", "_;_": " ; "}


def _as_numeral(t):
    n = 0
    while isinstance(t, App) and t.op == "s" and len(t.args) == 1:
        n += 1
        t = t.args[0]
    if isinstance(t, App) and t.op == "0" and not t.args:
        return n
    return None


def term_to_str(t, *, atom=False):
    if isinstance(t, Var):
        return t.name
    n = _as_numeral(t)
    if n is not None:
        return str(n)
    op = t.op
    if op == "{_}":
        return "{ " + term_to_str(t.args[0]) + " }"
    if op == "[_]":
        return "[ " + term_to_str(t.args[0]) + " ]"
    if op == "<_|_>":
        return "< " + term_to_str(t.args[0]) + " | " + term_to_str(t.args[1]) + " >"
    if op == "__":
        inner = " ".join(term_to_str(a, atom=True) for a in t.args)
        return f"({inner})" if atom else inner
    if op in _SEP:
        inner = _SEP[op].join(term_to_str(a) for a in t.args)
        return f"({inner})"
    if op in _INFIX:
        l, r = t.args
        return f"({term_to_str(l)} {_INFIX[op]} {term_to_str(r)})"
    if not t.args:
        return op
    return op + "(" + ", ".join(term_to_str(a) for a in t.args) + ")"


def formula_to_str(f):
    from .formulas import And, Eq, FalseF, Not, Or, TrueF

    if isinstance(f, TrueF):
        return "tt"
    if isinstance(f, FalseF):
        return "ff"
    if isinstance(f, Eq):
        return f"{term_to_str(f.lhs)} = {term_to_str(f.rhs)}"
    if isinstance(f, Not):
        if isinstance(f.arg, Eq):
            return f"{term_to_str(f.arg.lhs)} =/= {term_to_str(f.arg.rhs)}"
        return f"~({formula_to_str(f.arg)})"
    if isinstance(f, And):
        return " /\\ ".join(
            f"({formula_to_str(g)})" if isinstance(g, Or) else formula_to_str(g)
            for g in f.parts
        )
    if isinstance(f, Or):
        return " \\/ ".join(formula_to_str(g) for g in f.parts)
    return str(f)
