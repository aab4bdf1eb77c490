"""Matching and unification modulo the supported structural axioms.

Supported axiom classes per operator: free, comm, assoc+comm (AC) and
assoc+comm+identity (ACU).  Anything else is rejected loudly.

Matching treats the subject's variables as frozen constants and returns a
complete set of matchers.  Unification solves both-sides-open problems; AC
and ACU equations go through flattening, cancellation of common arguments,
and enumeration of the minimal solutions of the associated linear
Diophantine equation (Stickel-style), with a configurable split budget.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import product

from .errors import UnsupportedAxioms
from .terms import (
    AC,
    ACU,
    COMM,
    FREE,
    App,
    Subst,
    Var,
    term_key,
    vars_of,
)

DEFAULT_SPLIT_BUDGET = 10_000


class _Budget:
    __slots__ = ("left", "exhausted")

    def __init__(self, amount):
        self.left = amount
        self.exhausted = False

    def spend(self, n=1) -> bool:
        if self.left < n:
            self.exhausted = True
            return False
        self.left -= n
        return True


@dataclass(frozen=True)
class SolutionSet:
    substitutions: tuple
    complete: bool = True

    def __iter__(self):
        return iter(self.substitutions)

    def __len__(self):
        return len(self.substitutions)

    def __bool__(self):
        return bool(self.substitutions)


@dataclass(frozen=True)
class UnificationProblem:
    equations: tuple  # (lhs, rhs) pairs

    def variables(self):
        vs = frozenset()
        for l, r in self.equations:
            vs |= vars_of(l) | vars_of(r)
        return vs


def _axclass(sig, t):
    if isinstance(t, Var):
        return None
    arg_sort = t.args[0].sort if t.args else None
    return sig.axiom_class_of(t.op, arg_sort)


def variants_equal_modulo_B(sig, t, u) -> bool:
    """Equality modulo axioms, via the canonical representation."""
    return sig.remake(t) == sig.remake(u)


# ---------------------------------------------------------------------------
# matching (subject frozen)
# ---------------------------------------------------------------------------


def match_modulo_B(sig, pattern, subject, budget=None) -> SolutionSet:
    bud = _Budget(budget if budget is not None else DEFAULT_SPLIT_BUDGET)
    seen = set()
    out = []
    for b in _match(sig, pattern, subject, {}, bud):
        s = Subst(b)
        if s not in seen:
            seen.add(s)
            out.append(s)
    return SolutionSet(tuple(out), complete=not bud.exhausted)


def match_iter(sig, pattern, subject, binding=None, budget=None):
    bud = _Budget(budget if budget is not None else DEFAULT_SPLIT_BUDGET)
    for b in _match(sig, pattern, subject, dict(binding or {}), bud):
        yield Subst(b)


def _match(sig, p, s, b, bud):
    if isinstance(p, Var):
        cur = b.get(p)
        if cur is not None:
            if cur == s:
                yield b
            return
        if sig.sort_graph.leq(s.sort, p.sort):
            b2 = dict(b)
            b2[p] = s
            yield b2
        return
    if isinstance(s, Var):
        return  # frozen subject variable cannot match a non-variable pattern
    ax = _axclass(sig, p)
    if p.op != s.op:
        if ax == ACU:
            # a canonical subject is never identity-collapsible, but a pattern
            # f(x, y) can still cover a non-f subject with one side empty
            yield from _match_ac(sig, p.op, list(p.args), [s], b, bud, acu=True)
        return
    if ax == FREE:
        if len(p.args) != len(s.args):
            return
        yield from _match_seq(sig, p.args, s.args, b, bud)
    elif ax == COMM:
        pa, pb = p.args
        sa, sb = s.args
        yield from _match_seq(sig, (pa, pb), (sa, sb), b, bud)
        yield from _match_seq(sig, (pa, pb), (sb, sa), b, bud)
    else:
        yield from _match_ac(sig, p.op, list(p.args), list(s.args), b, bud, acu=(ax == ACU))


def _match_seq(sig, pats, subs, b, bud):
    if not pats:
        yield b
        return
    for b1 in _match(sig, pats[0], subs[0], b, bud):
        yield from _match_seq(sig, pats[1:], subs[1:], b1, bud)


def _expand_in(sig, op, value, acu):
    """The multiset contribution of a bound value under an AC(U) operator."""
    if isinstance(value, App) and value.op == op:
        return list(value.args)
    if acu:
        ident = sig.identity_term(op, None if isinstance(value, Var) else value.sort)
        if ident is not None and value == ident:
            return []
    return [value]


def _match_ac(sig, op, pargs, sargs, b, bud, acu):
    ident = sig.identity_term(op, sargs[0].sort if sargs and isinstance(sargs[0], App) else None)
    remaining = Counter(sargs)
    bound_vals = []
    unbound = Counter()
    aliens = []
    for pa in pargs:
        if isinstance(pa, Var):
            if pa in b:
                bound_vals.append(b[pa])
            else:
                unbound[pa] += 1
        else:
            aliens.append(pa)
    for v in bound_vals:
        for piece in _expand_in(sig, op, v, acu):
            if remaining[piece] <= 0:
                return
            remaining[piece] -= 1
    remaining = +remaining

    def assign_aliens(idx, rem, bnd):
        if not bud.spend():
            return
        if idx == len(aliens):
            yield from distribute(sorted(unbound.items(), key=lambda kv: term_key(kv[0])), rem, bnd)
            return
        pa = aliens[idx]
        for elem in sorted(rem, key=term_key):
            if rem[elem] <= 0:
                continue
            for b1 in _match(sig, pa, elem, bnd, bud):
                rem2 = rem.copy()
                rem2[elem] -= 1
                yield from assign_aliens(idx + 1, +rem2, b1)

    def build_value(counter):
        total = sum(counter.values())
        if total == 0:
            return ident
        parts = []
        for elem, c in counter.items():
            parts.extend([elem] * c)
        if len(parts) == 1:
            return parts[0]
        return sig.app(op, tuple(parts))

    def distribute(vars_left, rem, bnd):
        if not bud.spend():
            return
        if not vars_left:
            if not rem:
                yield bnd
            return
        (v, mult), rest = vars_left[0], vars_left[1:]
        if not rest:
            # last variable takes everything, multiplicity permitting
            share = Counter()
            for elem, c in rem.items():
                if c % mult:
                    return
                share[elem] = c // mult
            if not share and not acu:
                return
            val = build_value(share)
            if val is None:
                return
            vs = val.sort
            if not sig.sort_graph.leq(vs, v.sort):
                return
            b2 = dict(bnd)
            b2[v] = val
            yield b2
            return
        elems = sorted(rem, key=term_key)

        def choose(i, share, rem2):
            if i == len(elems):
                if not share and not acu:
                    return
                val = build_value(share)
                if val is None:
                    return
                vs = val.sort
                if not sig.sort_graph.leq(vs, v.sort):
                    return
                b2 = dict(bnd)
                b2[v] = val
                yield from distribute(rest, +rem2, b2)
                return
            e = elems[i]
            maxtake = rem2[e] // mult
            for take in range(maxtake + 1):
                share2 = share.copy()
                if take:
                    share2[e] = take
                rem3 = rem2.copy()
                rem3[e] -= take * mult
                yield from choose(i + 1, share2, rem3)

        yield from choose(0, Counter(), rem.copy())

    if not aliens and not unbound:
        if not remaining:
            yield b
        return
    if ident is None and acu:
        raise UnsupportedAxioms(f"operator {op} marked ACU but has no identity")
    yield from assign_aliens(0, remaining, b)


# ---------------------------------------------------------------------------
# unification
# ---------------------------------------------------------------------------


def unify_modulo_B(sig, problem, budget=None) -> SolutionSet:
    if isinstance(problem, UnificationProblem):
        eqs = list(problem.equations)
    else:
        eqs = list(problem)
    bud = _Budget(budget if budget is not None else DEFAULT_SPLIT_BUDGET)
    problem_vars = set()
    for l, r in eqs:
        problem_vars |= vars_of(l) | vars_of(r)
    fresh = _FreshZ(problem_vars)
    seen = set()
    out = []
    for sol in _solve(sig, eqs, {}, fresh, bud):
        s = Subst(sol).restrict(problem_vars)
        key = _canonical_key(sig, s, problem_vars)
        if key not in seen:
            seen.add(key)
            out.append(s)
    return SolutionSet(tuple(out), complete=not bud.exhausted)


class _FreshZ:
    def __init__(self, avoid):
        self.n = 0
        self.taken = {v.name for v in avoid}

    def fresh(self, sort):
        while True:
            self.n += 1
            name = f"%{self.n}"
            if name not in self.taken:
                self.taken.add(name)
                return Var(name, sort)


def _canonical_key(sig, subst, problem_vars):
    """Rename range variables to a fixed enumeration for duplicate pruning."""
    items = sorted(subst.mapping.items(), key=lambda kv: term_key(kv[0]))
    ren = {}

    def walk(t):
        if isinstance(t, Var):
            if t in problem_vars:
                return t
            if t not in ren:
                ren[t] = Var(f"%c{len(ren)}", t.sort)
            return ren[t]
        return App(t.op, tuple(walk(a) for a in t.args), t.sort)

    return tuple((x, walk(t)) for x, t in items)


def _apply_all(sig, binding, eqs):
    s = Subst(binding)
    return [(s.apply(sig, l), s.apply(sig, r)) for l, r in eqs]


def _solve(sig, eqs, binding, fresh, bud):
    if not bud.spend():
        return
    if not eqs:
        yield binding
        return
    (l, r), rest = eqs[0], eqs[1:]
    if l == r:
        yield from _solve(sig, rest, binding, fresh, bud)
        return
    # a variable that does not occur in the other side binds directly
    if isinstance(l, Var) or isinstance(r, Var):
        if isinstance(r, Var) and not isinstance(l, Var):
            l, r = r, l
        if isinstance(r, Var) or l not in vars_of(r):
            yield from _eliminate(sig, l, r, rest, binding, fresh, bud)
            return
        # occurs inside an AC collection: fall through to the multiset route,
        # where cancellation handles it; otherwise growth is strict
        if _axclass(sig, r) not in (AC, ACU):
            return
    lax = _axclass(sig, l)
    rax = _axclass(sig, r)
    # route AC/ACU equations through the collection operator
    if lax in (AC, ACU) or rax in (AC, ACU):
        if lax in (AC, ACU):
            op, acu = l.op, lax == ACU
            left = list(l.args)
            right = list(r.args) if isinstance(r, App) and r.op == op else [r]
        else:
            op, acu = r.op, rax == ACU
            right = list(r.args)
            left = list(l.args) if isinstance(l, App) and l.op == op else [l]
        yield from _solve_ac(sig, op, acu, left, right, rest, binding, fresh, bud)
        return
    # both applications, non-AC roots
    if l.op != r.op:
        return
    ax = lax
    if ax == FREE:
        if len(l.args) != len(r.args):
            return
        yield from _solve(sig, list(zip(l.args, r.args)) + rest, binding, fresh, bud)
    elif ax == COMM:
        la, lb = l.args
        ra, rb = r.args
        yield from _solve(sig, [(la, ra), (lb, rb)] + rest, binding, fresh, bud)
        yield from _solve(sig, [(la, rb), (lb, ra)] + rest, binding, fresh, bud)
    else:  # pragma: no cover - routed above
        raise UnsupportedAxioms(f"operator {l.op}")


def _eliminate(sig, x, t, rest, binding, fresh, bud):
    assert isinstance(x, Var)
    if x == t:
        yield from _solve(sig, rest, binding, fresh, bud)
        return
    if isinstance(t, Var):
        if sig.sort_graph.leq(t.sort, x.sort):
            yield from _bind(sig, x, t, rest, binding, fresh, bud)
        elif sig.sort_graph.leq(x.sort, t.sort):
            yield from _bind(sig, t, x, rest, binding, fresh, bud)
        else:
            for g in sorted(sig.sort_graph.glbs(x.sort, t.sort)):
                z = fresh.fresh(g)
                ren = Subst({x: z, t: z})
                b2 = {k: ren.apply(sig, v) for k, v in binding.items()}
                b2[x] = z
                b2[t] = z
                yield from _solve(sig, _apply_all(sig, {x: z, t: z}, rest), b2, fresh, bud)
        return
    if x in vars_of(t):
        return  # AC-rooted cases were routed earlier; here growth is strict
    ts = t.sort
    if not sig.sort_graph.leq(ts, x.sort):
        return
    yield from _bind(sig, x, t, rest, binding, fresh, bud)


def _bind(sig, x, t, rest, binding, fresh, bud):
    one = Subst({x: t})
    b2 = {k: one.apply(sig, v) for k, v in binding.items()}
    b2[x] = t
    yield from _solve(sig, _apply_all(sig, {x: t}, rest), b2, fresh, bud)


def _cancel(left, right):
    lc, rc = Counter(left), Counter(right)
    common = lc & rc
    return +(lc - common), +(rc - common)


def _dioph_basis(lmults, rmults):
    """Minimal nonzero solutions of sum(m_i x_i) = sum(n_j y_j) over naturals."""
    p, q = len(lmults), len(rmults)
    bx = max(rmults) if rmults else 0
    by = max(lmults) if lmults else 0
    sols = []
    for xs in product(range(bx + 1), repeat=p):
        s = sum(m * x for m, x in zip(lmults, xs))
        if s == 0 and any(xs):
            continue
        for ys in product(range(by + 1), repeat=q):
            if sum(n * y for n, y in zip(rmults, ys)) != s:
                continue
            vec = xs + ys
            if any(vec):
                sols.append(vec)
    minimal = []
    for v in sols:
        if not any(w != v and all(a <= b for a, b in zip(w, v)) for w in sols):
            minimal.append(v)
    return minimal


def _solve_ac(sig, op, acu, left, right, rest, binding, fresh, bud):
    left, right = _cancel(left, right)
    if not left and not right:
        yield from _solve(sig, rest, binding, fresh, bud)
        return
    ident = sig.identity_term(op)
    if not left or not right:
        side = left or right
        if not acu:
            return
        if all(isinstance(t, Var) for t in side):
            eqs = [(v, ident) for v in side]
            yield from _solve(sig, eqs + rest, binding, fresh, bud)
        return
    lcols = sorted(left.items(), key=lambda kv: term_key(kv[0]))
    rcols = sorted(right.items(), key=lambda kv: term_key(kv[0]))
    cols = [(t, m, True) for t, m in lcols] + [(t, m, False) for t, m in rcols]
    if len(cols) > 14:
        bud.exhausted = True
        return
    basis = _dioph_basis([m for _, m in lcols], [m for _, m in rcols])
    if not basis:
        return
    arg_sort = None
    for d in sig.decls(op):
        for argsorts, _res in d.typings:
            if len(argsorts) == 2:
                arg_sort = argsorts[0]
                break
    ncols = len(cols)
    is_var_col = [isinstance(t, Var) for t, _, _ in cols]

    def subsets(i, chosen, totals):
        if not bud.spend():
            return
        if i == len(basis):
            for c in range(ncols):
                if is_var_col[c]:
                    if totals[c] == 0 and not acu:
                        return
                else:
                    if totals[c] != 1:
                        return
            yield chosen
            return
        # skip basis[i]
        yield from subsets(i + 1, chosen, totals)
        # take basis[i], unless it overfills an alien column
        vec = basis[i]
        for c in range(ncols):
            if not is_var_col[c] and totals[c] + vec[c] > 1:
                return
        yield from subsets(i + 1, chosen + [i], [a + b for a, b in zip(totals, vec)])

    for chosen in subsets(0, [], [0] * ncols):
        zs = {k: fresh.fresh(arg_sort) for k in chosen}
        new_eqs = []
        ok = True
        for c, (term, _mult, _is_left) in enumerate(cols):
            parts = []
            for k in chosen:
                parts.extend([zs[k]] * basis[k][c])
            if is_var_col[c]:
                if not parts:
                    value = ident
                elif len(parts) == 1:
                    value = parts[0]
                else:
                    value = sig.app(op, tuple(parts))
                new_eqs.append((term, value))
            else:
                if len(parts) != 1:
                    ok = False
                    break
                new_eqs.append((parts[0], term))
        if not ok:
            continue
        yield from _solve(sig, new_eqs + rest, binding, fresh, bud)
