"""Executable rewrite theories: one-step rewriting at the top, the stop
transformation, and a bounded explicit-state breadth-first search oracle."""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import AlreadyTransformed, ExecutabilityError, SignatureError
from .formulas import TrueF, formula_vars
from .rewriting import Equation, Normalizer, eval_condition
from .terms import App, OpDecl, Signature, Var, is_var, vars_of
from .unification import match_iter

STOP_WRAPPER = "[_]"
STOP_LABEL = "stop"


@dataclass(frozen=True)
class Rule:
    label: str
    lhs: object
    rhs: object
    condition: object = TrueF()

    def check_executable(self):
        if is_var(self.lhs):
            raise ExecutabilityError(f"rule {self.label}: left-hand side is a variable")
        extra = (vars_of(self.rhs) | formula_vars(self.condition)) - vars_of(self.lhs)
        if extra:
            names = ", ".join(sorted(v.name for v in extra))
            raise ExecutabilityError(
                f"rule {self.label}: right-hand/condition variables not bound by the "
                f"left-hand side: {names}"
            )


class RewriteTheory:
    """Signature + equations + rules, with a designated top sort."""

    def __init__(self, signature: Signature, equations=(), rules=(), top_sort="State"):
        self.signature = signature
        self.equations = tuple(equations)
        self.rules = tuple(rules)
        self.top_sort = top_sort

    def rule(self, label):
        for r in self.rules:
            if r.label == label:
                return r
        raise KeyError(label)

    def with_rules(self, rules):
        return RewriteTheory(self.signature, self.equations, tuple(rules), self.top_sort)

    def extended(self, equations=(), rules=()):
        """A new theory with additional equations/rules; the base is untouched."""
        return RewriteTheory(
            self.signature,
            self.equations + tuple(equations),
            self.rules + tuple(rules),
            self.top_sort,
        )

    # -- checks ---------------------------------------------------------------

    def check_executability(self):
        for eq in self.equations:
            eq.check_executable()
        for r in self.rules:
            r.check_executable()

    def check_topmost(self):
        sg = self.signature.sort_graph
        if self.top_sort not in sg.sorts:
            raise SignatureError(f"top sort {self.top_sort} is not declared")
        for r in self.rules:
            for side, t in (("left", r.lhs), ("right", r.rhs)):
                s = self.signature.least_sort(t)
                if not sg.leq(s, self.top_sort):
                    raise ExecutabilityError(
                        f"rule {r.label}: {side}-hand side has sort {s}, not the top sort"
                    )
                if not self.signature.is_constructor_term(t):
                    raise ExecutabilityError(
                        f"rule {r.label}: {side}-hand side is not a constructor term"
                    )
        for d in self.signature.all_decls():
            if not d.is_constructor:
                continue
            for argsorts, res in d.typings:
                if sg.leq(res, self.top_sort):
                    for a in argsorts:
                        if a in sg.sorts and sg.leq(a, self.top_sort):
                            raise ExecutabilityError(
                                f"constructor {d.name} rebuilds states below the top wrapper"
                            )

    def check(self):
        """All well-formedness findings; empty list means the theory is clean."""
        findings = list(self.signature.validate())
        try:
            self.check_executability()
        except ExecutabilityError as e:
            findings.append(str(e))
        try:
            self.check_topmost()
        except (ExecutabilityError, SignatureError) as e:
            findings.append(str(e))
        return findings


def stop_transform(theory: RewriteTheory) -> RewriteTheory:
    """Add a terminal wrapper above the top sort and one stop rule per state
    constructor, so that invariance becomes a reachability property."""
    sig = theory.signature
    if sig.has_op(STOP_WRAPPER):
        raise AlreadyTransformed("theory already carries the terminal wrapper")
    wrapped_sort = f"[{theory.top_sort}]"
    new_sig = Signature(sig.sort_graph)
    new_sig._decls = {k: list(v) for k, v in sig._decls.items()}
    new_sig.sort_graph.add_sort(wrapped_sort)
    new_sig.sort_graph.finalize()
    new_sig.add_op(
        OpDecl(
            STOP_WRAPPER,
            typings=(((theory.top_sort,), wrapped_sort),),
            is_constructor=True,
        )
    )
    stop_rules = []
    fresh_idx = 0
    for decl, argsorts, _res in sig.constructors_of_sort(theory.top_sort):
        args = []
        for s in argsorts:
            fresh_idx += 1
            args.append(Var(f"X#{fresh_idx}", s))
        lhs = new_sig.app(decl.name, tuple(args))
        rhs = new_sig.app(STOP_WRAPPER, (lhs,))
        stop_rules.append(Rule(STOP_LABEL, lhs, rhs))
    if not stop_rules:
        raise ExecutabilityError(f"no constructors of sort {theory.top_sort} to stop")
    return RewriteTheory(
        new_sig, theory.equations, theory.rules + tuple(stop_rules), theory.top_sort
    )


def one_step_successors(theory: RewriteTheory, state, rules=None, normalizer=None):
    """All successors of a canonical ground state, modulo the axioms.

    Returns a list of (rule label, matcher, successor) with successors
    deduplicated by canonical form (first witness kept).
    """
    nz = normalizer or Normalizer(theory)
    out = []
    seen = set()
    for r in rules if rules is not None else theory.rules:
        for sigma in match_iter(theory.signature, r.lhs, state):
            if not isinstance(r.condition, TrueF):
                if not eval_condition(theory, r.condition, sigma):
                    continue
            succ = nz.normalize(sigma.apply(theory.signature, r.rhs))
            key = (r.label, succ)
            if key not in seen:
                seen.add(key)
                out.append((r.label, sigma, succ))
    return out


@dataclass
class Violation:
    state: object
    monitor: str
    path: tuple  # rule labels from the initial state


@dataclass
class SearchResult:
    visited: int
    depth_reached: int
    violations: list = field(default_factory=list)
    budget_exhausted: bool = False

    @property
    def ok(self):
        return not self.violations


def bounded_search(
    theory: RewriteTheory,
    init,
    depth: int,
    monitors=(),
    node_budget=None,
    jobs: int = 1,
):
    """Breadth-first enumeration of canonical states up to a depth bound.

    Monitors are (name, check) pairs where check is either a pattern
    predicate (ground membership) or a boolean-valued term with a single
    state variable (normalized to true).  Every state that fails a monitor
    is reported together with a replayable path of rule labels.
    """
    from .patterns import ground_membership  # local import to avoid a cycle

    sig = theory.signature
    nz = Normalizer(theory, budget=10_000_000)
    init = nz.normalize(init)

    def failing(state):
        bad = []
        for name, check in monitors:
            if isinstance(check, tuple) and len(check) == 2 and isinstance(check[0], Var):
                hole, boolterm = check
                from .terms import Subst

                val = nz.normalize(Subst({hole: state}).apply(sig, boolterm))
                holds = val == sig.constant("true")
            else:
                holds = ground_membership(theory, state, check, normalizer=nz)
            if not holds:
                bad.append(name)
        return bad

    result = SearchResult(visited=0, depth_reached=0)
    paths = {init: ()}
    for name in failing(init):
        result.violations.append(Violation(init, name, ()))
    frontier = [init]
    visited = {init}
    level = 0
    while frontier and level < depth:
        level += 1
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                expansions = list(
                    pool.map(lambda s: one_step_successors(theory, s, normalizer=nz), frontier)
                )
        else:
            expansions = [one_step_successors(theory, s, normalizer=nz) for s in frontier]
        nxt = []
        for parent, succs in zip(frontier, expansions):
            for label, _sigma, succ in succs:
                if succ in visited:
                    continue
                if node_budget is not None and len(visited) >= node_budget:
                    result.budget_exhausted = True
                    break
                visited.add(succ)
                paths[succ] = paths[parent] + (label,)
                nxt.append(succ)
                for name in failing(succ):
                    result.violations.append(Violation(succ, name, paths[succ]))
            if result.budget_exhausted:
                break
        frontier = nxt
        result.depth_reached = level
        if result.budget_exhausted:
            break
    result.visited = len(visited)
    return result


def replay_path(theory, init, path):
    """Re-execute a path of rule labels; returns all states reachable by it."""
    nz = Normalizer(theory)
    states = {nz.normalize(init)}
    for label in path:
        rules = [r for r in theory.rules if r.label == label]
        nxt = set()
        for s in states:
            for _label, _sigma, succ in one_step_successors(theory, s, rules=rules, normalizer=nz):
                nxt.add(succ)
        if not nxt:
            raise ExecutabilityError(f"path replay stuck at rule {label}")
        states = nxt
    return states
