"""The reachability-logic sequent calculus and the inductive-invariant driver.

Sequents have the shape [axioms ; circularities] |- (u | phi) ->* B.  The
three core rules are Step, Axiom and Subsumption; Case, Split and
Substitution are the derived rules scripts may invoke between the initial
Step and the closing Axiom/Subsumption phase.

Invariance of I is proved by the stop transformation: the root goals are
I-renamed ->* [I] with the formula itself as the only circularity; Step
promotes it to an axiom for the children.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    AwayViolated,
    NotACoverSet,
    NotInConstraint,
    ScriptError,
    TruncatedUnification,
    UnsupportedSplitShape,
)
from .formulas import (
    And,
    Eq,
    Not,
    Or,
    TrueF,
    apply_subst_formula,
    conj,
    conjuncts,
    formula_vars,
)
from .patterns import (
    BOTTOM,
    ConstrainedPattern,
    OrPred,
    SubsumptionResult,
    constraint_unsat,
    disjuncts_of,
    ground_membership,
    implication_valid,
    normalize_predicate,
    pred_vars,
    subsumes,
)
from .printing import formula_to_str, term_to_str
from .rewriting import Normalizer
from .terms import FreshGen, Subst, Var, rename_apart, term_key, vars_of
from .theory import STOP_WRAPPER, stop_transform
from .unification import match_iter, unify_modulo_B

PENDING = "pending"
PROVED = "proved"
FAILED = "failed"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class ReachFormula:
    lhs: object  # normal pattern predicate
    rhs: object

    def vars(self):
        return pred_vars(self.lhs) | pred_vars(self.rhs)


@dataclass(frozen=True)
class Sequent:
    axioms: tuple
    circularities: tuple
    lhs: ConstrainedPattern
    rhs: object  # normal pattern predicate


@dataclass
class Goal:
    id: int
    sequent: Sequent
    parent: int | None = None
    via: str = ""
    status: str = PENDING
    note: str = ""
    children: list = field(default_factory=list)
    stepped: bool = False
    axiom_tried: bool = False
    subsume_tried: bool = False


class ProofState:
    def __init__(self, theory, log=None):
        self.theory = theory
        self.goals: dict[int, Goal] = {}
        self._next = 0
        self.log = log if log is not None else []
        self.fresh = FreshGen()
        self.poisoned = None  # set on truncated unification
        self.trace = []

    def new_goal(self, sequent, parent=None, via=""):
        g = Goal(self._next, sequent, parent, via)
        self.goals[self._next] = g
        self._next += 1
        if parent is not None:
            self.goals[parent].children.append(g.id)
        self.emit("goal-created", goal=g.id, parent=parent, via=via,
                  lhs=str(g.sequent.lhs))
        return g

    def emit(self, event, **fields):
        rec = {"v": 1, "event": event}
        rec.update(fields)
        self.log.append(rec)

    def pending(self):
        return [g for g in self.goals.values() if g.status == PENDING]

    def discharge(self, goal, how, note=""):
        goal.status = PROVED
        goal.note = note
        self.emit("goal-discharged", goal=goal.id, how=how, note=note)

    def fail(self, goal, note):
        goal.status = FAILED
        goal.note = note
        self.emit("goal-failed", goal=goal.id, note=note)

    def goal_vars(self, goal):
        s = goal.sequent
        vs = vars_of(s.lhs.pattern) | formula_vars(s.lhs.constraint)
        for f in s.axioms + s.circularities:
            vs |= f.vars()
        vs |= pred_vars(s.rhs)
        return vs

    def forest_summary(self):
        return tuple(
            (g.id, g.parent, g.via.split(" ", 1)[0], g.status) for g in self.goals.values()
        )


def _pattern_of(pred):
    """A normal predicate as a single constrained pattern, when it is one."""
    ds = disjuncts_of(pred)
    if len(ds) != 1:
        raise ScriptError("expected a single-disjunct predicate")
    return ds[0]


def _bracket(theory, pred):
    sig = theory.signature
    out = []
    for d in disjuncts_of(pred):
        out.append(ConstrainedPattern(sig.app(STOP_WRAPPER, (d.pattern,)), d.constraint))
    if len(out) == 1:
        return out[0]
    return OrPred(tuple(out))


# ---------------------------------------------------------------------------
# proof rules
# ---------------------------------------------------------------------------


def apply_step(ps: ProofState, goal: Goal, rules=None):
    """Symbolically rewrite the goal's left pattern with every rule, by
    unification; circularities are promoted to axioms in the children."""
    th = ps.theory
    sig = th.signature
    seq = goal.sequent
    u, phi = seq.lhs.pattern, seq.lhs.constraint
    if not isinstance(u, Var) and u.op == STOP_WRAPPER:
        # terminating state: the proof fails unless the goal is already inside B
        res = subsumes(th, seq.lhs, seq.rhs)
        if res:
            ps.discharge(goal, "subsumption", note=f"terminal state ({res.layer})")
        else:
            ps.fail(goal, "terminating state not subsumed by the midcondition")
        return []
    # negated midcondition matches strengthen the child constraints
    neg = []
    for d in disjuncts_of(seq.rhs):
        for beta in match_iter(sig, d.pattern, u):
            neg.append(Not(apply_subst_formula(sig, beta, d.constraint)))
    phi_prime = conj([phi] + neg)
    nz = Normalizer(th)
    children = []
    selected = rules if rules is not None else th.rules
    new_axioms = tuple(dict.fromkeys(seq.axioms + seq.circularities))
    goal_vs = ps.goal_vars(goal)
    for rule in selected:
        ps.fresh.reserve(goal_vs)
        # rename the rule apart from everything in the goal
        ren_map = {}
        for v in sorted(vars_of(rule.lhs), key=term_key):
            ren_map[v] = ps.fresh.fresh(v.name, v.sort)
        ren = Subst(ren_map)
        r_lhs = ren.apply(sig, rule.lhs)
        r_rhs = ren.apply(sig, rule.rhs)
        r_cond = apply_subst_formula(sig, ren, rule.condition)
        sols = unify_modulo_B(sig, [(u, r_lhs)])
        if not sols.complete:
            ps.poisoned = f"unification budget exceeded on rule {rule.label}"
            raise TruncatedUnification(ps.poisoned)
        for alpha in sols:
            child_pat = alpha.apply(sig, r_rhs)
            child_con = apply_subst_formula(sig, alpha, conj([phi_prime, r_cond]))
            cp = ConstrainedPattern(child_pat, child_con)
            if constraint_unsat(th, child_con, nz):
                g = ps.new_goal(
                    Sequent(new_axioms, (), cp, seq.rhs),
                    parent=goal.id,
                    via=f"step {rule.label}",
                )
                ps.discharge(g, "unsat-constraint", note="discarded: constraint unsatisfiable")
                continue
            g = ps.new_goal(
                Sequent(new_axioms, (), cp, seq.rhs),
                parent=goal.id,
                via=f"step {rule.label}",
            )
            children.append(g)
            ps.emit(
                "rule-applied", rule="Step", goal=goal.id, child=g.id,
                label=rule.label, unifier=str(alpha.restrict(vars_of(u))),
            )
    goal.stepped = True
    ps.trace.append(("step", goal.id, [r.label for r in selected]))
    return children


def apply_subsumption(ps: ProofState, goal: Goal) -> SubsumptionResult:
    """Discharge the goal when its left pattern set sits inside the right one.

    A failed check only fails the goal for terminating (wrapped) states:
    elsewhere the goal may still close by Axiom or further steps.
    """
    pat = goal.sequent.lhs.pattern
    terminal = not isinstance(pat, Var) and pat.op == STOP_WRAPPER
    res = subsumes(
        ps.theory, goal.sequent.lhs, goal.sequent.rhs, find_counterexample=terminal
    )
    goal.subsume_tried = True
    ps.trace.append(("subsume", goal.id, None))
    if res:
        ps.discharge(goal, "subsumption", note=res.layer or "")
        ps.emit("rule-applied", rule="Subsumption", goal=goal.id, layer=res.layer)
    elif terminal and res.kind == "no":
        ps.fail(goal, f"subsumption refuted: {term_to_str(res.counterexample)}")
    else:
        goal.note = res.reason
    return res


def apply_axiom(ps: ProofState, goal: Goal, axiom=None):
    """Close the goal against an axiom (typically the promoted circularity)."""
    th = ps.theory
    sig = th.signature
    seq = goal.sequent
    candidates = [axiom] if axiom is not None else list(seq.axioms)
    best_reason = "no axiom available"
    for ax in candidates:
        goal_vs = ps.goal_vars(goal)
        ps.fresh.reserve(goal_vs)
        ax_lhs = _pattern_of(ax.lhs)
        ren_map = {}
        for v in sorted(ax.vars(), key=term_key):
            ren_map[v] = ps.fresh.fresh(v.name, v.sort)
        ren = Subst(ren_map)
        p_pat = ren.apply(sig, ax_lhs.pattern)
        p_con = apply_subst_formula(sig, ren, ax_lhs.constraint)
        res = subsumes(
            th,
            seq.lhs,
            ConstrainedPattern(p_pat, p_con),
        )
        if res:
            alpha = res.matcher
            children = []
            for d in disjuncts_of(ax.rhs):
                v_pat = alpha.apply(sig, ren.apply(sig, d.pattern))
                psi = apply_subst_formula(sig, alpha, apply_subst_formula(sig, ren, d.constraint))
                cp = ConstrainedPattern(v_pat, conj([seq.lhs.constraint, psi]))
                g = ps.new_goal(
                    Sequent(seq.axioms, seq.circularities, cp, seq.rhs),
                    parent=goal.id,
                    via="axiom",
                )
                children.append(g)
            goal.axiom_tried = True
            goal.stepped = True  # children decide the goal
            ps.emit(
                "rule-applied", rule="Axiom", goal=goal.id, layer=res.layer,
                matcher=str(alpha),
            )
            ps.trace.append(("axiom", goal.id, None))
            return children
        best_reason = res.reason or best_reason
    goal.axiom_tried = True
    goal.note = best_reason
    ps.trace.append(("axiom", goal.id, None))
    return None


def cover_set_for(sig, sort, fresh: FreshGen, avoid=()):
    fresh.reserve(avoid)
    cover = []
    for decl, argsorts, _res in sig.constructors_of_sort(sort):
        args = tuple(fresh.fresh(s[0].upper() if s else "X", s) for s in argsorts)
        cover.append(sig.app(decl.name, args))
    return cover


def apply_case(ps: ProofState, goal: Goal, var: Var, cover=None):
    th = ps.theory
    sig = th.signature
    derived = cover_set_for(sig, var.sort, ps.fresh, avoid=ps.goal_vars(goal))
    if not derived:
        raise NotACoverSet(f"sort {var.sort} has no constructors to cover")
    if cover is not None:
        roots = {t.op for t in cover if not isinstance(t, Var)}
        for d in derived:
            if d.op not in roots:
                raise NotACoverSet(f"cover set misses constructor {d.op}")
        derived = cover
    seq = goal.sequent
    nz = Normalizer(th)
    children = []
    for a in derived:
        s = Subst({var: a})
        cp = ConstrainedPattern(
            s.apply(sig, seq.lhs.pattern),
            apply_subst_formula(sig, s, seq.lhs.constraint),
        )
        rhs = _subst_pred(sig, s, seq.rhs)
        g = ps.new_goal(
            Sequent(seq.axioms, seq.circularities, cp, rhs),
            parent=goal.id,
            via=f"case {var.name} = {term_to_str(a)}",
        )
        if constraint_unsat(th, cp.constraint, nz):
            ps.discharge(g, "unsat-constraint", note="discarded: constraint unsatisfiable")
        else:
            children.append(g)
        ps.emit("rule-applied", rule="Case", goal=goal.id, child=g.id,
                var=var.name, pattern=term_to_str(a))
    goal.stepped = True
    ps.trace.append(("case", goal.id, var.name))
    return children


def _subst_pred(sig, s, pred):
    ds = []
    for d in disjuncts_of(pred):
        ds.append(
            ConstrainedPattern(
                s.apply(sig, d.pattern), apply_subst_formula(sig, s, d.constraint)
            )
        )
    return ds[0] if len(ds) == 1 else OrPred(tuple(ds))


def apply_split(ps: ProofState, goal: Goal, shape):
    """Split on p = true / p = false for a boolean term p, or on F / ~F."""
    th = ps.theory
    sig = th.signature
    seq = goal.sequent
    if isinstance(shape, tuple) and len(shape) == 2:
        phis = list(shape)
    else:
        p = shape
        if isinstance(p, Var) or sig.least_sort(p) != "Bool":
            raise UnsupportedSplitShape("split needs a boolean term or a formula pair")
        phis = [Eq(p, sig.constant("true")), Eq(p, sig.constant("false"))]
    split_vars = frozenset()
    for f in phis:
        split_vars |= formula_vars(f)
    lhs_vars = vars_of(seq.lhs.pattern) | formula_vars(seq.lhs.constraint)
    rhs_only = pred_vars(seq.rhs) - lhs_vars
    if split_vars & rhs_only:
        raise AwayViolated("split formula mentions midcondition-only variables")
    nz = Normalizer(th)
    children = []
    for f in phis:
        cp = ConstrainedPattern(seq.lhs.pattern, conj([seq.lhs.constraint, f]))
        g = ps.new_goal(
            Sequent(seq.axioms, seq.circularities, cp, seq.rhs),
            parent=goal.id,
            via=f"split {formula_to_str(f)}",
        )
        if constraint_unsat(th, cp.constraint, nz):
            ps.discharge(g, "unsat-constraint", note="discarded: constraint unsatisfiable")
        else:
            children.append(g)
    goal.stepped = True
    ps.trace.append(("split", goal.id, None))
    return children


def apply_substitution(ps: ProofState, goal: Goal, psi_eqs):
    """Unify an equality sub-conjunction of the constraint away."""
    th = ps.theory
    sig = th.signature
    seq = goal.sequent
    from .patterns import _atom_key

    have = { _atom_key(sig, a): a for a in conjuncts(seq.lhs.constraint) }
    psi_keys = set()
    for e in psi_eqs:
        if not isinstance(e, Eq):
            raise NotInConstraint("substitution takes equalities")
        k = _atom_key(sig, e)
        if k not in have:
            raise NotInConstraint(f"equality {formula_to_str(e)} is not a constraint conjunct")
        psi_keys.add(k)
    rho = conj([a for k, a in have.items() if k not in psi_keys])
    sols = unify_modulo_B(sig, [(e.lhs, e.rhs) for e in psi_eqs])
    if not sols.complete:
        raise TruncatedUnification("substitution unification budget exceeded")
    children = []
    nz = Normalizer(th)
    for alpha in sols:
        cp = ConstrainedPattern(
            alpha.apply(sig, seq.lhs.pattern),
            apply_subst_formula(sig, alpha, rho),
        )
        rhs = _subst_pred(sig, alpha, seq.rhs)
        g = ps.new_goal(
            Sequent(seq.axioms, seq.circularities, cp, rhs),
            parent=goal.id,
            via=f"subst {alpha}",
        )
        if constraint_unsat(th, cp.constraint, nz):
            ps.discharge(g, "unsat-constraint", note="discarded: constraint unsatisfiable")
        else:
            children.append(g)
    goal.stepped = True
    ps.trace.append(("subst", goal.id, None))
    if not children and not goal.children:
        ps.discharge(goal, "substitution", note="no unifier: goal vacuous")
    return children


# ---------------------------------------------------------------------------
# the invariant driver
# ---------------------------------------------------------------------------


@dataclass
class ProveOutcome:
    status: str  # proved / failed / unknown
    state: ProofState
    residuals: list = field(default_factory=list)
    per_rule: dict | None = None

    @property
    def ok(self):
        return self.status == PROVED


def _propagate(ps: ProofState):
    order = sorted(ps.goals, reverse=True)
    for gid in order:
        g = ps.goals[gid]
        if g.status == PENDING and g.stepped and g.children:
            statuses = [ps.goals[c].status for c in g.children]
            if all(s == PROVED for s in statuses):
                g.status = PROVED
            elif any(s == FAILED for s in statuses):
                g.status = FAILED
        elif g.status == PENDING and g.stepped and not g.children:
            # vacuous: no unifier with any rule and no terminating instance
            g.status = PROVED
            g.note = "vacuous: no symbolic successor"


def _finalize(ps: ProofState, goals):
    """Close remaining goals with Subsumption then Axiom, recursively."""
    queue = list(goals)
    while queue:
        g = queue.pop(0)
        if g.status != PENDING or g.stepped:
            continue
        if not g.subsume_tried:
            apply_subsumption(ps, g)
            if g.status != PENDING:
                continue
        if not g.axiom_tried:
            children = apply_axiom(ps, g)
            if children:
                queue.extend(children)
        # pending goals that exhausted subsumption and axioms stay as residuals


def run_script_blocks(ps: ProofState, script, goals):
    if script is None:
        return
    from .parser import Command, OnBlock, TokenStream, TermParser, FormulaParser, tokenize

    sig = ps.theory.signature

    def goal_varctx(goal, claim=None):
        ctx = {}
        if claim is not None:
            for x, t in claim.items():
                if isinstance(t, Var):
                    ctx[x.name] = t
        for v in sorted(ps.goal_vars(goal), key=term_key):
            ctx.setdefault(v.name, v)
            base = v.name.split("#", 1)[0]
            ctx.setdefault(base, v)
        return ctx

    def resolve_var(goal, name, claim):
        ctx = goal_varctx(goal, claim)
        if name in ctx:
            return ctx[name]
        raise ScriptError(f"goal {goal.id}: no variable named {name}")

    def run_cmds(goal_id, cmds, claim=None):
        if not cmds:
            return
        g = ps.goals[goal_id]
        if g.status != PENDING:
            return
        cmd, rest = cmds[0], cmds[1:]
        if cmd.name == "case":
            children = apply_case(ps, g, resolve_var(g, cmd.args["var"], claim))
        elif cmd.name == "split":
            ts = TokenStream(tokenize(cmd.args["term_text"]))
            term = TermParser(sig, goal_varctx(g, claim)).parse(ts)
            children = apply_split(ps, g, term)
        elif cmd.name == "subst":
            ts = TokenStream(tokenize(cmd.args["eq_text"]))
            tp = TermParser(sig, goal_varctx(g, claim))
            f = FormulaParser(tp).parse(ts, allow_or=False)
            eqs = [a for a in conjuncts(f)]
            children = apply_substitution(ps, g, eqs)
        elif cmd.name == "axiom":
            children = apply_axiom(ps, g) or []
        elif cmd.name == "subsume":
            apply_subsumption(ps, g)
            children = []
        elif cmd.name == "step":
            children = apply_step(ps, g)
        else:
            raise ScriptError(f"unknown command {cmd.name}")
        for c in children:
            run_cmds(c.id, rest, claim)

    for block in script.blocks:
        pending = [g for g in ps.goals.values() if g.status == PENDING]
        if isinstance(block, Command):
            for g in pending:
                run_cmds(g.id, [block])
            continue
        # an on-block claims the pending goals its pattern matches; command
        # variables resolve through the claim matcher first
        try:
            ts = TokenStream(tokenize(block.pattern_text))
            pat = TermParser(sig, {}).parse(ts)
        except Exception as e:
            raise ScriptError(f"bad on-pattern: {e}")
        for g in pending:
            matcher = next(iter(match_iter(sig, pat, g.sequent.lhs.pattern)), None)
            if matcher is not None:
                ps.emit("goal-claimed", goal=g.id, pattern=block.pattern_text)
                run_cmds(g.id, list(block.commands), claim=matcher)


def prove_invariant(
    theory,
    invariant,
    script=None,
    rule_labels=None,
    init_states=(),
    log=None,
) -> ProveOutcome:
    """Drive the five-step invariant workflow over a topmost theory.

    The theory must not already carry the terminal wrapper; enrichments are
    expected to be merged by the caller.
    """
    th = stop_transform(theory)
    ps = ProofState(th, log=log)
    sig = th.signature
    try:
        inv_norm = normalize_predicate(th, invariant)
    except TruncatedUnification as e:
        ps.poisoned = str(e)
        return ProveOutcome(UNKNOWN, ps, residuals=[(-1, str(e))])
    if inv_norm is BOTTOM:
        return ProveOutcome(FAILED, ps, residuals=[(-1, "invariant denotes the empty set")])

    for init in init_states:
        if not ground_membership(th, init, inv_norm):
            ps.emit("init-check-failed", state=term_to_str(init))
            return ProveOutcome(
                FAILED, ps, residuals=[(-1, f"initial state outside the invariant")]
            )

    rhs = _bracket(th, inv_norm)
    inv_vars = pred_vars(inv_norm)
    ps.fresh.reserve(inv_vars)
    # rename the formula's left side apart from the midcondition
    ren_map = {v: ps.fresh.fresh(v.name, v.sort) for v in sorted(inv_vars, key=term_key)}
    ren = Subst(ren_map)
    renamed = []
    for d in disjuncts_of(inv_norm):
        renamed.append(
            ConstrainedPattern(
                ren.apply(sig, d.pattern), apply_subst_formula(sig, ren, d.constraint)
            )
        )
    circ_lhs = renamed[0] if len(renamed) == 1 else OrPred(tuple(renamed))
    circ = ReachFormula(circ_lhs, rhs)

    selected_rules = None
    if rule_labels is not None:
        wanted = set(rule_labels)
        selected_rules = [r for r in th.rules if r.label in wanted or r.label == "stop"]
    if script is not None and script.rule_filter:
        wanted = set(script.rule_filter)
        selected_rules = [r for r in th.rules if r.label in wanted or r.label == "stop"]

    roots = []
    for d in renamed:
        roots.append(ps.new_goal(Sequent((), (circ,), d, rhs), via="root"))

    stepped_children = []
    try:
        for root in roots:
            stepped_children.extend(apply_step(ps, root, rules=selected_rules))
        # terminal-branch fast path
        for g in list(stepped_children):
            pat = g.sequent.lhs.pattern
            if not isinstance(pat, Var) and pat.op == STOP_WRAPPER:
                apply_subsumption(ps, g)
        run_script_blocks(ps, script, stepped_children)
        _finalize(ps, [g for g in ps.goals.values() if g.status == PENDING])
    except TruncatedUnification as e:
        ps.poisoned = str(e)
        return ProveOutcome(UNKNOWN, ps, residuals=[(-1, str(e))])
    _propagate(ps)

    residuals = [
        (g.id, g.note or "undischarged goal")
        for g in ps.goals.values()
        if g.status in (PENDING, UNKNOWN, FAILED)
    ]
    root_status = [ps.goals[r.id].status for r in roots]
    if all(s == PROVED for s in root_status):
        status = PROVED
    elif any(g.status == FAILED for g in ps.goals.values()):
        status = FAILED
    else:
        status = UNKNOWN
    ps.emit("proof-outcome", status=status, goals=len(ps.goals),
            residuals=[r[0] for r in residuals])
    return ProveOutcome(status, ps, residuals=residuals)


def prove_invariant_per_rule(theory, invariant, script=None, init_states=(), log=None):
    """Rule modularity: one independent proof per rewrite rule."""
    per_rule = {}
    outcomes = []
    labels = [r.label for r in theory.rules]
    seen = set()
    labels = [l for l in labels if not (l in seen or seen.add(l))]
    for label in labels:
        sub_log = []
        out = prove_invariant(
            theory, invariant, script=script, rule_labels=[label],
            init_states=init_states, log=sub_log,
        )
        if log is not None:
            for rec in sub_log:
                rec["rule-scope"] = label
                log.append(rec)
        per_rule[label] = out.status
        outcomes.append(out)
    if all(o.status == PROVED for o in outcomes):
        status = PROVED
    elif any(o.status == FAILED for o in outcomes):
        status = FAILED
    else:
        status = UNKNOWN
    residuals = [r for o in outcomes for r in o.residuals]
    agg = ProveOutcome(status, outcomes[-1].state if outcomes else None, residuals, per_rule)
    return agg
