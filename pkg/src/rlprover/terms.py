"""Order-sorted terms, signatures and substitutions.

Terms are immutable and kept in a canonical form chosen so that equality
modulo the supported structural axioms (commutativity, associativity+
commutativity, and AC plus identity) is plain structural equality:

  * arguments of an assoc operator are flattened (no nested occurrence of
    the same operator directly below itself),
  * identity elements are removed eagerly,
  * arguments of a comm operator are sorted by a fixed total term order.

All term construction goes through ``Signature.app`` which enforces this.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .errors import AmbiguousSort, IllTyped, InvalidPosition, SignatureError, UnsupportedAxioms

# axiom classes an operator may carry
FREE = "free"
COMM = "C"
AC = "AC"
ACU = "ACU"

# built-in polymorphic operators handled directly by the rewrite engine
BUILTIN_EQ = "_==_"
BUILTIN_NEQ = "_=/=_"
BUILTIN_OPS = (BUILTIN_EQ, BUILTIN_NEQ)
BOOL_SORT = "Bool"


@dataclass(frozen=True)
class Var:
    name: str
    sort: str

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=False)
class App:
    op: str
    args: tuple
    sort: str

    def __post_init__(self):
        # cached structural hash: children already carry theirs, so this is
        # O(width) at construction and O(1) ever after
        object.__setattr__(self, "_hash", hash((self.op, self.args, self.sort)))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, App):
            return False
        return (
            self._hash == other._hash
            and self.op == other.op
            and self.sort == other.sort
            and self.args == other.args
        )

    def __str__(self):
        from .printing import term_to_str

        return term_to_str(self)


# A Term is a Var or an App; constants are zero-argument Apps.
Term = object


def is_var(t) -> bool:
    return isinstance(t, Var)


@lru_cache(maxsize=None)
def term_key(t):
    """Total order key: variables before applications, then lexicographic."""
    if isinstance(t, Var):
        return (0, t.name, t.sort)
    return (1, t.op, len(t.args), tuple(term_key(a) for a in t.args))


def vars_of(t) -> frozenset:
    if isinstance(t, Var):
        return frozenset((t,))
    out = frozenset()
    for a in t.args:
        out |= vars_of(a)
    return out


def term_size(t) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(term_size(a) for a in t.args)


class SortGraph:
    """Partially ordered sorts plus their kinds (connected components)."""

    def __init__(self):
        self.sorts = set()
        self._direct = set()  # (lower, upper) pairs
        self._below = {}  # sort -> frozenset of sorts <= it, built on finalize
        self._kind = {}
        self._final = False

    def add_sort(self, s):
        self.sorts.add(s)
        self._final = False

    def add_subsort(self, lo, hi):
        self.sorts.add(lo)
        self.sorts.add(hi)
        self._direct.add((lo, hi))
        self._final = False

    def finalize(self):
        up = {s: {s} for s in self.sorts}
        changed = True
        while changed:
            changed = False
            for lo, hi in self._direct:
                new = up[hi] - up[lo]
                if new:
                    up[lo] |= new
                    changed = True
        for s in self.sorts:
            for t in up[s]:
                if t != s and s in up[t]:
                    raise SignatureError(f"subsort cycle through {s} and {t}")
        below = {s: set() for s in self.sorts}
        for s in self.sorts:
            for t in up[s]:
                below[t].add(s)
        self._below = {s: frozenset(b) for s, b in below.items()}
        # kinds: connected components of the comparability graph
        parent = {s: s for s in self.sorts}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for lo, hi in self._direct:
            parent[find(lo)] = find(hi)
        comps = {}
        for s in self.sorts:
            comps.setdefault(find(s), set()).add(s)
        self._kind = {}
        for members in comps.values():
            k = frozenset(members)
            for s in members:
                self._kind[s] = k
        self._final = True

    def _ensure(self):
        if not self._final:
            self.finalize()

    def leq(self, a, b) -> bool:
        self._ensure()
        if a not in self.sorts or b not in self.sorts:
            raise SignatureError(f"unknown sort {a if a not in self.sorts else b}")
        return a in self._below[b]

    def kind(self, s):
        self._ensure()
        return self._kind[s]

    def same_kind(self, a, b) -> bool:
        return self.kind(a) is self.kind(b) or self.kind(a) == self.kind(b)

    def glbs(self, a, b):
        """Maximal common lower bounds of two sorts."""
        self._ensure()
        common = self._below[a] & self._below[b]
        return [s for s in common if not any(s != t and self.leq(s, t) for t in common)]

    def min_sorts(self, sorts):
        """Minimal elements of a set of sorts (for preregularity checks)."""
        ss = set(sorts)
        return [s for s in ss if not any(t != s and self.leq(t, s) for t in ss)]


@dataclass(frozen=True)
class OpDecl:
    name: str
    typings: tuple  # ((argsorts...), result) pairs
    attributes: frozenset = frozenset()
    identity: str | None = None  # name of the identity constant
    is_constructor: bool = False

    @property
    def axiom_class(self):
        a = "assoc" in self.attributes
        c = "comm" in self.attributes
        u = self.identity is not None
        if a and c and u:
            return ACU
        if a and c:
            return AC
        if c and not a and not u:
            return COMM
        if not a and not c and not u:
            return FREE
        raise UnsupportedAxioms(
            f"operator {self.name}: unsupported axiom combination "
            f"(supported: none, comm, assoc comm, assoc comm id)"
        )


class Signature:
    """Operator declarations over a sort graph, with canonical term construction."""

    def __init__(self, sort_graph: SortGraph | None = None):
        self.sort_graph = sort_graph or SortGraph()
        self._decls: dict[str, list[OpDecl]] = {}

    def add_op(self, decl: OpDecl):
        self._decls.setdefault(decl.name, []).append(decl)

    def decls(self, name):
        return self._decls.get(name, [])

    def has_op(self, name):
        return name in self._decls or name in BUILTIN_OPS

    def all_decls(self):
        for ds in self._decls.values():
            yield from ds

    def constants_of_sort(self, sort, ctor_only=True):
        out = []
        for d in self.all_decls():
            if ctor_only and not d.is_constructor:
                continue
            for argsorts, res in d.typings:
                if not argsorts and self.sort_graph.leq(res, sort):
                    out.append(self.constant(d.name))
        return out

    def constructors_of_sort(self, sort):
        """(decl, argsorts, result) triples for constructors producing <= sort."""
        out = []
        for d in self.all_decls():
            if not d.is_constructor:
                continue
            for argsorts, res in d.typings:
                if self.sort_graph.leq(res, sort):
                    out.append((d, argsorts, res))
        return out

    # -- axiom / identity lookup -------------------------------------------------

    def decl_for(self, name, nargs, argsorts=None):
        cands = self._decls.get(name, [])
        if not cands:
            raise IllTyped(f"unknown operator {name}")
        matching = []
        for d in cands:
            for typing_args, res in d.typings:
                if len(typing_args) == nargs or (
                    "assoc" in d.attributes and len(typing_args) == 2 and nargs >= 2
                ):
                    if argsorts is None or all(
                        self.sort_graph.leq(a, w)
                        for a, w in zip(argsorts, typing_args * nargs)
                    ):
                        matching.append(d)
                        break
        if not matching:
            raise IllTyped(f"no typing of {name} accepts {nargs} argument(s)")
        return matching[0]

    def axiom_class_of(self, name, example_arg_sort=None):
        if name in BUILTIN_OPS:
            return FREE
        ds = self._decls.get(name)
        if not ds:
            return FREE
        if len(ds) == 1 or example_arg_sort is None:
            return ds[0].axiom_class
        for d in ds:
            for argsorts, _res in d.typings:
                if argsorts and self.sort_graph.same_kind(argsorts[0], example_arg_sort):
                    return d.axiom_class
        return ds[0].axiom_class

    def identity_term(self, name, example_arg_sort=None):
        ds = self._decls.get(name, [])
        for d in ds:
            if d.identity is not None:
                if example_arg_sort is None or any(
                    argsorts and self.sort_graph.same_kind(argsorts[0], example_arg_sort)
                    for argsorts, _ in d.typings
                ):
                    return self.constant(d.identity)
        return None

    # -- term construction -------------------------------------------------------

    def constant(self, name):
        return self.app(name, ())

    def app(self, name, args):
        """Build a canonical application, flattening and sorting as required."""
        args = tuple(args)
        if name in BUILTIN_OPS:
            if len(args) != 2:
                raise IllTyped(f"{name} takes two arguments")
            if not self.sort_graph.same_kind(self._sort_of(args[0]), self._sort_of(args[1])):
                raise IllTyped(f"{name} arguments must share a kind")
            return App(name, args, BOOL_SORT)
        ds = self._decls.get(name)
        if not ds:
            raise IllTyped(f"unknown operator {name}")
        argsorts = [self._sort_of(a) for a in args]
        decl = self._pick_decl(name, ds, argsorts)
        ax = decl.axiom_class
        if ax in (AC, ACU) and len(args) >= 2:
            flat = []
            for a in args:
                if isinstance(a, App) and a.op == name:
                    flat.extend(a.args)
                else:
                    flat.append(a)
            if ax == ACU:
                ident = self.constant(decl.identity)
                flat = [a for a in flat if a != ident]
                if not flat:
                    return ident
                if len(flat) == 1:
                    return flat[0]
            args = tuple(sorted(flat, key=term_key))
            argsorts = [self._sort_of(a) for a in args]
        elif ax == COMM and len(args) == 2:
            args = tuple(sorted(args, key=term_key))
            argsorts = [self._sort_of(a) for a in args]
        sort = self._least_result(name, ds, args, argsorts)
        return App(name, args, sort)

    def _pick_decl(self, name, ds, argsorts):
        for d in ds:
            for typ_args, _res in d.typings:
                n = len(typ_args)
                if "assoc" in d.attributes and n == 2 and len(argsorts) >= 2:
                    w = typ_args[0]
                    if all(self.sort_graph.same_kind(a, w) for a in argsorts):
                        return d
                elif n == len(argsorts):
                    if all(
                        self.sort_graph.same_kind(a, w) for a, w in zip(argsorts, typ_args)
                    ):
                        return d
        # fall back to arity match only; _least_result reports IllTyped properly
        for d in ds:
            for typ_args, _res in d.typings:
                if len(typ_args) == len(argsorts) or (
                    "assoc" in d.attributes and len(typ_args) == 2 and len(argsorts) >= 2
                ):
                    return d
        raise IllTyped(f"no typing of {name} fits arity {len(argsorts)}")

    def _least_result(self, name, ds, args, argsorts):
        results = []
        for d in ds:
            for typ_args, res in d.typings:
                if "assoc" in d.attributes and len(typ_args) == 2 and len(args) >= 2:
                    if all(self.sort_graph.leq(a, typ_args[0]) for a in argsorts):
                        results.append(res)
                elif len(typ_args) == len(args):
                    if all(self.sort_graph.leq(a, w) for a, w in zip(argsorts, typ_args)):
                        results.append(res)
        if not results:
            raise IllTyped(
                f"ill-typed application of {name} to argument sorts {argsorts}"
            )
        mins = self.sort_graph.min_sorts(results)
        if len(mins) > 1:
            raise AmbiguousSort(
                f"application of {name} has incomparable minimal sorts {sorted(mins)}"
            )
        return mins[0]

    def _sort_of(self, t):
        if isinstance(t, Var):
            return t.sort
        return t.sort

    def least_sort(self, t):
        """Recompute the least sort of a term (the cached sort must agree)."""
        if isinstance(t, Var):
            return t.sort
        if t.op in BUILTIN_OPS:
            return BOOL_SORT
        ds = self._decls.get(t.op)
        if not ds:
            raise IllTyped(f"unknown operator {t.op}")
        argsorts = [self.least_sort(a) for a in t.args]
        return self._least_result(t.op, ds, t.args, argsorts)

    def remake(self, t):
        """Rebuild a term bottom-up through app(), re-canonicalizing it."""
        if isinstance(t, Var):
            return t
        return self.app(t.op, tuple(self.remake(a) for a in t.args))

    def is_constructor_term(self, t) -> bool:
        if isinstance(t, Var):
            return True
        if t.op in BUILTIN_OPS:
            return False
        ds = self._decls.get(t.op, [])
        if not any(d.is_constructor for d in ds):
            return False
        return all(self.is_constructor_term(a) for a in t.args)

    def is_ground(self, t) -> bool:
        return not vars_of(t)

    # -- validation ----------------------------------------------------------------

    def validate(self):
        """Well-formedness findings: empty list means the signature is clean."""
        findings = []
        self.sort_graph._ensure()
        for name, ds in self._decls.items():
            for d in ds:
                try:
                    ax = d.axiom_class
                except UnsupportedAxioms as e:
                    findings.append(str(e))
                    continue
                for argsorts, res in d.typings:
                    for s in list(argsorts) + [res]:
                        if s not in self.sort_graph.sorts:
                            findings.append(f"operator {name}: unknown sort {s}")
                if ax in (AC, ACU):
                    for argsorts, res in d.typings:
                        if len(argsorts) != 2:
                            findings.append(f"assoc operator {name} must be binary")
                        elif not (
                            self.sort_graph.same_kind(argsorts[0], argsorts[1])
                            and self.sort_graph.same_kind(argsorts[0], res)
                        ):
                            findings.append(
                                f"assoc operator {name}: arguments and result in different kinds"
                            )
                if d.identity is not None:
                    try:
                        ident = self.constant(d.identity)
                        arg = d.typings[0][0][0]
                        if not self.sort_graph.leq(ident.sort, arg):
                            findings.append(
                                f"operator {name}: identity {d.identity} has sort "
                                f"{ident.sort} not below argument sort {arg}"
                            )
                    except IllTyped:
                        findings.append(f"operator {name}: identity {d.identity} undeclared")
        findings.extend(self._preregularity_findings())
        return findings

    def _preregularity_findings(self):
        findings = []
        for name, ds in self._decls.items():
            by_arity = {}
            for d in ds:
                for argsorts, res in d.typings:
                    by_arity.setdefault(len(argsorts), []).append((argsorts, res))
            for arity, typs in by_arity.items():
                if len(typs) < 2 or arity == 0:
                    continue
                universe = []
                for pos in range(arity):
                    sorts = set()
                    for argsorts, _ in typs:
                        sorts |= self.sort_graph._below[argsorts[pos]]
                    universe.append(sorted(sorts))
                total = 1
                for u in universe:
                    total *= len(u)
                if total > 20000:
                    continue  # bail out on pathological products
                from itertools import product

                for combo in product(*universe):
                    results = [
                        res
                        for argsorts, res in typs
                        if all(self.sort_graph.leq(a, w) for a, w in zip(combo, argsorts))
                    ]
                    if len(results) > 1 and len(self.sort_graph.min_sorts(results)) > 1:
                        findings.append(
                            f"operator {name} is not preregular on argument sorts {combo}"
                        )
                        break
        return findings


# -- substitutions -------------------------------------------------------------------


class Subst:
    """A sort-preserving finite map from variables to terms."""

    __slots__ = ("mapping", "_key")

    def __init__(self, mapping=None):
        m = dict(mapping or {})
        self.mapping = {x: t for x, t in m.items() if x != t}
        self._key = None

    def get(self, x, default=None):
        return self.mapping.get(x, default if default is not None else x)

    def domain(self):
        return set(self.mapping)

    def items(self):
        return self.mapping.items()

    def __len__(self):
        return len(self.mapping)

    def __eq__(self, other):
        return isinstance(other, Subst) and self.mapping == other.mapping

    def __hash__(self):
        if self._key is None:
            self._key = hash(tuple(sorted(self.mapping.items(), key=lambda kv: term_key(kv[0]))))
        return self._key

    def apply(self, sig: Signature, t):
        if isinstance(t, Var):
            return self.mapping.get(t, t)
        if not self.mapping:
            return t
        return sig.app(t.op, tuple(self.apply(sig, a) for a in t.args))

    def compose(self, sig: Signature, inner: "Subst") -> "Subst":
        """Return sigma such that sigma(t) == self(inner(t))."""
        m = {x: self.apply(sig, t) for x, t in inner.mapping.items()}
        for x, t in self.mapping.items():
            if x not in m:
                m[x] = t
        return Subst(m)

    def restrict(self, variables) -> "Subst":
        vs = set(variables)
        return Subst({x: t for x, t in self.mapping.items() if x in vs})

    def is_variable_renaming(self) -> bool:
        vals = list(self.mapping.values())
        return all(isinstance(v, Var) for v in vals) and len(set(vals)) == len(vals)

    def sort_preserving(self, sig: Signature) -> bool:
        return all(
            sig.sort_graph.leq(sig.least_sort(t), x.sort) for x, t in self.mapping.items()
        )

    def __str__(self):
        from .printing import term_to_str

        if not self.mapping:
            return "{}"
        parts = sorted(
            (f"{x.name} <- {term_to_str(t)}" for x, t in self.mapping.items())
        )
        return "{" + ", ".join(parts) + "}"


EMPTY_SUBST = Subst()


# -- positions -----------------------------------------------------------------------


def subterm_at(t, pos):
    """Subterm at a position given as a sequence of 1-based child indices."""
    cur = t
    for i in pos:
        if isinstance(cur, Var) or not (1 <= i <= len(cur.args)):
            raise InvalidPosition(f"position {list(pos)} invalid in term")
        cur = cur.args[i - 1]
    return cur

def replace_at(sig, t, pos, u):
    if not pos:
        return u
    if isinstance(t, Var) or not (1 <= pos[0] <= len(t.args)):
        raise InvalidPosition(f"position {list(pos)} invalid in term")
    i = pos[0] - 1
    new_args = list(t.args)
    new_args[i] = replace_at(sig, t.args[i], pos[1:], u)
    return sig.app(t.op, tuple(new_args))


def positions(t, prefix=()):
    yield prefix
    if isinstance(t, App):
        for i, a in enumerate(t.args, start=1):
            yield from positions(a, prefix + (i,))


# -- fresh variable generation ---------------------------------------------------------


class FreshGen:
    """Fresh variables named base#n, avoiding a growing set of taken names."""

    def __init__(self, avoid=()):
        self._taken = {v.name for v in avoid}
        self._counters = {}

    def reserve(self, variables):
        self._taken |= {v.name for v in variables}

    def fresh(self, base, sort):
        root = base.split("#", 1)[0]
        n = self._counters.get(root, 0)
        while True:
            n += 1
            name = f"{root}#{n}"
            if name not in self._taken:
                break
        self._counters[root] = n
        self._taken.add(name)
        return Var(name, sort)


def rename_apart(sig, t, avoid, fresh: FreshGen | None = None):
    """Rename t's variables away from `avoid`; returns (term, renaming)."""
    fresh = fresh or FreshGen(avoid)
    fresh.reserve(vars_of(t))
    avoid_names = {v.name for v in avoid}
    mapping = {}
    for v in sorted(vars_of(t), key=term_key):
        if v.name in avoid_names:
            mapping[v] = fresh.fresh(v.name, v.sort)
    ren = Subst(mapping)
    return ren.apply(sig, t), ren
