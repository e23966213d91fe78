"""Ground first-order logic for guard evaluation and claim refutation.

Formulas range over finite declared domains with integer and symbolic
terms, so everything here is decidable by construction: quantifiers
expand over finite member lists, predicate definitions are stratified
and non-recursive, and refutation reduces to propositional reasoning
over a bounded universe of ground atoms.

Two evaluation regimes coexist on purpose.  Closed guards are evaluated
against a concrete chain state with closed-world negation (an atom not
asserted is false).  Claims endorsed by an authority are instead tested
for *discord*: a claim is accepted unless the current claim store
refutes it, and no closed-world assumption is applied inside that
refutation.  The refutation engine emits a step-by-step resolution
trace so a conflict can be re-checked without trusting the search.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field


class LogicError(Exception):
    pass


class UnknownSymbol(LogicError):
    """A predicate, function, domain or wallet that was never declared."""


class NonGround(LogicError):
    """A free variable survived to evaluation."""


class StratificationViolation(LogicError):
    """A predicate or function definition depends on itself."""


class TypeMismatch(LogicError):
    """Ill-typed term operation, e.g. ordering two symbols."""


class NotClosed(LogicError):
    """An authority-endorsed claim reached the closed-guard evaluator."""


class ResourceLimit(LogicError):
    """Atom universe or clause budget exceeded during refutation."""


class NotInConflict(LogicError):
    """Conflict minimization was asked for a claim that is not refuted."""


Value = str | int

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


# ---------------------------------------------------------------------------
# Terms


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Constant(Term):
    value: str


@dataclass(frozen=True)
class IntLit(Term):
    value: int


@dataclass(frozen=True)
class AgentRef(Term):
    agent: str


@dataclass(frozen=True)
class BalanceOf(Term):
    wallet: str


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class FnApp(Term):
    name: str
    args: tuple[Term, ...]


# ---------------------------------------------------------------------------
# Formulas


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class Cmp(Formula):
    op: str  # "=", "!=", "<", "<=", ">", ">="
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Or(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class ForAll(Formula):
    var: str
    domain: str
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    domain: str
    body: Formula


@dataclass(frozen=True)
class Says(Formula):
    """Authority endorsement used in accountability bookkeeping.

    Says-formulas never appear in guard or claim bodies written by
    users; they are produced internally when a transfer is rendered as
    an accountability implication.  The refutation engine treats a whole
    Says node as one opaque atom.
    """

    authority: str
    body: Formula


TRUE = TrueF()
FALSE = FalseF()

CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Claim:
    """A formula endorsed by an accountable authority."""

    authority: str
    body: Formula
    origin: str = "submitted"


# ---------------------------------------------------------------------------
# Canonical text rendering (one syntax shared by parser, hashes, atom keys)


def term_text(t: Term) -> str:
    if isinstance(t, Constant):
        if _IDENT.match(t.value):
            return t.value
        escaped = t.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(t, IntLit):
        return str(t.value)
    if isinstance(t, AgentRef):
        return t.agent
    if isinstance(t, BalanceOf):
        return f"|{t.wallet}|"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, FnApp):
        inner = ", ".join(term_text(a) for a in t.args)
        return f"{t.name}({inner})"
    raise TypeError(f"not a term: {t!r}")


def formula_text(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Atom):
        if not f.args:
            return f.name
        inner = ", ".join(term_text(a) for a in f.args)
        return f"{f.name}({inner})"
    if isinstance(f, Cmp):
        return f"({term_text(f.lhs)} {f.op} {term_text(f.rhs)})"
    if isinstance(f, Not):
        return "!" + formula_text(f.sub)
    if isinstance(f, And):
        return f"({formula_text(f.lhs)} & {formula_text(f.rhs)})"
    if isinstance(f, Or):
        return f"({formula_text(f.lhs)} | {formula_text(f.rhs)})"
    if isinstance(f, Implies):
        return f"({formula_text(f.lhs)} -> {formula_text(f.rhs)})"
    if isinstance(f, ForAll):
        return f"(forall {f.var} in {f.domain} . {formula_text(f.body)})"
    if isinstance(f, Exists):
        return f"(exists {f.var} in {f.domain} . {formula_text(f.body)})"
    if isinstance(f, Says):
        return f"(claim {f.authority}: {formula_text(f.body)})"
    raise TypeError(f"not a formula: {f!r}")


def claim_text(c: Claim) -> str:
    return f"claim {c.authority}: {formula_text(c.body)}"


# ---------------------------------------------------------------------------
# Declarations


@dataclass
class FunctionDef:
    """One of three function flavours.

    parametric   params + body term, unfolded on use (e.g. identity)
    table        finite map from ground argument tuples to values
    uninterpreted declared arity only; usable inside claims, where it
                  stays symbolic, but not inside closed guards
    """

    name: str
    arity: int
    params: tuple[str, ...] | None = None
    body: Term | None = None
    table: dict[tuple[Value, ...], Value] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        if self.body is not None:
            return "parametric"
        if self.table:
            return "table"
        return "uninterpreted"


@dataclass
class PredicateDef:
    name: str
    params: tuple[str, ...]
    body: Formula


@dataclass
class DefinitionSet:
    """Domains, defined symbols and integrity constraints of a scenario."""

    domains: dict[str, tuple[Value, ...]] = field(default_factory=dict)
    functions: dict[str, FunctionDef] = field(default_factory=dict)
    predicates: dict[str, PredicateDef] = field(default_factory=dict)
    atoms: dict[str, int] = field(default_factory=dict)  # open atoms: name -> arity
    constraints: tuple[Formula, ...] = ()

    def domain_members(self, name: str) -> tuple[Value, ...]:
        try:
            return self.domains[name]
        except KeyError:
            raise UnknownSymbol(f"domain {name!r} is not declared") from None

    def atom_arity(self, name: str) -> int | None:
        if name in self.atoms:
            return self.atoms[name]
        if name in RESERVED_ATOMS:
            return RESERVED_ATOMS[name]
        return None


# Builtins.  hashlock/before are rigid-but-special predicates; the three
# arithmetic helpers keep amounts integer-only.
BUILTIN_FUNCTIONS = {"add": 2, "sub": 2, "mul": 2}
BUILTIN_PREDICATES = {"hashlock": 2, "before": 1}
# Bookkeeping atoms asserted by the chain itself.
RESERVED_ATOMS = {"updates": 3, "published": 1, "valid": 1}


@dataclass
class Model:
    """Concrete chain state a closed guard is evaluated against."""

    balances: dict[str, int] = field(default_factory=dict)
    asserted: set[tuple[str, tuple[Value, ...]]] = field(default_factory=set)
    clock: int = 0


def _wrap(v: Value) -> Term:
    return IntLit(v) if isinstance(v, int) else Constant(v)


def _value_of(t: Term) -> Value | None:
    if isinstance(t, (Constant, IntLit)):
        return t.value
    if isinstance(t, AgentRef):
        return t.agent
    return None


def _decide_cmp(op: str, a: Value, b: Value) -> bool:
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if not (isinstance(a, int) and isinstance(b, int)):
        raise TypeMismatch(f"ordering needs integers, got {a!r} {op} {b!r}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise LogicError(f"unknown comparison {op!r}")


def _hashlock(digest: Value, preimage: Value) -> bool:
    if not (isinstance(digest, str) and isinstance(preimage, str)):
        raise TypeMismatch("hashlock expects a hex digest and a string preimage")
    return hashlib.sha256(preimage.encode("utf-8")).hexdigest() == digest.lower()


def _arith(name: str, a: Value, b: Value) -> int:
    if not (isinstance(a, int) and isinstance(b, int)):
        raise TypeMismatch(f"{name} expects integers, got {a!r}, {b!r}")
    if name == "add":
        return a + b
    if name == "sub":
        return a - b
    return a * b


# ---------------------------------------------------------------------------
# Closed-world evaluation against a model


def evaluate(f: Formula, m: Model, defs: DefinitionSet) -> bool:
    """Truth of ``f`` in model ``m`` under closed-world negation."""
    return _eval(f, m, defs, {}, ())


def _eval(f, m, defs, env, stack) -> bool:
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Atom):
        name = f.name
        if name == "hashlock":
            _check_arity(name, f.args, 2)
            a, b = (_eval_term(t, m, defs, env, stack) for t in f.args)
            return _hashlock(a, b)
        if name == "before":
            _check_arity(name, f.args, 1)
            t = _eval_term(f.args[0], m, defs, env, stack)
            if not isinstance(t, int):
                raise TypeMismatch("before expects an integer tick")
            return m.clock <= t
        if name in defs.predicates:
            if name in stack:
                raise StratificationViolation(f"predicate {name!r} depends on itself")
            pd = defs.predicates[name]
            _check_arity(name, f.args, len(pd.params))
            inner = {
                p: _wrap(_eval_term(a, m, defs, env, stack))
                for p, a in zip(pd.params, f.args)
            }
            return _eval(pd.body, m, defs, inner, stack + (name,))
        arity = defs.atom_arity(name)
        if arity is None:
            raise UnknownSymbol(f"atom {name!r} is not declared")
        _check_arity(name, f.args, arity)
        key = (name, tuple(_eval_term(a, m, defs, env, stack) for a in f.args))
        return key in m.asserted
    if isinstance(f, Cmp):
        a = _eval_term(f.lhs, m, defs, env, stack)
        b = _eval_term(f.rhs, m, defs, env, stack)
        return _decide_cmp(f.op, a, b)
    if isinstance(f, Not):
        return not _eval(f.sub, m, defs, env, stack)
    if isinstance(f, And):
        return _eval(f.lhs, m, defs, env, stack) and _eval(f.rhs, m, defs, env, stack)
    if isinstance(f, Or):
        return _eval(f.lhs, m, defs, env, stack) or _eval(f.rhs, m, defs, env, stack)
    if isinstance(f, Implies):
        return (not _eval(f.lhs, m, defs, env, stack)) or _eval(f.rhs, m, defs, env, stack)
    if isinstance(f, ForAll):
        members = defs.domain_members(f.domain)
        return all(_eval(f.body, m, defs, {**env, f.var: _wrap(v)}, stack) for v in members)
    if isinstance(f, Exists):
        members = defs.domain_members(f.domain)
        return any(_eval(f.body, m, defs, {**env, f.var: _wrap(v)}, stack) for v in members)
    if isinstance(f, Says):
        raise NotClosed("an endorsed claim has no closed-guard truth value")
    raise TypeError(f"not a formula: {f!r}")


def _check_arity(name, args, arity):
    if len(args) != arity:
        raise TypeMismatch(f"{name} expects {arity} argument(s), got {len(args)}")


def _eval_term(t, m, defs, env, stack) -> Value:
    if isinstance(t, (Constant, IntLit)):
        return t.value
    if isinstance(t, AgentRef):
        return t.agent
    if isinstance(t, BalanceOf):
        try:
            return m.balances[t.wallet]
        except KeyError:
            raise UnknownSymbol(f"no wallet {t.wallet!r} in model") from None
    if isinstance(t, Var):
        if t.name not in env:
            raise NonGround(f"free variable {t.name!r}")
        return _eval_term(env[t.name], m, defs, env, stack)
    if isinstance(t, FnApp):
        name = t.name
        if name in BUILTIN_FUNCTIONS:
            _check_arity(name, t.args, 2)
            a, b = (_eval_term(x, m, defs, env, stack) for x in t.args)
            return _arith(name, a, b)
        fd = defs.functions.get(name)
        if fd is None:
            raise UnknownSymbol(f"function {name!r} is not declared")
        _check_arity(name, t.args, fd.arity)
        vals = tuple(_eval_term(x, m, defs, env, stack) for x in t.args)
        if fd.kind == "table":
            try:
                return fd.table[vals]
            except KeyError:
                raise UnknownSymbol(f"{name}{vals!r} has no table entry") from None
        if fd.kind == "parametric":
            if name in stack:
                raise StratificationViolation(f"function {name!r} depends on itself")
            inner = {p: _wrap(v) for p, v in zip(fd.params, vals)}
            return _eval_term(fd.body, m, defs, inner, stack + (name,))
        raise UnknownSymbol(f"function {name!r} has no interpretation here")
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Ground expansion (quantifier and definition elimination)


def ground_expand(f: Formula, defs: DefinitionSet) -> Formula:
    """Rewrite ``f`` into an equivalent quantifier- and definition-free form.

    Finite quantifiers become conjunction/disjunction chains, defined
    predicates and parametric functions are unfolded, rigid subterms
    are folded to values.  What remains are boolean connectives over
    *residual* atoms: open atoms, comparisons that mention balances or
    uninterpreted functions, ``before``-atoms and opaque Says nodes.
    """
    return _expand(f, defs, {}, ())


def _mk_not(f):
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    return Not(f)


def _mk_and(a, b):
    if isinstance(a, FalseF) or isinstance(b, FalseF):
        return FALSE
    if isinstance(a, TrueF):
        return b
    if isinstance(b, TrueF):
        return a
    return And(a, b)


def _mk_or(a, b):
    if isinstance(a, TrueF) or isinstance(b, TrueF):
        return TRUE
    if isinstance(a, FalseF):
        return b
    if isinstance(b, FalseF):
        return a
    return Or(a, b)


def _mk_implies(a, b):
    if isinstance(a, FalseF) or isinstance(b, TrueF):
        return TRUE
    if isinstance(a, TrueF):
        return b
    if isinstance(b, FalseF):
        return _mk_not(a)
    return Implies(a, b)


def _expand(f, defs, env, stack) -> Formula:
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Atom):
        name = f.name
        args = tuple(_norm_term(a, defs, env, stack) for a in f.args)
        if name == "hashlock":
            _check_arity(name, args, 2)
            va, vb = _value_of(args[0]), _value_of(args[1])
            if va is not None and vb is not None:
                return TRUE if _hashlock(va, vb) else FALSE
            return Atom(name, args)
        if name == "before":
            _check_arity(name, args, 1)
            return Atom(name, args)
        if name in defs.predicates:
            if name in stack:
                raise StratificationViolation(f"predicate {name!r} depends on itself")
            pd = defs.predicates[name]
            _check_arity(name, args, len(pd.params))
            inner = dict(zip(pd.params, args))
            return _expand(pd.body, defs, inner, stack + (name,))
        arity = defs.atom_arity(name)
        if arity is None:
            raise UnknownSymbol(f"atom {name!r} is not declared")
        _check_arity(name, args, arity)
        return Atom(name, args)
    if isinstance(f, Cmp):
        a = _norm_term(f.lhs, defs, env, stack)
        b = _norm_term(f.rhs, defs, env, stack)
        va, vb = _value_of(a), _value_of(b)
        if va is not None and vb is not None:
            return TRUE if _decide_cmp(f.op, va, vb) else FALSE
        return Cmp(f.op, a, b)
    if isinstance(f, Not):
        return _mk_not(_expand(f.sub, defs, env, stack))
    if isinstance(f, And):
        return _mk_and(_expand(f.lhs, defs, env, stack), _expand(f.rhs, defs, env, stack))
    if isinstance(f, Or):
        return _mk_or(_expand(f.lhs, defs, env, stack), _expand(f.rhs, defs, env, stack))
    if isinstance(f, Implies):
        return _mk_implies(_expand(f.lhs, defs, env, stack), _expand(f.rhs, defs, env, stack))
    if isinstance(f, (ForAll, Exists)):
        members = defs.domain_members(f.domain)
        parts = [
            _expand(f.body, defs, {**env, f.var: _wrap(v)}, stack) for v in members
        ]
        if isinstance(f, ForAll):
            out: Formula = TRUE
            for p in parts:
                out = _mk_and(out, p)
        else:
            out = FALSE
            for p in parts:
                out = _mk_or(out, p)
        return out
    if isinstance(f, Says):
        return Says(f.authority, _expand(f.body, defs, env, stack))
    raise TypeError(f"not a formula: {f!r}")


def _norm_term(t, defs, env, stack) -> Term:
    if isinstance(t, (Constant, IntLit, AgentRef, BalanceOf)):
        return t
    if isinstance(t, Var):
        if t.name not in env:
            raise NonGround(f"free variable {t.name!r}")
        return env[t.name]
    if isinstance(t, FnApp):
        name = t.name
        args = tuple(_norm_term(a, defs, env, stack) for a in t.args)
        vals = [_value_of(a) for a in args]
        if name in BUILTIN_FUNCTIONS:
            _check_arity(name, args, 2)
            if all(v is not None for v in vals):
                return IntLit(_arith(name, vals[0], vals[1]))
            return FnApp(name, args)
        fd = defs.functions.get(name)
        if fd is None:
            raise UnknownSymbol(f"function {name!r} is not declared")
        _check_arity(name, args, fd.arity)
        if fd.kind == "table":
            if all(v is not None for v in vals):
                key = tuple(vals)
                if key not in fd.table:
                    raise UnknownSymbol(f"{name}{key!r} has no table entry")
                return _wrap(fd.table[key])
            return FnApp(name, args)
        if fd.kind == "parametric":
            if name in stack:
                raise StratificationViolation(f"function {name!r} depends on itself")
            inner = dict(zip(fd.params, args))
            return _norm_term(fd.body, defs, inner, stack + (name,))
        return FnApp(name, args)  # uninterpreted: stays symbolic
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Residual formulas as propositional structures


def atom_key(f: Formula) -> str:
    """Canonical identity of one residual atomic formula."""
    return formula_text(f)


def residual_atoms(f: Formula) -> list[str]:
    """Ordered unique atom keys of a residual (expanded) formula."""
    seen: dict[str, None] = {}

    def walk(g):
        if isinstance(g, (TrueF, FalseF)):
            return
        if isinstance(g, (Atom, Cmp, Says)):
            seen.setdefault(atom_key(g))
            return
        if isinstance(g, Not):
            walk(g.sub)
            return
        if isinstance(g, (And, Or, Implies)):
            walk(g.lhs)
            walk(g.rhs)
            return
        raise LogicError(f"not residual: {formula_text(g)}")

    walk(f)
    return list(seen)


def eval_residual(f: Formula, assignment: dict[str, bool]) -> bool:
    """Truth of a residual formula under an explicit atom assignment."""
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, (Atom, Cmp, Says)):
        key = atom_key(f)
        if key not in assignment:
            raise LogicError(f"assignment is missing atom {key}")
        return assignment[key]
    if isinstance(f, Not):
        return not eval_residual(f.sub, assignment)
    if isinstance(f, And):
        return eval_residual(f.lhs, assignment) and eval_residual(f.rhs, assignment)
    if isinstance(f, Or):
        return eval_residual(f.lhs, assignment) or eval_residual(f.rhs, assignment)
    if isinstance(f, Implies):
        return (not eval_residual(f.lhs, assignment)) or eval_residual(f.rhs, assignment)
    raise LogicError(f"not residual: {formula_text(f)}")


def brute_force_satisfiable(
    formulas: list[Formula], defs: DefinitionSet, *, max_atoms: int = 22
) -> dict[str, bool] | None:
    """Exhaustive truth-assignment search; returns a model or None.

    Deliberately naive — this is the independent oracle that the
    resolution engine is checked against, and the workhorse behind
    certificate minimality auditing.
    """
    trees = [ground_expand(f, defs) for f in formulas]
    keys: dict[str, None] = {}
    for t in trees:
        for k in residual_atoms(t):
            keys.setdefault(k)
    names = list(keys)
    if len(names) > max_atoms:
        raise ResourceLimit(f"{len(names)} atoms exceeds enumeration limit {max_atoms}")
    for bits in range(1 << len(names)):
        asg = {names[i]: bool(bits >> i & 1) for i in range(len(names))}
        if all(eval_residual(t, asg) for t in trees):
            return asg
    return None


# ---------------------------------------------------------------------------
# Clausification


class _AtomTable:
    def __init__(self):
        self.index: dict[str, int] = {}
        self.names: list[str] = []

    def id_of(self, f: Formula) -> int:
        key = atom_key(f)
        got = self.index.get(key)
        if got is None:
            got = len(self.names)
            self.index[key] = got
            self.names.append(key)
        return got

    def __len__(self):
        return len(self.names)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, TrueF):
        return FALSE if neg else TRUE
    if isinstance(f, FalseF):
        return TRUE if neg else FALSE
    if isinstance(f, (Atom, Cmp, Says)):
        return Not(f) if neg else f
    if isinstance(f, Not):
        return _nnf(f.sub, not neg)
    if isinstance(f, And):
        if neg:
            return Or(_nnf(f.lhs, True), _nnf(f.rhs, True))
        return And(_nnf(f.lhs, False), _nnf(f.rhs, False))
    if isinstance(f, Or):
        if neg:
            return And(_nnf(f.lhs, True), _nnf(f.rhs, True))
        return Or(_nnf(f.lhs, False), _nnf(f.rhs, False))
    if isinstance(f, Implies):
        if neg:
            return And(_nnf(f.lhs, False), _nnf(f.rhs, True))
        return Or(_nnf(f.lhs, True), _nnf(f.rhs, False))
    raise LogicError(f"not residual: {formula_text(f)}")


def _clauses(f: Formula, table: _AtomTable, budget: int) -> list[frozenset[int]]:
    """Plain distributive CNF of an NNF residual formula."""
    if isinstance(f, TrueF):
        return []
    if isinstance(f, FalseF):
        return [frozenset()]
    if isinstance(f, (Atom, Cmp, Says)):
        return [frozenset({table.id_of(f) + 1})]
    if isinstance(f, Not):
        return [frozenset({-(table.id_of(f.sub) + 1)})]
    if isinstance(f, And):
        return _clauses(f.lhs, table, budget) + _clauses(f.rhs, table, budget)
    if isinstance(f, Or):
        left = _clauses(f.lhs, table, budget)
        right = _clauses(f.rhs, table, budget)
        if not left or not right:
            # one side is valid, so the disjunction is valid
            return []
        out = []
        for cl in left:
            for cr in right:
                out.append(cl | cr)
                if len(out) > budget:
                    raise ResourceLimit("clause budget exceeded in CNF")
        return out
    raise LogicError(f"unexpected connective in NNF: {formula_text(f)}")


def _is_tautology(clause: frozenset[int]) -> bool:
    return any(-lit in clause for lit in clause)


# ---------------------------------------------------------------------------
# Refutation with replayable traces


@dataclass(frozen=True)
class ProofStep:
    """One line of a ground resolution trace.

    rule "input":   ``source`` names where the clause came from —
                    ("claim", i) indexes used_claims, ("constraint", j)
                    indexes used_constraints, ("candidate",) is the
                    claim under test.
    rule "resolve": ``premises`` are indices of two earlier steps.
    ``clause`` is a sorted tuple of nonzero literals; atoms are 1-based
    indices into Refutation.atoms, negative for negated atoms.
    """

    rule: str
    clause: tuple[int, ...]
    source: tuple | None = None
    premises: tuple[int, int] | None = None


@dataclass(frozen=True)
class Refutation:
    """A replayable derivation of the empty clause.

    ``conclusion`` is the negation of the candidate claim's body: what
    the store plus constraints actually entail.
    """

    conclusion: Formula
    used_claims: tuple[Claim, ...]
    used_constraints: tuple[Formula, ...]
    atoms: tuple[str, ...]
    steps: tuple[ProofStep, ...]


def refute(
    claims,
    constraints,
    candidate: Claim,
    defs: DefinitionSet,
    *,
    max_atoms: int = 512,
    max_clauses: int = 100_000,
) -> Refutation | None:
    """Try to refute ``candidate`` from the claim store and constraints.

    Returns a Refutation if claims + constraints + candidate body is
    jointly unsatisfiable, else None (the claim is admissible).  No
    closed-world assumption is applied: only what the store actually
    says, plus integrity constraints, can contradict a claim.

    The search is Davis–Putnam variable elimination over the ground
    atom universe — chosen over DPLL because bucket elimination yields
    a ground resolution trace directly, and the trace is the product
    that matters: certificates must replay without the search engine.
    """
    claims = tuple(claims)
    constraints = tuple(constraints)
    table = _AtomTable()
    inputs: list[tuple[tuple, frozenset[int]]] = []

    def clausify(source: tuple, body: Formula):
        residual = ground_expand(body, defs)
        for cl in _clauses(_nnf(residual, False), table, max_clauses):
            if not _is_tautology(cl):
                inputs.append((source, cl))
        if len(table) > max_atoms:
            raise ResourceLimit(
                f"{len(table)} ground atoms exceeds the configured cap {max_atoms}"
            )

    for i, c in enumerate(claims):
        clausify(("claim", i), c.body)
    for j, g in enumerate(constraints):
        clausify(("constraint", j), g)
    clausify(("candidate",), candidate.body)

    steps: list[ProofStep] = []
    clause_step: dict[frozenset[int], int] = {}
    active: list[frozenset[int]] = []

    def record(rule, clause, source=None, premises=None) -> int:
        idx = len(steps)
        steps.append(
            ProofStep(rule, tuple(sorted(clause)), source=source, premises=premises)
        )
        clause_step[clause] = idx
        return idx

    empty_at: int | None = None
    for source, cl in inputs:
        if cl in clause_step:
            continue  # duplicate clause: first source wins
        record("input", cl, source=source)
        active.append(cl)
        if not cl:
            empty_at = clause_step[cl]
            break

    if empty_at is None:
        for var in range(1, len(table) + 1):
            pos = [c for c in active if var in c]
            neg = [c for c in active if -var in c]
            rest = [c for c in active if var not in c and -var not in c]
            fresh: list[frozenset[int]] = []
            for p in pos:
                for n in neg:
                    r = (p - {var}) | (n - {-var})
                    if _is_tautology(r) or r in clause_step:
                        continue
                    if any(s <= r for s in rest) or any(s <= r for s in fresh):
                        continue  # subsumed; a stronger clause survives
                    record("resolve", r, premises=(clause_step[p], clause_step[n]))
                    fresh.append(r)
                    if not r:
                        empty_at = clause_step[r]
                        break
                if empty_at is not None:
                    break
            if empty_at is not None:
                break
            active = rest + fresh
            if len(clause_step) > max_clauses:
                raise ResourceLimit("clause budget exceeded during elimination")

    if empty_at is None:
        return None

    # --- proof extraction -------------------------------------------------
    needed: set[int] = set()
    work = [empty_at]
    while work:
        i = work.pop()
        if i in needed:
            continue
        needed.add(i)
        if steps[i].premises is not None:
            work.extend(steps[i].premises)

    order = sorted(needed)
    renum = {old: new for new, old in enumerate(order)}
    claim_ids = sorted(
        {steps[i].source[1] for i in order if steps[i].rule == "input" and steps[i].source[0] == "claim"}
    )
    constraint_ids = sorted(
        {
            steps[i].source[1]
            for i in order
            if steps[i].rule == "input" and steps[i].source[0] == "constraint"
        }
    )
    claim_pos = {old: new for new, old in enumerate(claim_ids)}
    constraint_pos = {old: new for new, old in enumerate(constraint_ids)}
    used_atom_ids = sorted({abs(l) for i in order for l in steps[i].clause})
    atom_renum = {old: new for new, old in enumerate(used_atom_ids, start=1)}

    def remap(clause):
        return tuple(sorted((1 if l > 0 else -1) * atom_renum[abs(l)] for l in clause))

    trace: list[ProofStep] = []
    for i in order:
        st = steps[i]
        if st.rule == "input":
            src = st.source
            if src[0] == "claim":
                src = ("claim", claim_pos[src[1]])
            elif src[0] == "constraint":
                src = ("constraint", constraint_pos[src[1]])
            trace.append(ProofStep("input", remap(st.clause), source=src))
        else:
            a, b = st.premises
            trace.append(ProofStep("resolve", remap(st.clause), premises=(renum[a], renum[b])))

    return Refutation(
        conclusion=Not(candidate.body),
        used_claims=tuple(claims[i] for i in claim_ids),
        used_constraints=tuple(constraints[j] for j in constraint_ids),
        atoms=tuple(table.names[old - 1] for old in used_atom_ids),
        steps=tuple(trace),
    )


# ---------------------------------------------------------------------------
# Minimal conflict extraction


@dataclass(frozen=True)
class DiscordCertificate:
    """Evidence that a candidate claim contradicts the store.

    ``conflict`` is a minimal subset of stored claims that, together
    with the candidate and the integrity constraints, is unsatisfiable:
    dropping any one of them restores satisfiability.  The named
    authorities of candidate + conflict are exactly who is accountable
    for the contradiction.
    """

    candidate: Claim
    conflict: tuple[Claim, ...]
    refutation: Refutation

    @property
    def conflicting_claims(self) -> tuple[Claim, ...]:
        return (self.candidate,) + self.conflict

    @property
    def authorities(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for c in self.conflicting_claims:
            seen.setdefault(c.authority)
        return tuple(seen)


def minimize_conflict(
    claims,
    constraints,
    candidate: Claim,
    defs: DefinitionSet,
    **limits,
) -> DiscordCertificate:
    """Deletion-minimize the set of stored claims needed to refute.

    Standard destructive shrinking: start from the claims the first
    refutation cited, try dropping each in store order, keep the drop
    whenever a refutation still exists.  One pass suffices because
    satisfiability is monotone under deletion.
    """
    claims = tuple(claims)
    constraints = tuple(constraints)
    first = refute(claims, constraints, candidate, defs, **limits)
    if first is None:
        raise NotInConflict(f"{claim_text(candidate)} is not refuted by the store")
    work = list(first.used_claims)
    i = 0
    while i < len(work):
        trial = work[:i] + work[i + 1 :]
        if refute(trial, constraints, candidate, defs, **limits) is not None:
            work = trial
        else:
            i += 1
    final = refute(work, constraints, candidate, defs, **limits)
    assert final is not None and len(final.used_claims) == len(work)
    return DiscordCertificate(candidate=candidate, conflict=tuple(work), refutation=final)


def store_consistent(claims, constraints, defs: DefinitionSet, **limits) -> bool:
    """True iff the claim store plus constraints admits no refutation."""
    probe = Claim("Theta", TRUE, origin="consistency-check")
    return refute(tuple(claims), tuple(constraints), probe, defs, **limits) is None
