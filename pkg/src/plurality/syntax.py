"""Parser and printer for ``.plu`` contract and scenario files.

A contract is a list of declarations (agents, domains, functions,
predicates, open atoms, integrity constraints) followed by guarded
transfer actions.  A scenario wraps a contract with a token-oracle
policy, a clock horizon and a timeline of scripted events (authority
claims and explicit submissions).

Identifiers resolve by position: quantifier-bound names are variables,
declared agent ids are agent references, anything else is a symbolic
constant.  Declarations must precede use, which also makes predicate
definitions stratified by construction.  See docs/format.md for the
grammar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .blocktree import OracleConfig
from .logic import (
    BUILTIN_FUNCTIONS,
    BUILTIN_PREDICATES,
    FALSE,
    RESERVED_ATOMS,
    TRUE,
    AgentRef,
    And,
    Atom,
    BalanceOf,
    Claim,
    Cmp,
    Constant,
    DefinitionSet,
    Exists,
    FnApp,
    ForAll,
    Formula,
    FunctionDef,
    Implies,
    IntLit,
    Not,
    Or,
    PredicateDef,
    Term,
    Value,
    Var,
    claim_text,
    formula_text,
    term_text,
)

TIME_ORACLE = "K_t"
VALIDATION_AUTHORITY = "Theta"


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {msg}" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


class DuplicateAgent(ParseError):
    pass


class DuplicateBinding(ParseError):
    pass


class DuplicateDefinition(ParseError):
    pass


class UnknownAgent(ParseError):
    pass


class UnknownBinding(ParseError):
    pass


class ForwardDependency(ParseError):
    pass


class SourceIsSink(ParseError):
    pass


class NonPositiveAmount(ParseError):
    pass


class UndeclaredName(ParseError):
    pass


class ArityError(ParseError):
    pass


class UncomputableGuard(ParseError):
    """A closed guard mentions a symbol with no chain-computable value."""


class UnknownEventKind(ParseError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Agent:
    id: str
    kind: str = "wallet"  # "wallet" | "oracle"
    balance: int = 0


@dataclass(frozen=True)
class ClosedGuard:
    formula: Formula


@dataclass(frozen=True)
class ClaimedGuard:
    claim: Claim


Guard = ClosedGuard | ClaimedGuard


@dataclass(frozen=True)
class Transaction:
    source: str
    amount: int
    guard: Guard
    sink: str


@dataclass(frozen=True)
class Action:
    binding: str
    deps: tuple[str, ...]
    transaction: Transaction


@dataclass
class Contract:
    agents: tuple[Agent, ...] = ()
    defs: DefinitionSet = field(default_factory=DefinitionSet)
    actions: tuple[Action, ...] = ()

    def agent(self, aid: str) -> Agent | None:
        for a in self.agents:
            if a.id == aid:
                return a
        return None

    def is_authority(self, aid: str) -> bool:
        return aid == TIME_ORACLE or self.agent(aid) is not None

    def wallets(self) -> tuple[Agent, ...]:
        return tuple(a for a in self.agents if a.kind == "wallet")

    def action(self, binding: str) -> Action | None:
        for a in self.actions:
            if a.binding == binding:
                return a
        return None


@dataclass(frozen=True)
class ClaimEvent:
    tick: int
    label: str
    claim: Claim


@dataclass(frozen=True)
class SubmitEvent:
    tick: int
    binding: str
    by: str | None = None


Event = ClaimEvent | SubmitEvent


@dataclass
class Scenario:
    contract: Contract
    events: tuple[Event, ...] = ()
    oracle: OracleConfig = OracleConfig.frugal(1)
    seed: int = 0
    horizon: int = 0
    facts: tuple[tuple[str, tuple[Value, ...]], ...] = ()
    name: str = "scenario"

    def scripted(self) -> frozenset[str]:
        return frozenset(e.binding for e in self.events if isinstance(e, SubmitEvent))


# ---------------------------------------------------------------------------
# Lexer


@dataclass(frozen=True)
class _Tok:
    kind: str  # ident | int | string | op | eof
    value: object
    line: int
    col: int


_TWO_CHAR = ("->", "<=", ">=", "!=", ":=")
_ONE_CHAR = "()[]{},;:.=<>!&|-"


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("int", int(text[i:j]), line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("ident", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    out.append(text[j + 1])
                    j += 2
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string", line, start_col)
            toks.append(_Tok("string", "".join(out), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR:
            toks.append(_Tok("op", two, line, start_col))
            i += 2
            col += 2
            continue
        if c in _ONE_CHAR:
            toks.append(_Tok("op", c, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"stray character {c!r}", line, start_col)
    toks.append(_Tok("eof", None, line, col))
    return toks


_STATEMENT_KEYWORDS = {
    "agent",
    "oracle",
    "domain",
    "function",
    "map",
    "predicate",
    "atom",
    "constraint",
    "issue",
    "after",
}
_SCENARIO_KEYWORDS = {"tokens", "seed", "horizon", "at", "fact"}


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text: str, *, scenario: bool, name: str = "scenario"):
        self.toks = _lex(text)
        self.pos = 0
        self.scenario_mode = scenario
        self.name = name
        self.contract = Contract()
        self._agents: list[Agent] = []
        self._actions: list[Action] = []
        self._events: list[Event] = []
        self._facts: list[tuple[str, tuple[Value, ...]]] = []
        self._labels: set[str] = set()
        self._oracle: OracleConfig | None = None
        self._seed: int | None = None
        self._horizon: int | None = None
        self._auto_label = 0

    # -- token plumbing ---------------------------------------------------

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def fail(self, msg: str, tok: _Tok | None = None, err=ParseError):
        tok = tok or self.peek()
        raise err(msg, tok.line, tok.col)

    def expect_op(self, op: str) -> _Tok:
        t = self.peek()
        if t.kind != "op" or t.value != op:
            self.fail(f"expected {op!r}")
        return self.next()

    def expect_ident(self, what: str = "identifier") -> _Tok:
        t = self.peek()
        if t.kind != "ident":
            self.fail(f"expected {what}")
        return self.next()

    def expect_int(self, what: str = "integer") -> _Tok:
        t = self.peek()
        if t.kind != "int":
            self.fail(f"expected {what}")
        return self.next()

    def at_keyword(self, kw: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.value == kw

    def take_keyword(self, kw: str) -> bool:
        if self.at_keyword(kw):
            self.next()
            return True
        return False

    # -- entry points -----------------------------------------------------

    def parse(self):
        while self.peek().kind != "eof":
            if self.peek().kind == "op" and self.peek().value == ";":
                self.next()
                continue
            self.statement()
        self.contract.agents = tuple(self._agents)
        self.contract.actions = tuple(self._actions)
        if not self.scenario_mode:
            return self.contract
        events = sorted(self._events, key=lambda e: e.tick)  # stable on script order
        horizon = self._horizon if self._horizon is not None else 0
        if events:
            horizon = max(horizon, max(e.tick for e in events))
        return Scenario(
            contract=self.contract,
            events=tuple(events),
            oracle=self._oracle or OracleConfig.frugal(1),
            seed=self._seed or 0,
            horizon=horizon,
            facts=tuple(self._facts),
            name=self.name,
        )

    def statement(self):
        t = self.peek()
        if t.kind != "ident":
            self.fail("expected a declaration, action or event")
        kw = t.value
        if kw in _SCENARIO_KEYWORDS and not self.scenario_mode:
            self.fail(f"{kw!r} statements belong in scenarios, not bare contracts")
        handler = {
            "agent": self.p_agent,
            "oracle": self.p_oracle,
            "domain": self.p_domain,
            "function": self.p_function,
            "map": self.p_map,
            "predicate": self.p_predicate,
            "atom": self.p_atom,
            "constraint": self.p_constraint,
            "issue": self.p_action,
            "after": self.p_action,
            "tokens": self.p_tokens,
            "seed": self.p_seed,
            "horizon": self.p_horizon,
            "at": self.p_event,
            "fact": self.p_fact,
        }.get(kw)
        if handler is None:
            self.fail(f"unknown statement {kw!r}")
        handler()

    # -- declarations -----------------------------------------------------

    def _declare_agent(self, tok: _Tok, kind: str, balance: int = 0):
        aid = tok.value
        if aid in (TIME_ORACLE, VALIDATION_AUTHORITY):
            self.fail(f"{aid!r} is reserved", tok, DuplicateAgent)
        if self.contract.agent(aid) is not None:
            self.fail(f"agent {aid!r} declared twice", tok, DuplicateAgent)
        self._agents.append(Agent(aid, kind, balance))
        self.contract.agents = tuple(self._agents)

    def p_agent(self):
        self.next()
        tok = self.expect_ident("agent id")
        balance = 0
        if self.take_keyword("balance"):
            balance = self.expect_int("balance").value
        self._declare_agent(tok, "wallet", balance)

    def p_oracle(self):
        self.next()
        tok = self.expect_ident("oracle id")
        if self.at_keyword("balance"):
            self.fail("oracles hold no balance", self.peek())
        self._declare_agent(tok, "oracle")

    def p_domain(self):
        self.next()
        tok = self.expect_ident("domain name")
        name = tok.value
        if name in self.contract.defs.domains:
            self.fail(f"domain {name!r} declared twice", tok, DuplicateDefinition)
        self.expect_op("=")
        self.expect_op("{")
        members: list[Value] = []
        while not (self.peek().kind == "op" and self.peek().value == "}"):
            m = self.next()
            if m.kind == "ident" or m.kind == "string":
                members.append(m.value)
            elif m.kind == "int":
                members.append(m.value)
            else:
                self.fail("domain members are identifiers or integers", m)
            if self.peek().kind == "op" and self.peek().value == ",":
                self.next()
        self.expect_op("}")
        self.contract.defs.domains[name] = tuple(members)

    def _taken_symbol(self, name: str) -> bool:
        d = self.contract.defs
        return (
            name in d.functions
            or name in d.predicates
            or name in d.atoms
            or name in BUILTIN_FUNCTIONS
            or name in BUILTIN_PREDICATES
            or name in RESERVED_ATOMS
        )

    def p_function(self):
        self.next()
        tok = self.expect_ident("function name")
        name = tok.value
        if self._taken_symbol(name):
            self.fail(f"symbol {name!r} declared twice", tok, DuplicateDefinition)
        self.expect_op("(")
        params: list[str] = []
        while not (self.peek().kind == "op" and self.peek().value == ")"):
            params.append(self.expect_ident("parameter").value)
            if self.peek().kind == "op" and self.peek().value == ",":
                self.next()
        self.expect_op(")")
        body = None
        if self.peek().kind == "op" and self.peek().value == "=":
            self.next()
            body = self.term(bound=set(params))
        self.contract.defs.functions[name] = FunctionDef(
            name, len(params), params=tuple(params), body=body
        )

    def p_map(self):
        self.next()
        tok = self.expect_ident("function name")
        name = tok.value
        d = self.contract.defs
        fd = d.functions.get(name)
        self.expect_op("(")
        args: list[Value] = []
        while not (self.peek().kind == "op" and self.peek().value == ")"):
            args.append(self._ground_value())
            if self.peek().kind == "op" and self.peek().value == ",":
                self.next()
        self.expect_op(")")
        self.expect_op("=")
        value = self._ground_value()
        if fd is None:
            if self._taken_symbol(name):
                self.fail(f"{name!r} is not a mappable function", tok, DuplicateDefinition)
            fd = FunctionDef(name, len(args))
            d.functions[name] = fd
        if fd.body is not None:
            self.fail(f"{name!r} already has a defined body", tok, DuplicateDefinition)
        if fd.arity != len(args):
            self.fail(f"{name} expects {fd.arity} argument(s)", tok, ArityError)
        key = tuple(args)
        if key in fd.table:
            self.fail(f"duplicate map entry for {name}{key!r}", tok, DuplicateDefinition)
        fd.table[key] = value

    def _ground_value(self) -> Value:
        t = self.next()
        if t.kind in ("ident", "string"):
            return t.value
        if t.kind == "int":
            return t.value
        self.fail("expected a constant value", t)

    def p_predicate(self):
        self.next()
        tok = self.expect_ident("predicate name")
        name = tok.value
        if self._taken_symbol(name):
            self.fail(f"symbol {name!r} declared twice", tok, DuplicateDefinition)
        self.expect_op("(")
        params: list[str] = []
        while not (self.peek().kind == "op" and self.peek().value == ")"):
            params.append(self.expect_ident("parameter").value)
            if self.peek().kind == "op" and self.peek().value == ",":
                self.next()
        self.expect_op(")")
        self.expect_op(":=")
        body = self.formula(bound=set(params))
        self.contract.defs.predicates[name] = PredicateDef(name, tuple(params), body)

    def p_atom(self):
        self.next()
        tok = self.expect_ident("atom name")
        name = tok.value
        if self._taken_symbol(name):
            self.fail(f"symbol {name!r} declared twice", tok, DuplicateDefinition)
        arity = 0
        if self.peek().kind == "op" and self.peek().value == "(":
            self.next()
            while not (self.peek().kind == "op" and self.peek().value == ")"):
                self.expect_ident("parameter")
                arity += 1
                if self.peek().kind == "op" and self.peek().value == ",":
                    self.next()
            self.expect_op(")")
        self.contract.defs.atoms[name] = arity

    def p_constraint(self):
        self.next()
        f = self.formula(bound=set())
        self.contract.defs.constraints = self.contract.defs.constraints + (f,)

    # -- actions ----------------------------------------------------------

    def p_action(self):
        deps: list[str] = []
        if self.take_keyword("after"):
            self.expect_op("[")
            while not (self.peek().kind == "op" and self.peek().value == "]"):
                dep = self.expect_ident("dependency binding")
                if dep.value not in {a.binding for a in self._actions}:
                    self.fail(
                        f"dependency {dep.value!r} is not an earlier binding",
                        dep,
                        ForwardDependency,
                    )
                deps.append(dep.value)
                if self.peek().kind == "op" and self.peek().value == ",":
                    self.next()
            self.expect_op("]")
        if not self.take_keyword("issue"):
            self.fail("expected 'issue'")
        btok = self.expect_ident("binding")
        binding = btok.value
        if binding in {a.binding for a in self._actions} or binding in self._labels:
            self.fail(f"binding {binding!r} used twice", btok, DuplicateBinding)
        self.expect_op("=")
        if not self.take_keyword("tx"):
            self.fail("expected 'tx'")
        tx = self.p_transaction()
        self._actions.append(Action(binding, tuple(deps), tx))
        self.contract.actions = tuple(self._actions)

    def p_transaction(self) -> Transaction:
        stok = self.expect_ident("source agent")
        source = self._wallet(stok)
        self.expect_op("-")
        self.expect_op("(")
        qtok = self.expect_int("amount")
        if qtok.value <= 0:
            self.fail("amount must be strictly positive", qtok, NonPositiveAmount)
        self.expect_op(")")
        self.expect_op("[")
        guard = self.p_guard()
        self.expect_op("]")
        self.expect_op("->")
        ktok = self.expect_ident("sink agent")
        sink = self._wallet(ktok)
        if source == sink:
            self.fail("source and sink must differ", ktok, SourceIsSink)
        return Transaction(source, qtok.value, guard, sink)

    def _wallet(self, tok: _Tok) -> str:
        a = self.contract.agent(tok.value)
        if a is None or a.kind != "wallet":
            self.fail(f"{tok.value!r} is not a declared wallet agent", tok, UnknownAgent)
        return a.id

    def p_guard(self) -> Guard:
        if self.take_keyword("claim"):
            atok = self.expect_ident("authority")
            if not self.contract.is_authority(atok.value):
                self.fail(f"unknown authority {atok.value!r}", atok, UnknownAgent)
            self.expect_op(":")
            body = self.formula(bound=set())
            return ClaimedGuard(Claim(atok.value, body))
        f = self.formula(bound=set())
        self._require_computable(f)
        return ClosedGuard(f)

    def _require_computable(self, f: Formula):
        """Closed guards may only mention symbols the chain can value."""

        def bad(term: Term):
            if isinstance(term, FnApp):
                fd = self.contract.defs.functions.get(term.name)
                if fd is not None and fd.kind == "uninterpreted":
                    raise UncomputableGuard(
                        f"closed guard uses uninterpreted function {term.name!r}"
                    )
                for a in term.args:
                    bad(a)

        def walk(g: Formula):
            if isinstance(g, Atom):
                for a in g.args:
                    bad(a)
            elif isinstance(g, Cmp):
                bad(g.lhs)
                bad(g.rhs)
            elif isinstance(g, Not):
                walk(g.sub)
            elif isinstance(g, (And, Or, Implies)):
                walk(g.lhs)
                walk(g.rhs)
            elif isinstance(g, (ForAll, Exists)):
                walk(g.body)

        walk(f)

    # -- scenario statements ----------------------------------------------

    def p_tokens(self):
        tok = self.next()
        if self._oracle is not None:
            self.fail("tokens policy declared twice", tok, DuplicateDefinition)
        if self.take_keyword("prodigal"):
            self._oracle = OracleConfig.prodigal()
        elif self.take_keyword("frugal"):
            k = self.expect_int("k").value
            if k < 1:
                self.fail("frugal k must be at least 1", tok)
            self._oracle = OracleConfig.frugal(k)
        else:
            self.fail("expected 'prodigal' or 'frugal k'")

    def p_seed(self):
        tok = self.next()
        if self._seed is not None:
            self.fail("seed declared twice", tok, DuplicateDefinition)
        self._seed = self.expect_int("seed").value

    def p_horizon(self):
        tok = self.next()
        if self._horizon is not None:
            self.fail("horizon declared twice", tok, DuplicateDefinition)
        self._horizon = self.expect_int("horizon").value

    def p_fact(self):
        self.next()
        tok = self.expect_ident("atom name")
        name = tok.value
        args: list[Value] = []
        if self.peek().kind == "op" and self.peek().value == "(":
            self.next()
            while not (self.peek().kind == "op" and self.peek().value == ")"):
                args.append(self._ground_value())
                if self.peek().kind == "op" and self.peek().value == ",":
                    self.next()
            self.expect_op(")")
        arity = self.contract.defs.atom_arity(name)
        if arity is None:
            self.fail(f"atom {name!r} is not declared", tok, UndeclaredName)
        if arity != len(args):
            self.fail(f"{name} expects {arity} argument(s)", tok, ArityError)
        self._facts.append((name, tuple(args)))

    def p_event(self):
        self.next()
        tick = self.expect_int("tick").value
        kind = self.expect_ident("event kind")
        if kind.value == "claim":
            label = None
            if (
                self.peek().kind == "ident"
                and self.peek(1).kind == "op"
                and self.peek(1).value == "="
            ):
                ltok = self.next()
                self.next()  # '='
                label = ltok.value
                if label in self._labels or label in {a.binding for a in self._actions}:
                    self.fail(f"label {label!r} used twice", ltok, DuplicateBinding)
            atok = self.expect_ident("authority")
            if not self.contract.is_authority(atok.value):
                self.fail(f"unknown authority {atok.value!r}", atok, UnknownAgent)
            self.expect_op(":")
            body = self.formula(bound=set())
            if label is None:
                label = f"claim{self._auto_label}"
                self._auto_label += 1
                while label in self._labels or any(
                    a.binding == label for a in self._actions
                ):
                    label = f"claim{self._auto_label}"
                    self._auto_label += 1
            self._labels.add(label)
            self._events.append(ClaimEvent(tick, label, Claim(atok.value, body)))
        elif kind.value == "submit":
            btok = self.expect_ident("binding")
            if not any(a.binding == btok.value for a in self._actions):
                self.fail(f"no action bound to {btok.value!r}", btok, UnknownBinding)
            by = None
            if self.take_keyword("by"):
                wtok = self.expect_ident("agent")
                if self.contract.agent(wtok.value) is None:
                    self.fail(f"unknown agent {wtok.value!r}", wtok, UnknownAgent)
                by = wtok.value
            self._events.append(SubmitEvent(tick, btok.value, by))
        else:
            self.fail(f"unknown event kind {kind.value!r}", kind, UnknownEventKind)

    # -- formulas ---------------------------------------------------------

    def formula(self, bound: set[str]) -> Formula:
        return self.f_implies(bound)

    def f_implies(self, bound) -> Formula:
        left = self.f_or(bound)
        if self.peek().kind == "op" and self.peek().value == "->":
            self.next()
            return Implies(left, self.f_implies(bound))  # right-associative
        return left

    def f_or(self, bound) -> Formula:
        left = self.f_and(bound)
        while self.peek().kind == "op" and self.peek().value == "|":
            self.next()
            left = Or(left, self.f_and(bound))
        return left

    def f_and(self, bound) -> Formula:
        left = self.f_unary(bound)
        while self.peek().kind == "op" and self.peek().value == "&":
            self.next()
            left = And(left, self.f_unary(bound))
        return left

    def f_unary(self, bound) -> Formula:
        t = self.peek()
        if t.kind == "op" and t.value == "!":
            self.next()
            return Not(self.f_unary(bound))
        if t.kind == "ident" and t.value in ("forall", "exists"):
            self.next()
            var = self.expect_ident("variable").value
            if not self.take_keyword("in"):
                self.fail("expected 'in'")
            dom = self.expect_ident("domain")
            if dom.value not in self.contract.defs.domains:
                self.fail(f"domain {dom.value!r} is not declared", dom, UndeclaredName)
            self.expect_op(".")
            body = self.formula(bound | {var})
            return (ForAll if t.value == "forall" else Exists)(var, dom.value, body)
        return self.f_primary(bound)

    def f_primary(self, bound) -> Formula:
        t = self.peek()
        if t.kind == "ident" and t.value == "true":
            self.next()
            return TRUE
        if t.kind == "ident" and t.value == "false":
            self.next()
            return FALSE
        if t.kind == "op" and t.value == "(":
            self.next()
            inner = self.formula(bound)
            self.expect_op(")")
            return inner
        lhs = self.term(bound)
        nxt = self.peek()
        if nxt.kind == "op" and nxt.value in ("=", "!=", "<", "<=", ">", ">="):
            self.next()
            rhs = self.term(bound)
            self._resolve_term(lhs, bound)
            self._resolve_term(rhs, bound)
            after = self.peek()
            if after.kind == "op" and after.value in ("=", "!=", "<", "<=", ">", ">="):
                self.fail("comparisons do not chain", after)
            return Cmp(nxt.value, lhs, rhs)
        return self._term_as_atom(lhs, t, bound)

    def _term_as_atom(self, lhs: Term, tok: _Tok, bound) -> Formula:
        d = self.contract.defs
        if isinstance(lhs, FnApp):
            arity = d.atom_arity(lhs.name)
            if lhs.name in d.predicates:
                arity = len(d.predicates[lhs.name].params)
            elif lhs.name in BUILTIN_PREDICATES:
                arity = BUILTIN_PREDICATES[lhs.name]
            if arity is None:
                if lhs.name in d.functions or lhs.name in BUILTIN_FUNCTIONS:
                    self.fail(f"function {lhs.name!r} is not a formula", tok)
                self.fail(f"predicate {lhs.name!r} is not declared", tok, UndeclaredName)
            if arity != len(lhs.args):
                self.fail(f"{lhs.name} expects {arity} argument(s)", tok, ArityError)
            for a in lhs.args:
                self._resolve_term(a, bound)
            return Atom(lhs.name, lhs.args)
        if isinstance(lhs, Constant):
            name = lhs.value
            arity = d.atom_arity(name)
            if name in d.predicates:
                arity = len(d.predicates[name].params)
            if arity is None:
                self.fail(f"predicate {name!r} is not declared", tok, UndeclaredName)
            if arity != 0:
                self.fail(f"{name} expects {arity} argument(s)", tok, ArityError)
            return Atom(name)
        self.fail("expected a formula", tok)

    # -- terms ------------------------------------------------------------

    def term(self, bound: set[str]) -> Term:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return IntLit(t.value)
        if t.kind == "op" and t.value == "-":
            self.next()
            v = self.expect_int("integer")
            return IntLit(-v.value)
        if t.kind == "string":
            self.next()
            return Constant(t.value)
        if t.kind == "op" and t.value == "|":
            self.next()
            w = self.expect_ident("wallet")
            a = self.contract.agent(w.value)
            if a is None or a.kind != "wallet":
                self.fail(f"{w.value!r} is not a declared wallet agent", w, UnknownAgent)
            self.expect_op("|")
            return BalanceOf(w.value)
        if t.kind == "ident":
            self.next()
            name = t.value
            if self.peek().kind == "op" and self.peek().value == "(":
                self.next()
                args: list[Term] = []
                while not (self.peek().kind == "op" and self.peek().value == ")"):
                    args.append(self.term(bound))
                    if self.peek().kind == "op" and self.peek().value == ",":
                        self.next()
                self.expect_op(")")
                return FnApp(name, tuple(args))
            if name in bound:
                return Var(name)
            a = self.contract.agent(name)
            if a is not None:
                return AgentRef(name)
            return Constant(name)
        self.fail("expected a term", t)

    def _resolve_term(self, t: Term, bound: set[str]):
        """Check nested applications really are functions of right arity."""
        if isinstance(t, FnApp):
            d = self.contract.defs
            if t.name in BUILTIN_FUNCTIONS:
                arity = BUILTIN_FUNCTIONS[t.name]
            elif t.name in d.functions:
                arity = d.functions[t.name].arity
            elif (
                t.name in d.predicates
                or d.atom_arity(t.name) is not None
                or t.name in BUILTIN_PREDICATES
            ):
                self.fail(f"predicate {t.name!r} is not a term")
            else:
                self.fail(f"function {t.name!r} is not declared", err=UndeclaredName)
            if arity != len(t.args):
                self.fail(f"{t.name} expects {arity} argument(s)", err=ArityError)
            for a in t.args:
                self._resolve_term(a, bound)


# ---------------------------------------------------------------------------
# Public API


def parse_contract(text: str) -> Contract:
    """Parse declarations and actions; scenario statements are rejected."""
    return _Parser(text, scenario=False).parse()


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse a full scenario: a contract plus oracle policy and timeline."""
    return _Parser(text, scenario=True, name=name).parse()


def parse_formula(text: str, context) -> Formula:
    """Parse one formula in the declaration context of a contract/scenario."""
    contract = context.contract if isinstance(context, Scenario) else context
    p = _Parser(text, scenario=False)
    p.contract = contract
    f = p.formula(bound=set())
    if p.peek().kind != "eof":
        p.fail("trailing input after formula")
    return f


def guard_text(g: Guard) -> str:
    if isinstance(g, ClaimedGuard):
        return claim_text(g.claim)
    return formula_text(g.formula)


def action_text(a: Action) -> str:
    """Canonical one-line rendering of a bound action."""
    tx = a.transaction
    head = f"after [{', '.join(a.deps)}] issue" if a.deps else "issue"
    return f"{head} {a.binding} = tx {tx.source} -({tx.amount})[{guard_text(tx.guard)}]-> {tx.sink}"


def pretty_print(c: Contract) -> str:
    """Canonical text of a contract; parses back to an equal Contract."""
    out: list[str] = []
    for a in c.agents:
        if a.kind == "oracle":
            out.append(f"oracle {a.id}")
        elif a.balance:
            out.append(f"agent {a.id} balance {a.balance}")
        else:
            out.append(f"agent {a.id}")
    d = c.defs
    for name, members in d.domains.items():
        inner = ", ".join(term_text(Constant(m)) if isinstance(m, str) else str(m) for m in members)
        out.append(f"domain {name} = {{ {inner} }}")
    for name, fd in d.functions.items():
        if fd.body is not None:
            out.append(f"function {name}({', '.join(fd.params)}) = {term_text(fd.body)}")
        elif fd.params is not None:
            out.append(f"function {name}({', '.join(fd.params)})")
        for key, val in fd.table.items():
            args = ", ".join(term_text(_value_term(v)) for v in key)
            out.append(f"map {name}({args}) = {term_text(_value_term(val))}")
    for name, arity in d.atoms.items():
        if arity:
            out.append(f"atom {name}({', '.join(f'a{i}' for i in range(arity))})")
        else:
            out.append(f"atom {name}")
    for name, pd in d.predicates.items():
        out.append(f"predicate {name}({', '.join(pd.params)}) := {formula_text(pd.body)}")
    for g in d.constraints:
        out.append(f"constraint {formula_text(g)}")
    for a in c.actions:
        out.append(action_text(a))
    return "\n".join(out) + "\n"


def _value_term(v: Value) -> Term:
    return IntLit(v) if isinstance(v, int) else Constant(v)
