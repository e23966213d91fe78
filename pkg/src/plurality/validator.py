"""Enriched block validation: append conditions, guards and discord.

This module gives block payloads their meaning.  A chain is folded
into a :class:`ChainState` (balances, published bindings, the chain's
claim store).  A new payload is then admitted only if

1. the structural append conditions hold (fresh binding, dependencies
   already published, the source can cover the amount),
2. its guard is satisfied — a closed guard must evaluate to true
   against the chain state at the current tick, while a claimed guard
   is admitted on the say-so of its authority, and
3. none of the claims the payload adds is refuted by the chain's claim
   store together with the contract's integrity constraints.

Rule 3 is checked open-world: a claim is *valid unless the store
proves its negation*.  When that proof exists the validator returns a
minimized discord certificate naming exactly the accountable
authorities, instead of a bare rejection.

Each branch of the block tree carries its own claim store, so discord
is always relative to the chain a payload tries to extend.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .logic import (
    AgentRef,
    Atom,
    Claim,
    Constant,
    DiscordCertificate,
    Formula,
    Implies,
    IntLit,
    LogicError,
    Model,
    Says,
    Value,
    claim_text,
    evaluate,
    formula_text,
    minimize_conflict,
    refute,
    store_consistent,
)
from .syntax import (
    VALIDATION_AUTHORITY,
    Action,
    ClaimedGuard,
    ClosedGuard,
    Contract,
    Scenario,
    action_text,
)


class ValidatorError(Exception):
    pass


# ---------------------------------------------------------------------------
# Block payloads


@dataclass(frozen=True)
class GenesisPayload:
    """Root block: the opening balance sheet."""

    balances: tuple[tuple[str, int], ...]

    @classmethod
    def for_contract(cls, contract: Contract) -> "GenesisPayload":
        return cls(tuple(sorted((a.id, a.balance) for a in contract.wallets())))

    def canonical(self) -> str:
        if not self.balances:
            return "genesis"
        return "genesis " + ",".join(f"{a}={b}" for a, b in self.balances)

    def describe(self) -> str:
        return "genesis"


@dataclass(frozen=True)
class TransactionPayload:
    """A guarded transfer appended under its action binding."""

    action: Action

    def canonical(self) -> str:
        return action_text(self.action)

    def describe(self) -> str:
        tx = self.action.transaction
        return f"tx {self.action.binding}: {tx.source} -({tx.amount})-> {tx.sink}"

    def claims(self, origin: str) -> tuple[Claim, ...]:
        """The claims this payload adds to the chain's store.

        The source implicitly endorses the balance update it causes;
        a claimed guard additionally stores its authority's claim.
        """
        tx = self.action.transaction
        out = [
            Claim(
                tx.source,
                Atom(
                    "updates",
                    (AgentRef(tx.source), IntLit(tx.amount), AgentRef(tx.sink)),
                ),
                origin=origin,
            )
        ]
        if isinstance(tx.guard, ClaimedGuard):
            out.append(replace(tx.guard.claim, origin=origin))
        return tuple(out)


@dataclass(frozen=True)
class ClaimPayload:
    """A free-standing authority claim posted to the chain."""

    label: str
    claim: Claim

    def canonical(self) -> str:
        return f"post {self.label} = {claim_text(self.claim)}"

    def describe(self) -> str:
        return f"claim {self.label} by {self.claim.authority}"


# ---------------------------------------------------------------------------
# Accountability reading of a transfer


@dataclass(frozen=True)
class TransactionFormula:
    """A bound action together with its accountability implication."""

    action: Action
    formula: Formula

    @property
    def text(self) -> str:
        return formula_text(self.formula)


def account(action: Action) -> TransactionFormula:
    """Render a guarded transfer as who-commits-to-what.

    A closed guard reads: if the validation authority endorses the
    guard as valid, the source endorses the balance update.  A claimed
    guard substitutes the endorsement it actually rides on: if the
    guard's authority says the guard body, the source endorses the
    update.  Either way the named agents are accountable for exactly
    their own endorsement, which is what discord certificates later
    point at.
    """
    tx = action.transaction
    if isinstance(tx.guard, ClaimedGuard):
        premise: Formula = Says(tx.guard.claim.authority, tx.guard.claim.body)
    else:
        premise = Says(
            VALIDATION_AUTHORITY,
            Atom("valid", (Constant(formula_text(tx.guard.formula)),)),
        )
    commitment = Says(
        tx.source,
        Atom("updates", (AgentRef(tx.source), IntLit(tx.amount), AgentRef(tx.sink))),
    )
    return TransactionFormula(action, Implies(premise, commitment))


# ---------------------------------------------------------------------------
# Chain state


@dataclass
class ChainState:
    """Everything a chain asserts, folded from genesis to one block.

    ``asserted`` holds the closed-world bookkeeping atoms (``updates``,
    ``published`` and scenario facts) that closed guards may test;
    claim bodies never enter it.  ``clock`` is the tick at which the
    head block was appended.
    """

    balances: dict[str, int] = field(default_factory=dict)
    published: tuple[str, ...] = ()
    claims: tuple[Claim, ...] = ()
    clock: int = 0
    asserted: set[tuple[str, tuple[Value, ...]]] = field(default_factory=set)


def compute_state(tree, head_id: str, facts=()) -> ChainState:
    """Fold the chain ending at ``head_id`` into a ChainState."""
    balances: dict[str, int] = {}
    published: list[str] = []
    claims: list[Claim] = []
    asserted: set[tuple[str, tuple[Value, ...]]] = {
        (name, tuple(args)) for name, args in facts
    }
    for bid in tree.chain_to(head_id):
        block = tree.block(bid)
        p = block.payload
        if isinstance(p, GenesisPayload):
            balances.update(dict(p.balances))
        elif isinstance(p, TransactionPayload):
            tx = p.action.transaction
            balances[tx.source] = balances.get(tx.source, 0) - tx.amount
            balances[tx.sink] = balances.get(tx.sink, 0) + tx.amount
            published.append(p.action.binding)
            asserted.add(("updates", (tx.source, tx.amount, tx.sink)))
            asserted.add(("published", (p.action.binding,)))
            claims.extend(p.claims(block.id))
        elif isinstance(p, ClaimPayload):
            published.append(p.label)
            asserted.add(("published", (p.label,)))
            claims.append(replace(p.claim, origin=block.id))
        else:
            raise ValidatorError(f"unrecognized payload kind {type(p).__name__}")
    return ChainState(
        balances=balances,
        published=tuple(published),
        claims=tuple(claims),
        clock=tree.append_tick(head_id),
        asserted=asserted,
    )


# ---------------------------------------------------------------------------
# Append conditions


@dataclass(frozen=True)
class PAppChecks:
    """Individually toggleable structural append conditions."""

    unique_binding: bool = True
    dependencies_met: bool = True
    sufficient_balance: bool = True
    positive_amount: bool = True


@dataclass(frozen=True)
class PAppResult:
    ok: bool
    code: str | None = None
    detail: str | None = None


def check_append(action: Action, state: ChainState, checks: PAppChecks = PAppChecks()) -> PAppResult:
    """Structural admissibility of an action against a chain state."""
    tx = action.transaction
    if checks.unique_binding and action.binding in state.published:
        return PAppResult(
            False, "DuplicateBinding", f"binding {action.binding!r} is already published"
        )
    if checks.dependencies_met:
        for dep in action.deps:
            if dep not in state.published:
                return PAppResult(
                    False, "UnmetDependency", f"dependency {dep!r} is not yet published"
                )
    if checks.sufficient_balance:
        held = state.balances.get(tx.source, 0)
        if held < tx.amount:
            return PAppResult(
                False,
                "InsufficientBalance",
                f"{tx.source} holds {held}, needs {tx.amount}",
            )
    if checks.positive_amount and tx.amount <= 0:
        return PAppResult(
            False, "NonPositiveAmount", f"amount {tx.amount} is not positive"
        )
    return PAppResult(True)


# ---------------------------------------------------------------------------
# Discord


def proof_of_discord(claims, constraints, candidate: Claim, defs):
    """Admit ``candidate`` unless the store refutes it.

    Returns ``(True, None)`` when the claim is admissible and
    ``(False, certificate)`` with a minimized discord certificate when
    the store plus constraints prove its negation.
    """
    if refute(tuple(claims), tuple(constraints), candidate, defs) is None:
        return True, None
    return False, minimize_conflict(tuple(claims), tuple(constraints), candidate, defs)


def chain_claims_consistent(tree, scenario: Scenario) -> bool:
    """True iff every branch's claim store is free of internal discord."""
    d = scenario.contract.defs
    for leaf in tree.leaves():
        st = compute_state(tree, leaf, scenario.facts)
        if not store_consistent(st.claims, d.constraints, d):
            return False
    return True


# ---------------------------------------------------------------------------
# The validation callback


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of validating one payload against one chain.

    ``reason`` is None on success, else one of "AppendConditions",
    "GuardFalse" or "Discord"; a discord result carries the minimized
    certificate.
    """

    ok: bool
    reason: str | None = None
    detail: str | None = None
    certificate: DiscordCertificate | None = None


class Validator:
    """Validation callback for BlockTree appends.

    The tree hands this object a payload and the block it would extend;
    the validator folds that chain and applies the enriched append rule.
    ``tick`` is the wall clock the guard is evaluated at and should be
    advanced by the caller as simulated time passes.  The full
    ValidationResult of the most recent call is kept in ``last_result``
    so rejections can be reported with their reason and certificate.
    """

    def __init__(
        self,
        scenario: Scenario,
        tree,
        *,
        tick: int = 0,
        checks: PAppChecks | None = None,
    ):
        self.scenario = scenario
        self.tree = tree
        self.tick = tick
        self.checks = checks or PAppChecks()
        self.last_result: ValidationResult | None = None

    def __call__(self, payload, target) -> bool:
        self.last_result = self.validate(payload, target)
        return self.last_result.ok

    def validate(self, payload, target) -> ValidationResult:
        state = compute_state(self.tree, target.id, self.scenario.facts)
        if isinstance(payload, TransactionPayload):
            return self._transaction(payload, state)
        if isinstance(payload, ClaimPayload):
            return self._claim(payload.claim, state)
        return ValidationResult(
            False, "AppendConditions", f"unrecognized payload kind {type(payload).__name__}"
        )

    # -- payload kinds ----------------------------------------------------

    def _transaction(self, payload: TransactionPayload, state: ChainState) -> ValidationResult:
        action = payload.action
        defs = self.scenario.contract.defs
        structural = check_append(action, state, self.checks)
        if not structural.ok:
            return ValidationResult(
                False, "AppendConditions", f"{structural.code}: {structural.detail}"
            )
        tx = action.transaction
        if isinstance(tx.guard, ClosedGuard):
            model = Model(
                balances=dict(state.balances),
                asserted=set(state.asserted),
                clock=self.tick,
            )
            try:
                holds = evaluate(tx.guard.formula, model, defs)
            except LogicError as e:
                return ValidationResult(
                    False, "GuardFalse", f"guard cannot be evaluated: {e}"
                )
            if not holds:
                return ValidationResult(
                    False, "GuardFalse", formula_text(tx.guard.formula)
                )
        return self._admit_claims(payload.claims("submitted"), state)

    def _claim(self, claim: Claim, state: ChainState) -> ValidationResult:
        return self._admit_claims((claim,), state)

    def _admit_claims(self, candidates, state: ChainState) -> ValidationResult:
        """Every claim a payload adds must survive proof-of-discord."""
        defs = self.scenario.contract.defs
        store = list(state.claims)
        for cand in candidates:
            admitted, cert = proof_of_discord(store, defs.constraints, cand, defs)
            if not admitted:
                accountable = ", ".join(cert.authorities)
                return ValidationResult(
                    False,
                    "Discord",
                    f"{claim_text(cand)} is refuted; accountable: {accountable}",
                    certificate=cert,
                )
            store.append(cand)
        return ValidationResult(True)
