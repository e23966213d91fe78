"""Deterministic scenario execution: clock, mempool and trace.

The engine advances a simulated clock from tick 0 to the scenario
horizon.  At each tick it first processes the scripted timeline
(authority claims posted to the chain, explicit submissions), then
fires every eligible action to a fixpoint: an action is eligible when
it has been submitted (actions without a scripted submission are
auto-submitted at tick 0), is not yet published, and its dependencies
are published on the selected chain.  When several actions are
eligible at once their order is drawn from the seeded generator, which
is the only source of scheduling nondeterminism — the same seed always
yields a byte-identical trace.

Appending is split-phase, mirroring the block tree: ``validate_action``
obtains an append token against the current head and ``commit_action``
spends it.  Tests drive these steps directly to interleave competing
appends; ``attempt`` is the retry loop the scheduler uses, which
re-validates whenever a commit loses the head race.

Failed validations never halt the run.  They are recorded as rejection
events carrying the validator's reason, and a discord rejection
additionally captures the minimized certificate.
"""

from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import dataclass, field

from .blocktree import BlockTree, FrugalLimitReached, RetryExhausted
from .certificates import claim_to_doc
from .logic import DiscordCertificate, claim_text
from .syntax import ClaimEvent, Scenario, SubmitEvent
from .validator import (
    ClaimPayload,
    GenesisPayload,
    TransactionPayload,
    Validator,
    chain_claims_consistent,
    compute_state,
)

TRACE_FORMAT = "plurality-trace/1"

# Record stages
PENDING = "pending"
SUBMITTED = "submitted"
PUBLISHED = "published"
REJECTED = "rejected"

# Rejection reason used when a scripted submission names the wrong agent.
WRONG_SUBMITTER = "WrongSubmitter"


class EngineError(Exception):
    pass


class ConsistencyError(EngineError):
    """A chain's claim store became refutable — the admission rule leaked."""


class UnknownName(EngineError):
    """No action binding or claim label under that name."""


@dataclass
class Record:
    """Lifecycle of one named chain entry (action binding or claim label)."""

    name: str
    kind: str  # "action" | "claim"
    stage: str = PENDING
    history: list[str] = field(default_factory=list)
    block: str | None = None
    certificate: int | None = None


@dataclass(frozen=True)
class Event:
    seq: int
    tick: int
    kind: str  # "tick" | "submit" | "append" | "reject" | "discord"
    data: dict


@dataclass
class PendingAppend:
    """A validated-but-uncommitted append: the split-phase handle."""

    name: str
    payload: object
    token: object
    head: str
    tick: int


class Engine:
    """Runs one scenario against one block tree."""

    def __init__(
        self,
        scenario: Scenario,
        *,
        oracle=None,
        seed: int | None = None,
        consistency_checks: bool = False,
    ):
        self.scenario = scenario
        self.contract = scenario.contract
        self.oracle = oracle if oracle is not None else scenario.oracle
        self.seed = scenario.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.consistency_checks = consistency_checks
        self.tree = BlockTree(GenesisPayload.for_contract(self.contract), self.oracle)
        self.validator = Validator(scenario, self.tree)
        self.clock = 0
        self.events: list[Event] = []
        self.certificates: list[DiscordCertificate] = []
        self.records: dict[str, Record] = {}
        self._armed: set[str] = set()
        self._scripted = scenario.scripted()
        self._claim_events: dict[str, ClaimEvent] = {}
        self._publish_serial = 0
        for a in self.contract.actions:
            rec = Record(a.binding, "action")
            if a.binding not in self._scripted:
                rec.stage = SUBMITTED
                rec.history.append("t=0 auto-submitted")
            self.records[a.binding] = rec
        for e in scenario.events:
            if isinstance(e, ClaimEvent):
                self._claim_events[e.label] = e
                self.records[e.label] = Record(e.label, "claim")

    # -- bookkeeping ------------------------------------------------------

    def _emit(self, kind: str, **data):
        self.events.append(Event(len(self.events), self.clock, kind, data))

    def _payload(self, name: str):
        a = self.contract.action(name)
        if a is not None:
            return TransactionPayload(a)
        ev = self._claim_events.get(name)
        if ev is not None:
            return ClaimPayload(name, ev.claim)
        raise UnknownName(f"no action or claim named {name!r}")

    def _reject(self, name: str, reason: str, detail: str | None, certificate=None):
        rec = self.records[name]
        if rec.stage != PUBLISHED:
            rec.stage = REJECTED
        rec.history.append(f"t={self.clock} rejected: {reason}")
        self._emit("reject", name=name, reason=reason, detail=detail)
        if certificate is not None:
            idx = len(self.certificates)
            self.certificates.append(certificate)
            rec.certificate = idx
            self._emit(
                "discord",
                name=name,
                certificate=idx,
                candidate=claim_text(certificate.candidate),
                conflict=[claim_text(c) for c in certificate.conflict],
                origins=[c.origin for c in certificate.conflict],
                authorities=list(certificate.authorities),
            )

    # -- split-phase appends ----------------------------------------------

    def validate_action(self, name: str, *, tick: int | None = None) -> PendingAppend | None:
        """Validate against the current head; None means rejected (and logged)."""
        payload = self._payload(name)
        tick = self.clock if tick is None else tick
        self.validator.tick = tick
        head = self.tree.select().head
        token = self.tree.get_token(head, payload, self.validator)
        if token is None:
            r = self.validator.last_result
            self._reject(name, r.reason, r.detail, r.certificate)
            return None
        return PendingAppend(name, payload, token, head, tick)

    def commit_action(self, pending: PendingAppend):
        """Spend the token and attach the block.

        Returns the new block, or None when the commit could not go
        through: either the head moved and the token's target is
        saturated (caller should re-validate), or the token was already
        spent.  A spent token on an unpublished action is recorded as a
        rejection; replaying the commit of an already published action
        is a harmless no-op.
        """
        rec = self.records[pending.name]
        if pending.token.consumed:
            if rec.stage != PUBLISHED:
                self._reject(pending.name, "TokenSpent", "append token was already consumed")
            return None
        try:
            block = self.tree.commit(pending.token, pending.payload, tick=pending.tick)
        except FrugalLimitReached:
            rec.history.append(f"t={self.clock} lost the head race")
            return None
        rec.stage = PUBLISHED
        rec.block = block.id
        rec.history.append(f"t={pending.tick} published as block {block.id[:12]}")
        self._publish_serial += 1
        self._emit("append", name=pending.name, block=block.id, height=block.height)
        if self.consistency_checks and not chain_claims_consistent(self.tree, self.scenario):
            raise ConsistencyError(
                f"claim store became refutable after appending {pending.name!r}"
            )
        return block

    def attempt(self, name: str, *, max_attempts: int = 16) -> bool:
        """Validate and commit, re-validating when the head race is lost."""
        for _ in range(max_attempts):
            pending = self.validate_action(name)
            if pending is None:
                return False
            if self.commit_action(pending) is not None:
                return True
            if self.records[name].stage == REJECTED:
                return False
        raise RetryExhausted(f"{name!r} kept losing the head race")

    # -- the clock loop ---------------------------------------------------

    def run(self) -> dict:
        """Drive the scenario to its horizon and return the trace doc."""
        by_tick: dict[int, list] = defaultdict(list)
        for e in self.scenario.events:
            by_tick[e.tick].append(e)
        for tick in range(self.scenario.horizon + 1):
            self.clock = tick
            if tick > 0:
                self._emit("tick", clock=tick)
            for e in by_tick.get(tick, ()):
                if isinstance(e, ClaimEvent):
                    self._post_claim(e)
                else:
                    self._process_submit(e)
            self._fire_eligible()
        return self.trace()

    def _post_claim(self, e: ClaimEvent):
        self.attempt(e.label)

    def _process_submit(self, e: SubmitEvent):
        action = self.contract.action(e.binding)
        source = action.transaction.source
        actor = e.by if e.by is not None else source
        self._emit("submit", name=e.binding, by=actor)
        if actor != source:
            self._reject(
                e.binding, WRONG_SUBMITTER, f"{actor} cannot submit for source {source}"
            )
            return
        rec = self.records[e.binding]
        if rec.stage != PUBLISHED:
            rec.stage = SUBMITTED
            rec.history.append(f"t={self.clock} submitted by {actor}")
        self._armed.add(e.binding)

    def _fire_eligible(self):
        """Attempt every runnable action until nothing more publishes.

        Within one tick an action is retried only after some other
        append changed the chain underneath it; across ticks everything
        eligible is retried, since the clock itself is chain state.
        """
        last_attempt: dict[str, int] = {}
        while True:
            state = compute_state(
                self.tree, self.tree.select().head, self.scenario.facts
            )
            ready = []
            for a in self.contract.actions:
                rec = self.records[a.binding]
                if rec.stage == PUBLISHED:
                    continue
                if a.binding in self._scripted and a.binding not in self._armed:
                    continue
                if last_attempt.get(a.binding, -1) >= self._publish_serial:
                    continue
                if any(d not in state.published for d in a.deps):
                    continue
                ready.append(a.binding)
            if not ready:
                return
            self.rng.shuffle(ready)
            for name in ready:
                last_attempt[name] = self._publish_serial
                done = self.attempt(name)
                if done or self.records[name].stage == REJECTED:
                    self._armed.discard(name)

    # -- trace export ------------------------------------------------------

    def trace(self) -> dict:
        sel = self.tree.select()
        chains = []
        for leaf in self.tree.leaves():
            st = compute_state(self.tree, leaf, self.scenario.facts)
            chains.append(
                {
                    "head": leaf,
                    "length": len(self.tree.chain_to(leaf)),
                    "selected": leaf == sel.head,
                    "balances": dict(st.balances),
                    "clock": st.clock,
                    "published": list(st.published),
                    "claims": [claim_to_doc(c) for c in st.claims],
                }
            )
        records = []
        for r in sorted(self.records.values(), key=lambda r: r.name):
            doc: dict = {
                "name": r.name,
                "kind": r.kind,
                "stage": r.stage,
                "history": list(r.history),
            }
            if r.block is not None:
                doc["block"] = r.block
            if r.certificate is not None:
                doc["certificate"] = r.certificate
            records.append(doc)
        return {
            "format": TRACE_FORMAT,
            "scenario": self.scenario.name,
            "seed": self.seed,
            "oracle": str(self.oracle),
            "horizon": self.scenario.horizon,
            "events": [
                {"seq": e.seq, "tick": e.tick, "kind": e.kind, **e.data}
                for e in self.events
            ],
            "records": records,
            "certificates": len(self.certificates),
            "chains": chains,
            "tree": self.tree.snapshot().splitlines(),
        }


def trace_text(doc: dict) -> str:
    """Canonical byte-stable rendering of a trace document."""
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def trace_human(doc: dict) -> str:
    """Compact human-oriented rendering of a trace document."""
    out = [
        f"scenario {doc['scenario']}  seed {doc['seed']}  "
        f"oracle {doc['oracle']}  horizon {doc['horizon']}"
    ]
    for e in doc["events"]:
        tick = f"[t{e['tick']}]"
        kind = e["kind"]
        if kind == "tick":
            continue
        if kind == "submit":
            out.append(f"{tick} submit {e['name']} by {e['by']}")
        elif kind == "append":
            out.append(f"{tick} append {e['name']} -> {e['block'][:12]} (height {e['height']})")
        elif kind == "reject":
            detail = f" ({e['detail']})" if e.get("detail") else ""
            out.append(f"{tick} reject {e['name']}: {e['reason']}{detail}")
        elif kind == "discord":
            out.append(
                f"{tick} discord #{e['certificate']} on {e['name']}: "
                f"accountable {', '.join(e['authorities'])}"
            )
    out.append("records:")
    for r in doc["records"]:
        suffix = f" block {r['block'][:12]}" if "block" in r else ""
        if "certificate" in r:
            suffix += f" certificate #{r['certificate']}"
        out.append(f"  {r['name']} ({r['kind']}): {r['stage']}{suffix}")
    for c in doc["chains"]:
        mark = "selected " if c["selected"] else "fork     "
        balances = " ".join(f"{k}={v}" for k, v in sorted(c["balances"].items()))
        out.append(
            f"{mark}head {c['head'][:12]} length {c['length']} clock {c['clock']}: {balances}"
        )
        if c["published"]:
            out.append(f"         published: {', '.join(c['published'])}")
    return "\n".join(out) + "\n"
