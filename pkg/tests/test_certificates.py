"""Certificate serialization, independent replay and minimality audit."""

from __future__ import annotations

import dataclasses
import json
import random

import pytest

from plurality.certificates import (
    NotMinimal,
    ReplayFailed,
    certificate_from_text,
    certificate_to_doc,
    certificate_to_text,
    check_certificate,
    check_minimality,
    replay_refutation,
)
from plurality.logic import (
    Claim,
    DefinitionSet,
    minimize_conflict,
    refute,
    store_consistent,
)
from plurality.syntax import parse_contract, parse_formula
from tests.test_logic import random_ground_formula

CTX = parse_contract(
    """
agent W balance 10
agent A
agent B
oracle Omega_s
oracle Omega_X
oracle Omega_Y
atom license(holder)
atom p
atom q
function rank(class, student)
domain Students = { A, B }
domain Positions = { 1, 2 }
constraint forall i in Positions . forall s in Students . forall t in Students . ((s != t) -> !((rank(C, s) = i) & (rank(C, t) = i)))
"""
)


def _parse(text: str):
    return parse_formula(text, CTX)


def rank_conflict():
    stored = Claim("Omega_s", _parse("rank(C, A) = 1"), origin="block-a")
    noise = Claim("Omega_X", _parse("license(A)"), origin="block-n")
    candidate = Claim("Omega_s", _parse("rank(C, B) = 1"))
    cert = minimize_conflict(
        (noise, stored), CTX.defs.constraints, candidate, CTX.defs
    )
    return cert


def test_serialization_roundtrip():
    cert = rank_conflict()
    text = certificate_to_text(cert)
    back = certificate_from_text(text, _parse)
    assert back == cert
    assert certificate_to_text(back) == text


def test_serialized_form_is_canonical():
    cert = rank_conflict()
    assert certificate_to_text(cert) == certificate_to_text(rank_conflict())
    doc = certificate_to_doc(cert)
    assert doc["format"] == "plurality-discord-certificate/1"
    assert [c["authority"] for c in doc["conflict"]] == ["Omega_s"]
    assert doc["candidate"]["body"] == "(rank(C, B) = 1)"
    # keys are emitted sorted, so the dump round-trips byte-identically
    assert json.dumps(doc, sort_keys=True, indent=1) + "\n" == certificate_to_text(cert)


def test_replay_accepts_engine_output():
    cert = rank_conflict()
    replay_refutation(cert, CTX.defs.constraints, CTX.defs)
    check_certificate(cert, CTX.defs.constraints, CTX.defs)


def test_replay_rejects_deleted_claim():
    cert = rank_conflict()
    doc = certificate_to_doc(cert)
    doc["conflict"] = []
    tampered = certificate_from_text(json.dumps(doc), _parse)
    with pytest.raises(ReplayFailed):
        replay_refutation(tampered, CTX.defs.constraints, CTX.defs)


def test_replay_rejects_bent_resolution_step():
    cert = rank_conflict()
    doc = certificate_to_doc(cert)
    for step in doc["refutation"]["steps"]:
        if step["rule"] == "resolve" and step["clause"]:
            step["clause"] = step["clause"][:-1]
            break
    tampered = certificate_from_text(json.dumps(doc), _parse)
    with pytest.raises(ReplayFailed):
        replay_refutation(tampered, CTX.defs.constraints, CTX.defs)


def test_replay_rejects_swapped_candidate():
    cert = rank_conflict()
    doc = certificate_to_doc(cert)
    doc["candidate"]["body"] = "(rank(C, A) = 2)"
    tampered = certificate_from_text(json.dumps(doc), _parse)
    with pytest.raises(ReplayFailed):
        replay_refutation(tampered, CTX.defs.constraints, CTX.defs)


def test_replay_rejects_foreign_constraints():
    cert = rank_conflict()
    with pytest.raises(ReplayFailed):
        replay_refutation(cert, (), CTX.defs)  # constraints withheld


def test_replay_rejects_truncated_trace():
    cert = rank_conflict()
    doc = certificate_to_doc(cert)
    doc["refutation"]["steps"] = doc["refutation"]["steps"][:-1]
    tampered = certificate_from_text(json.dumps(doc), _parse)
    with pytest.raises(ReplayFailed):
        replay_refutation(tampered, CTX.defs.constraints, CTX.defs)


def test_padded_conflict_is_flagged():
    cert = rank_conflict()
    pad = Claim("Omega_Y", _parse("q"), origin="block-p")
    padded = dataclasses.replace(
        cert,
        conflict=cert.conflict + (pad,),
        refutation=dataclasses.replace(
            cert.refutation, used_claims=cert.refutation.used_claims + (pad,)
        ),
    )
    replay_refutation(padded, CTX.defs.constraints, CTX.defs)  # proof still replays
    with pytest.raises(NotMinimal):
        check_minimality(padded, CTX.defs.constraints, CTX.defs)


def test_minimality_audit_skips_oversized_conflicts():
    cert = rank_conflict()
    assert check_minimality(cert, CTX.defs.constraints, CTX.defs, limit=0) is False
    assert check_minimality(cert, CTX.defs.constraints, CTX.defs) is True


def test_self_contradiction_certificate():
    d = DefinitionSet(atoms={"p": 0})
    cand = Claim("Omega", parse_formula("p & !p", parse_contract("atom p\n")))
    cert = minimize_conflict((), (), cand, d)
    assert cert.conflict == ()
    replay_refutation(cert, (), d)
    check_certificate(cert, (), d)


def test_replay_randomized_certificates():
    rng = random.Random(77)
    replayed = 0
    for _ in range(300):
        names = [f"g{i}" for i in range(rng.randrange(2, 7))]
        d = DefinitionSet(atoms={n: 0 for n in names})
        claims = tuple(
            Claim(f"O{i}", random_ground_formula(rng, names, 2), origin=f"b{i}")
            for i in range(rng.randrange(1, 5))
        )
        cand = Claim("Oc", random_ground_formula(rng, names, 2))
        if not store_consistent(claims, (), d):
            # a broken store can never pin the blame on one candidate;
            # the chain never admits such stores in the first place
            continue
        if refute(claims, (), cand, d) is None:
            continue
        cert = minimize_conflict(claims, (), cand, d)
        replay_refutation(cert, (), d)
        check_certificate(cert, (), d)
        # and the serialized form replays identically
        ctx = parse_contract("".join(f"atom {n}\n" for n in names))
        back = certificate_from_text(
            certificate_to_text(cert), lambda s: parse_formula(s, ctx)
        )
        replay_refutation(back, (), d)
        replayed += 1
    assert replayed > 15
