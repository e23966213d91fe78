"""Discord certificate serialization and independent replay checking.

The replayer deliberately does not reuse the resolution search: input
steps are checked semantically (the cited source formula must entail
the cited clause, verified by exhaustive assignment enumeration) and
resolution steps are checked syntactically.  The only code shared with
the engine is the formula evaluator and ground expansion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .logic import (
    Claim,
    DefinitionSet,
    DiscordCertificate,
    Formula,
    Not,
    ProofStep,
    Refutation,
    brute_force_satisfiable,
    eval_residual,
    formula_text,
    ground_expand,
    residual_atoms,
)

CERTIFICATE_FORMAT = "plurality-discord-certificate/1"


class CertificateError(Exception):
    pass


class ReplayFailed(CertificateError):
    """The refutation trace does not check out against its inputs."""


class NotMinimal(CertificateError):
    """Some proper subset of the conflict already contradicts itself."""


# ---------------------------------------------------------------------------
# Serialization


def claim_to_doc(c: Claim) -> dict:
    return {"authority": c.authority, "body": formula_text(c.body), "origin": c.origin}


def step_to_doc(s: ProofStep) -> dict:
    doc: dict = {"rule": s.rule, "clause": list(s.clause)}
    if s.rule == "input":
        if s.source[0] == "candidate":
            doc["source"] = "candidate"
        else:
            doc["source"] = f"{s.source[0]}:{s.source[1]}"
    else:
        doc["premises"] = list(s.premises)
    return doc


def certificate_to_doc(cert: DiscordCertificate) -> dict:
    r = cert.refutation
    return {
        "format": CERTIFICATE_FORMAT,
        "candidate": claim_to_doc(cert.candidate),
        "conflict": [claim_to_doc(c) for c in cert.conflict],
        "refutation": {
            "conclusion": formula_text(r.conclusion),
            "used_constraints": [formula_text(g) for g in r.used_constraints],
            "atoms": list(r.atoms),
            "steps": [step_to_doc(s) for s in r.steps],
        },
    }


def certificate_to_text(cert: DiscordCertificate) -> str:
    return json.dumps(certificate_to_doc(cert), sort_keys=True, indent=1) + "\n"


def _claim_from_doc(doc: dict, parse) -> Claim:
    return Claim(doc["authority"], parse(doc["body"]), doc.get("origin", "submitted"))


def _step_from_doc(doc: dict) -> ProofStep:
    clause = tuple(doc["clause"])
    if doc["rule"] == "input":
        raw = doc["source"]
        if raw == "candidate":
            source: tuple = ("candidate",)
        else:
            kind, _, idx = raw.partition(":")
            source = (kind, int(idx))
        return ProofStep("input", clause, source=source)
    return ProofStep("resolve", clause, premises=tuple(doc["premises"]))


def certificate_from_doc(doc: dict, parse) -> DiscordCertificate:
    """Rebuild a certificate; ``parse`` maps formula text back to an AST."""
    if doc.get("format") != CERTIFICATE_FORMAT:
        raise CertificateError(f"unrecognized certificate format {doc.get('format')!r}")
    r = doc["refutation"]
    candidate = _claim_from_doc(doc["candidate"], parse)
    refutation = Refutation(
        conclusion=parse(r["conclusion"]),
        used_claims=tuple(_claim_from_doc(c, parse) for c in doc["conflict"]),
        used_constraints=tuple(parse(g) for g in r["used_constraints"]),
        atoms=tuple(r["atoms"]),
        steps=tuple(_step_from_doc(s) for s in r["steps"]),
    )
    return DiscordCertificate(
        candidate=candidate,
        conflict=refutation.used_claims,
        refutation=refutation,
    )


def certificate_from_text(text: str, parse) -> DiscordCertificate:
    return certificate_from_doc(json.loads(text), parse)


# ---------------------------------------------------------------------------
# Replay


@dataclass
class _Ctx:
    atoms: tuple[str, ...]
    defs: DefinitionSet

    def literal_assignment(self, clause) -> dict[str, bool]:
        """The unique assignment of the clause's atoms falsifying it."""
        asg = {}
        for lit in clause:
            if not (0 < abs(lit) <= len(self.atoms)):
                raise ReplayFailed(f"literal {lit} indexes outside the atom table")
            asg[self.atoms[abs(lit) - 1]] = lit < 0
        return asg


def _entails_clause(source: Formula, clause, ctx: _Ctx) -> bool:
    """source |= clause, by enumerating assignments that falsify the clause."""
    residual = ground_expand(source, ctx.defs)
    fixed = ctx.literal_assignment(clause)
    free = [k for k in residual_atoms(residual) if k not in fixed]
    for bits in range(1 << len(free)):
        asg = dict(fixed)
        for i, name in enumerate(free):
            asg[name] = bool(bits >> i & 1)
        if eval_residual(residual, asg):
            return False  # a model of the source falsifies the clause
    return True


def replay_refutation(
    cert: DiscordCertificate,
    constraints: tuple[Formula, ...],
    defs: DefinitionSet,
) -> None:
    """Re-derive the certificate's conclusion from its own inputs.

    Raises ReplayFailed unless every input clause follows from the claim
    or constraint it cites, every resolution step is a correct resolvent
    of earlier steps, and the final step is the empty clause.
    """
    r = cert.refutation
    if not r.steps:
        raise ReplayFailed("empty refutation trace")
    if r.used_claims != cert.conflict:
        raise ReplayFailed("refutation claims do not match the conflict set")
    known = {formula_text(g) for g in constraints}
    for g in r.used_constraints:
        if formula_text(g) not in known:
            raise ReplayFailed(f"unknown constraint cited: {formula_text(g)}")
    if formula_text(r.conclusion) != formula_text(Not(cert.candidate.body)):
        raise ReplayFailed("conclusion is not the negation of the candidate body")

    ctx = _Ctx(r.atoms, defs)
    seen: list[tuple[int, ...]] = []
    for n, step in enumerate(r.steps):
        if step.rule == "input":
            kind = step.source[0]
            if kind == "claim":
                idx = step.source[1]
                if not 0 <= idx < len(cert.conflict):
                    raise ReplayFailed(f"step {n} cites missing claim {idx}")
                body = cert.conflict[idx].body
            elif kind == "constraint":
                idx = step.source[1]
                if not 0 <= idx < len(r.used_constraints):
                    raise ReplayFailed(f"step {n} cites missing constraint {idx}")
                body = r.used_constraints[idx]
            elif kind == "candidate":
                body = cert.candidate.body
            else:
                raise ReplayFailed(f"step {n} has unknown source {step.source!r}")
            if not _entails_clause(body, step.clause, ctx):
                raise ReplayFailed(
                    f"step {n}: clause {list(step.clause)} does not follow from its source"
                )
        elif step.rule == "resolve":
            a, b = step.premises
            if not (0 <= a < n and 0 <= b < n):
                raise ReplayFailed(f"step {n} resolves against later or missing steps")
            ca, cb = set(seen[a]), set(seen[b])
            want = set(step.clause)
            for pivot in sorted(ca):
                if -pivot in cb and (ca - {pivot}) | (cb - {-pivot}) == want:
                    break
            else:
                raise ReplayFailed(f"step {n} is not a resolvent of its premises")
        else:
            raise ReplayFailed(f"step {n} uses unknown rule {step.rule!r}")
        seen.append(step.clause)

    if r.steps[-1].clause != ():
        raise ReplayFailed("trace does not end in the empty clause")


def check_minimality(
    cert: DiscordCertificate,
    constraints: tuple[Formula, ...],
    defs: DefinitionSet,
    *,
    limit: int = 8,
    max_atoms: int = 22,
) -> bool:
    """Brute-force audit that no proper subset of the conflict suffices.

    Enumerates every proper subset of candidate + conflict and checks it
    satisfiable together with the constraints.  Skipped (returns False)
    when the conflict is larger than ``limit``.

    Assumes the store the certificate came from was itself consistent,
    which the runtime guarantees for published claims; against a broken
    store the blame cannot be pinned on the candidate and this audit
    (rightly) refuses the certificate.
    """
    members = cert.conflicting_claims
    if len(cert.conflict) > limit:
        return False
    n = len(members)
    full = (1 << n) - 1
    for mask in range(full):
        chosen = [members[i].body for i in range(n) if mask >> i & 1]
        sat = brute_force_satisfiable(list(chosen) + list(constraints), defs, max_atoms=max_atoms)
        if sat is None:
            raise NotMinimal(
                f"already contradictory without {n - bin(mask).count('1')} member(s)"
            )
    return True


def check_certificate(
    cert: DiscordCertificate,
    constraints: tuple[Formula, ...],
    defs: DefinitionSet,
    *,
    minimality_limit: int = 8,
) -> None:
    """Full audit: replay the refutation, then audit minimality."""
    replay_refutation(cert, constraints, defs)
    check_minimality(cert, constraints, defs, limit=minimality_limit)
