"""Deterministic simulator for guarded token-transfer contracts.

Transfers between wallets are gated either by closed formulas evaluated
against chain state or by authority-endorsed claims admitted unless the
chain's claim store refutes them.  Conflicts come with minimal,
independently replayable certificates naming the accountable parties.

The usual entry points:

>>> from plurality import Engine, parse_scenario
>>> scenario = parse_scenario(open("scenarios/fair.plu").read(), name="fair")
>>> engine = Engine(scenario)
>>> trace = engine.run()
"""

from .blocktree import Block, BlockTree, OracleConfig, Token
from .certificates import (
    certificate_from_text,
    certificate_to_text,
    check_certificate,
    check_minimality,
    replay_refutation,
)
from .logic import (
    Claim,
    DefinitionSet,
    DiscordCertificate,
    Model,
    Refutation,
    brute_force_satisfiable,
    claim_text,
    formula_text,
    minimize_conflict,
    refute,
    store_consistent,
    term_text,
)
from .runtime import Engine, trace_human, trace_text
from .syntax import (
    Contract,
    ParseError,
    Scenario,
    parse_contract,
    parse_formula,
    parse_scenario,
    pretty_print,
)
from .validator import (
    ChainState,
    Validator,
    chain_claims_consistent,
    compute_state,
    proof_of_discord,
)

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockTree",
    "ChainState",
    "Claim",
    "Contract",
    "DefinitionSet",
    "DiscordCertificate",
    "Engine",
    "Model",
    "OracleConfig",
    "ParseError",
    "Refutation",
    "Scenario",
    "Token",
    "Validator",
    "brute_force_satisfiable",
    "certificate_from_text",
    "certificate_to_text",
    "chain_claims_consistent",
    "check_certificate",
    "check_minimality",
    "claim_text",
    "compute_state",
    "formula_text",
    "minimize_conflict",
    "parse_contract",
    "parse_formula",
    "parse_scenario",
    "pretty_print",
    "proof_of_discord",
    "refute",
    "replay_refutation",
    "store_consistent",
    "term_text",
    "trace_human",
    "trace_text",
]
