"""End-to-end tests for the command-line interface.

Each test drives ``plurality.cli.main`` in-process with a real scenario
file and checks exit codes, stdout/stderr, and the files written to a
temporary directory.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from plurality.cli import (
    EXIT_DISCORD,
    EXIT_ERROR,
    EXIT_NOT_MINIMAL,
    EXIT_OK,
    main,
)
from plurality.runtime import TRACE_FORMAT

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def run_cli(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_scenario(tmp_path, capsys, name: str, *extra: str) -> tuple[int, str, Path]:
    trace = tmp_path / f"{name}.trace.json"
    code, out, err = run_cli(
        capsys, "run", str(SCENARIOS / f"{name}.plu"), "--trace", str(trace), *extra
    )
    assert err == ""
    return code, out, trace


# ---------------------------------------------------------------------------
# run


def test_run_writes_trace_and_exits_zero(tmp_path, capsys):
    code, out, trace = run_scenario(tmp_path, capsys, "fair")
    assert code == EXIT_OK
    assert trace.exists()
    doc = json.loads(trace.read_text())
    assert doc["format"] == TRACE_FORMAT
    assert f"trace written to {trace}" in out
    assert "x (action): published block" in out
    # The summary names the selected head balances.
    assert "A=20 B=20 F=0 W=10" in out


def test_run_discord_exits_two_and_writes_certificate(tmp_path, capsys):
    code, out, trace = run_scenario(tmp_path, capsys, "evidential_discord")
    assert code == EXIT_DISCORD
    cert_path = tmp_path / "evidential_discord.cert-0.json"
    assert cert_path.exists()
    assert f"certificate written to {cert_path}" in out
    doc = json.loads(cert_path.read_text())
    assert doc["candidate"]["authority"] == "Omega_X"
    assert [c["authority"] for c in doc["conflict"]] == ["Omega_Y"]


def test_run_defaults_to_trace_dir_env_var(tmp_path, capsys, monkeypatch):
    out_dir = tmp_path / "traces"
    monkeypatch.setenv("PLURALITY_TRACE_DIR", str(out_dir))
    code, out, err = run_cli(capsys, "run", str(SCENARIOS / "cadillac.plu"))
    assert code == EXIT_DISCORD
    assert (out_dir / "cadillac.trace.json").exists()
    assert (out_dir / "cadillac.cert-0.json").exists()
    assert err == ""


def test_run_defaults_to_cwd_without_env_var(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("PLURALITY_TRACE_DIR", raising=False)
    monkeypatch.chdir(tmp_path)
    code, _, _ = run_cli(capsys, "run", str(SCENARIOS / "evidential.plu"))
    assert code == EXIT_OK
    assert (tmp_path / "evidential.trace.json").exists()


def test_run_structured_prints_canonical_json(tmp_path, capsys):
    code, out, trace = run_scenario(tmp_path, capsys, "fair", "--format", "structured")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["format"] == TRACE_FORMAT
    assert "trace written" not in out
    # stdout and the file hold the same canonical bytes.
    assert out == trace.read_text()


def test_run_records_overrides_in_trace(tmp_path, capsys):
    code, _, trace = run_scenario(
        tmp_path, capsys, "fair", "--oracle", "prodigal", "--seed", "9"
    )
    assert code == EXIT_OK
    doc = json.loads(trace.read_text())
    assert doc["oracle"] == "prodigal"
    assert doc["seed"] == 9
    # Overrides never change the outcome of this scenario, only scheduling.
    selected = [c for c in doc["chains"] if c["selected"]]
    assert selected[0]["balances"] == {"A": 20, "B": 20, "F": 0, "W": 10}


def test_run_missing_scenario_is_an_error(tmp_path, capsys):
    code, out, err = run_cli(capsys, "run", str(tmp_path / "missing.plu"))
    assert code == EXIT_ERROR
    assert out == ""
    assert err.startswith("plurality: cannot read scenario")


def test_run_parse_error_is_reported_with_path(tmp_path, capsys):
    bad = tmp_path / "bad.plu"
    bad.write_text("agent A holds nonsense\n")
    code, _, err = run_cli(capsys, "run", str(bad))
    assert code == EXIT_ERROR
    assert "bad.plu" in err


def test_run_rejects_unknown_oracle(tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "run", str(SCENARIOS / "fair.plu"), "--oracle", "generous"
    )
    assert code == EXIT_ERROR
    assert "plurality:" in err


# ---------------------------------------------------------------------------
# explain


def test_explain_published_action(tmp_path, capsys):
    _, _, trace = run_scenario(tmp_path, capsys, "fair")
    code, out, _ = run_cli(capsys, "explain", str(trace), "y")
    assert code == EXIT_OK
    assert out.startswith("y (action): published")
    assert "block:" in out


def test_explain_discord_names_the_accountable(tmp_path, capsys):
    _, _, trace = run_scenario(tmp_path, capsys, "evidential_discord")
    code, out, _ = run_cli(capsys, "explain", str(trace), "a")
    assert code == EXIT_OK
    assert "discord certificate #0" in out
    assert "candidate: claim Omega_X: license(A)" in out
    assert "against:   claim Omega_Y: !license(A) (origin " in out
    assert "accountable: Omega_X, Omega_Y" in out


def test_explain_unknown_name_lists_records(tmp_path, capsys):
    _, _, trace = run_scenario(tmp_path, capsys, "fair")
    code, _, err = run_cli(capsys, "explain", str(trace), "nope")
    assert code == EXIT_ERROR
    assert "no record named 'nope'" in err
    assert "x, y, z" in err


def test_explain_rejects_non_trace_file(tmp_path, capsys):
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"format": "something-else"}))
    code, _, err = run_cli(capsys, "explain", str(other), "x")
    assert code == EXIT_ERROR
    assert TRACE_FORMAT in err


# ---------------------------------------------------------------------------
# check-certificate


def certificate_from_run(tmp_path, capsys, name: str) -> Path:
    code, _, _ = run_scenario(tmp_path, capsys, name)
    assert code == EXIT_DISCORD
    return tmp_path / f"{name}.cert-0.json"


def test_check_certificate_verifies_engine_output(tmp_path, capsys):
    cert = certificate_from_run(tmp_path, capsys, "evidential_discord")
    code, out, _ = run_cli(
        capsys,
        "check-certificate",
        str(cert),
        str(SCENARIOS / "evidential_discord.plu"),
    )
    assert code == EXIT_OK
    assert "certificate verified: claim Omega_X: license(A)" in out
    assert "conflicts with 1 stored claim(s)" in out
    assert "accountable: Omega_X, Omega_Y" in out


def test_check_certificate_uses_scenario_constraints(tmp_path, capsys):
    # The cadillac conflict is only contradictory together with the
    # one-condition-per-car constraint, so verification must load it.
    cert = certificate_from_run(tmp_path, capsys, "cadillac")
    code, out, _ = run_cli(
        capsys, "check-certificate", str(cert), str(SCENARIOS / "cadillac.plu")
    )
    assert code == EXIT_OK
    assert "accountable: Alice, Omega_IoT" in out


def test_check_certificate_detects_broken_replay(tmp_path, capsys):
    cert = certificate_from_run(tmp_path, capsys, "evidential_discord")
    doc = json.loads(cert.read_text())
    doc["refutation"]["steps"][0]["clause"] = [1]
    cert.write_text(json.dumps(doc))
    code, out, _ = run_cli(
        capsys,
        "check-certificate",
        str(cert),
        str(SCENARIOS / "evidential_discord.plu"),
    )
    assert code == EXIT_DISCORD
    assert out.startswith("replay failed:")


def test_check_certificate_detects_padded_conflict(tmp_path, capsys):
    cert = certificate_from_run(tmp_path, capsys, "evidential_discord")
    doc = json.loads(cert.read_text())
    doc["conflict"].append(
        {"authority": "Omega_Y", "body": "license(B)", "origin": "padding"}
    )
    cert.write_text(json.dumps(doc))
    code, out, _ = run_cli(
        capsys,
        "check-certificate",
        str(cert),
        str(SCENARIOS / "evidential_discord.plu"),
    )
    assert code == EXIT_NOT_MINIMAL
    assert out.startswith("conflict set is not minimal")


def test_check_certificate_rejects_malformed_file(tmp_path, capsys):
    bogus = tmp_path / "bogus.json"
    bogus.write_text("{ not json")
    code, _, err = run_cli(
        capsys, "check-certificate", str(bogus), str(SCENARIOS / "fair.plu")
    )
    assert code == EXIT_ERROR
    assert "malformed certificate" in err


# ---------------------------------------------------------------------------
# inspect-tree


def test_inspect_tree_marks_selected_chain(tmp_path, capsys):
    _, _, trace = run_scenario(tmp_path, capsys, "competitive_v2")
    code, out, _ = run_cli(capsys, "inspect-tree", str(trace))
    assert code == EXIT_OK
    lines = out.splitlines()
    assert any("genesis" in ln for ln in lines)
    assert any("tx a: W -(20)-> A" in ln for ln in lines)
    starred = [ln for ln in lines if ln.startswith("* head ")]
    assert len(starred) == 1
    assert "A=20 B=0 F=0 W=30" in starred[0]


# ---------------------------------------------------------------------------
# scenario outcomes through the CLI


@pytest.mark.parametrize(
    "name,expected",
    [
        ("fair", {"A": 20, "B": 20, "F": 0, "W": 10}),
        ("studious", {"A": 20, "F": 0, "S_A": 12, "School": 88, "W": 30}),
        ("evidential", {"A": 20, "F": 0, "W": 30}),
        ("competitive_v1", {"A": 20, "B": 0, "F": 0, "W": 30}),
        ("atomic_swap", {"Alice": 1, "Bob": 30, "Carol": 20}),
        ("atomic_swap_halting", {"Alice": 30, "Bob": 20, "Carol": 1}),
    ],
)
def test_scenario_final_balances(tmp_path, capsys, name, expected):
    code, _, trace = run_scenario(tmp_path, capsys, name)
    assert code == EXIT_OK
    doc = json.loads(trace.read_text())
    selected = [c for c in doc["chains"] if c["selected"]][0]
    for agent, balance in expected.items():
        assert selected["balances"].get(agent, 0) == balance


def test_competitive_v2_certificate_holds_both_rank_claims(tmp_path, capsys):
    cert = certificate_from_run(tmp_path, capsys, "competitive_v2")
    doc = json.loads(cert.read_text())
    texts = {doc["candidate"]["body"]} | {c["body"] for c in doc["conflict"]}
    assert texts == {"(rank(C, B) = 1)", "(rank(C, A) = 1)"}
    assert doc["candidate"]["authority"] == "Omega_s"
    code, _, _ = run_cli(
        capsys, "check-certificate", str(cert), str(SCENARIOS / "competitive_v2.plu")
    )
    assert code == EXIT_OK
