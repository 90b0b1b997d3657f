import json
import logging

import pytest

from app.cli import main
from app.cli.commands import load_config
from app.cli.parser import build_parser
from app.core.config import settings
from app.core.error_handling import EXIT_INCONCLUSIVE, EXIT_OK, EXIT_VIOLATION, ParseError


def stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_word_command(capsys):
    assert main(["word", "aabAA"]) == EXIT_OK
    payload = stdout_json(capsys)
    assert payload["necklace"] == "b"
    assert payload["conjugator"] == "aa"
    assert payload["alpha"] == 2


def test_debug_log_names_environment(capsys, caplog):
    caplog.set_level("DEBUG", logger="app")
    assert main(["word", "ab", "--log-level", "debug"]) == EXIT_OK
    assert any(settings.APP_ENV in record.getMessage() and "word" in record.getMessage() for record in caplog.records)
    logging.getLogger("app").setLevel(settings.LOG_LEVEL)


def test_parse_error_exit_code(capsys):
    assert main(["word", "ab1"]) == EXIT_VIOLATION
    assert '"error": "parse_error"' in capsys.readouterr().err


def test_aut_command(capsys):
    assert main(["aut", "--images", "ab,b", "--power", "3"]) == EXIT_OK
    [result] = stdout_json(capsys)
    assert result["images"]["images"] == ["abbb", "b"]
    assert result["decomposition_length"] == 3
    assert result["determinant"] == 1


def test_aut_without_input(capsys):
    assert main(["aut"]) == EXIT_VIOLATION


def test_bcc_command(tmp_path, capsys):
    assert main(["bcc", "--depth", "4", "--samples", "0", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "bcc_rank2_L4.json").read_text())
    assert report["lemma1_cyclic_constant"] == 4


def test_tau_command_writes_certificates(tmp_path, capsys):
    code = main(["tau", "--images", "b,ab", "--images", "b,a", "--out", str(tmp_path), "--workers", "2"])
    assert code == EXIT_OK
    summary = stdout_json(capsys)
    assert [item["method"] for item in summary] == ["case1_exponential", "finite_order"]
    certificate = json.loads((tmp_path / "tau_0.json").read_text())
    assert certificate["status"] == "ok"
    assert certificate["input"] == {"rank": 2, "images": ["b", "ab"]}
    assert (tmp_path / "tau_0_growth.csv").read_text().startswith("k,L_k,alpha_tilde_k")


def test_tau_inconclusive_exit_code(tmp_path, capsys):
    code = main(["tau", "--images", "b,ab", "--k-max", "3", "--out", str(tmp_path)])
    assert code == EXIT_INCONCLUSIVE
    certificate = json.loads((tmp_path / "tau_0.json").read_text())
    assert certificate["status"] == "inconclusive"


def test_config_file_and_overrides(tmp_path):
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({"rank": 3, "samples": 10, "automorphisms": [{"rank": 3, "images": ["ab", "b", "c"]}]}))
    args = build_parser().parse_args(["bcc", "--config", str(config_path), "--samples", "25"])
    config = load_config(args)
    assert config.rank == 3
    assert config.samples == 25
    assert len(config.automorphisms) == 1


def test_invalid_config_is_a_parse_error(tmp_path):
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({"rank": 1}))
    args = build_parser().parse_args(["bcc", "--config", str(config_path)])
    with pytest.raises(ParseError):
        load_config(args)


def test_upg_report(tmp_path, capsys):
    code = main(["upg", "--fixture", "three_stratum", "--k-max", "20", "--out", str(tmp_path)])
    assert code == EXIT_OK
    summary = stdout_json(capsys)
    assert summary["closed_form_mismatches"] == 0
    report = json.loads((tmp_path / "upg_three_stratum.json").read_text())
    assert report["witness"]["slope"] == 3.0
    assert "E3-E2" in report["closed_forms"]


def test_upg_identity_has_no_witness(tmp_path, capsys):
    assert main(["upg", "--fixture", "identity", "--out", str(tmp_path)]) == EXIT_INCONCLUSIVE


def test_upg_iterate(capsys):
    assert main(["upg", "iterate", "--fixture", "dehn_twist", "--path", "E2", "--k", "4"]) == EXIT_OK
    assert stdout_json(capsys)["path"] == ["E2", "E1", "E1", "E1", "E1"]


def test_upg_invalid_fixture(tmp_path, capsys):
    fixture = tmp_path / "bad.json"
    fixture.write_text(
        json.dumps(
            {
                "vertices": ["v"],
                "edges": [
                    {"name": "E1", "from": "v", "to": "v", "suffix": ["E2"]},
                    {"name": "E2", "from": "v", "to": "v", "suffix": []},
                ],
            }
        )
    )
    assert main(["upg", "validate", "--fixture", str(fixture)]) == EXIT_VIOLATION
    assert main(["upg", "witness", "--fixture", str(fixture)]) == EXIT_VIOLATION


def test_oracle_build_and_norm(tmp_path, capsys):
    assert main(["oracle", "build", "--radius", "2", "--out", str(tmp_path)]) == EXIT_OK
    built = stdout_json(capsys)
    assert built["layers"][:2] == [1, 7]
    snapshot = tmp_path / "ball_rank2_R2.jsonl"
    assert snapshot.exists()
    assert main(["oracle", "norm", "--ball", str(snapshot), "--images", "b,ab"]) == EXIT_OK
    assert stdout_json(capsys)["norms"][0]["norm"] == 2


@pytest.mark.slow
def test_verify_command(tmp_path, capsys):
    code = main(
        ["verify", "--depth", "5", "--samples", "50", "--maxlen", "12", "--radius", "2", "--out", str(tmp_path)]
    )
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "verify_summary.json").read_text())
    assert summary["passed"] is True
    names = {suite["name"] for suite in summary["suites"]}
    assert names == {"lemma1_cyclic", "lemma1_word", "doubling", "oracle_bounds", "dehn_twist"}
    twist = next(suite for suite in summary["suites"] if suite["name"] == "dehn_twist")
    assert twist["checked"] == 2 and twist["failures"] == 0
    assert summary["details"]["sharpness"]["probe_constant"] == summary["details"]["checked_constant"] - 1


def test_verify_flags_empty_suites(tmp_path, capsys):
    code = main(["verify", "--depth", "3", "--samples", "0", "--radius", "0", "--out", str(tmp_path)])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "verify_summary.json").read_text())
    assert all(suite["warning"] == "empty suite" for suite in summary["suites"])
