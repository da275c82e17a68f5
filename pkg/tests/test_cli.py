"""Command-line interface: JSON-line reports and exit-code contract."""

import json
import math

import numpy as np
import pytest

import boundkey as bk
from boundkey import cli
from boundkey.shots import FUNCTIONAL_VALUES, OUTCOMES

P1 = 2.0 - math.sqrt(2.0)


def run_cli(capsys, *argv):
    code = cli.run(list(argv))
    out = capsys.readouterr().out
    return code, [json.loads(line) for line in out.splitlines() if line.strip()]


def by_kind(records, kind):
    found = [r for r in records if r["record"] == kind]
    assert found, f"no {kind!r} record in {[r['record'] for r in records]}"
    return found[0]


def test_every_report_starts_with_a_header(capsys):
    code, records = run_cli(capsys, "key")
    assert code == 0
    head = records[0]
    assert head["record"] == "header"
    assert head["tool"] == "boundkey"
    assert head["command"] == "key"
    assert head["conventions"]["log_base"] == 2
    assert head["conventions"]["subsystem_order"] == "A B A' B'"
    assert head["conventions"]["transpose_cut"] == "B B'"


def test_gen_writes_a_loadable_state(capsys, tmp_path):
    path = tmp_path / "state.json"
    code, records = run_cli(capsys, "gen", "hadamard", "--out", str(path))
    assert code == 0
    state = by_kind(records, "state")
    assert abs(state["weight_correlated"] - P1) < 1e-12
    assert abs(state["bias_ratio"] - math.sqrt(2.0)) < 1e-12
    back = bk.load_state(path)
    assert np.array_equal(back.mat, bk.rho_h().mat)


def test_gen_identity_has_no_bias(capsys, tmp_path):
    path = tmp_path / "id.json"
    code, records = run_cli(capsys, "gen", "identity", "--out", str(path))
    assert code == 0
    state = by_kind(records, "state")
    assert abs(state["bias_ratio"] - 1.0) < 1e-12
    assert abs(state["weight_correlated"] - 0.5) < 1e-12


def test_key_report_values(capsys):
    code, records = run_cli(capsys, "key")
    assert code == 0
    bounds = by_kind(records, "key_bounds")
    assert abs(bounds["dw_squeezed"] - 0.0213399156498) < 1e-10
    assert abs(bounds["twirl_hashing"] - 0.0213399156498) < 1e-10
    assert abs(bounds["dw_conservative"] + 0.9786600843501547) < 1e-10
    assert abs(bounds["info_minus_twirl_entropy"] + 0.9573201687) < 1e-9
    assert bounds["info_minus_twirl_entropy"] < 0.0 < bounds["twirl_hashing"]
    rec = by_kind(records, "recurrence")
    assert not rec["improves"]
    assert abs(rec["acceptance"] - (9.0 - 6.0 * math.sqrt(2.0))) < 1e-10
    assert abs(rec["per_copy_rate"] - 0.0210273280072) < 1e-10


def test_ppt_report_with_scans(capsys):
    code, records = run_cli(
        capsys, "ppt", "--extremality", "--robustness", "--grid", "11"
    )
    assert code == 0
    assert by_kind(records, "membership")["is_ppt"]
    assert by_kind(records, "invariance")["max_deviation"] < 1e-10
    extremality = [r for r in records if r["record"] == "extremality"]
    assert len(extremality) == 11
    npt_flags = [r["is_npt"] for r in extremality]
    assert sum(npt_flags) == 10  # only the flagship weight itself is PPT
    summary = by_kind(records, "robustness_summary")
    assert abs(summary["threshold_noise"] - 0.0040882) < 5e-6
    assert summary["largest_positive_noise"] <= summary["threshold_noise"]


def test_observables_report(capsys):
    code, records = run_cli(capsys, "observables")
    assert code == 0
    values = {
        r["observable"]: r["value"] for r in records if r["record"] == "expectation"
    }
    assert abs(values["O1"] - (3.0 - 2.0 * math.sqrt(2.0))) < 1e-10
    assert abs(values["R1"] - P1) < 1e-10
    assert abs(values["I1"]) < 1e-10
    comparison = by_kind(records, "expansion_comparison")
    assert comparison["differing_terms"] == 4
    assert abs(comparison["max_difference"] - 1.0 / (2.0 * math.sqrt(2.0))) < 1e-10


def test_settings_report(capsys):
    code, records = run_cli(capsys, "settings", "--targets", "key")
    assert code == 0
    cover = by_kind(records, "settings_cover")
    assert cover["feasible"]
    assert cover["settings"] == ["zzxx"]
    assert cover["exhausted_up_to"] == 1


def test_er_report(capsys):
    code, records = run_cli(
        capsys, "er", "--budget-seconds", "5", "--restarts", "4", "--seed", "0"
    )
    assert code == 0
    found = by_kind(records, "er_upper_bound")
    assert found["value"] >= 0.0213399 - 1e-6
    assert found["value"] <= 0.15
    assert found["restarts_completed"] >= 1


def test_simulate_then_certify_roundtrip(capsys, tmp_path):
    path = tmp_path / "shots.tsv"
    code, records = run_cli(
        capsys, "simulate", "--shots", "20000", "--seed", "3", "--out", str(path)
    )
    assert code == 0
    written = by_kind(records, "records")
    assert written["settings"][0] == "zzxx"
    assert path.exists()

    code, records = run_cli(capsys, "certify", "--records", str(path))
    assert code == 0
    estimates = by_kind(records, "estimates")
    assert abs(estimates["corr_weight"] - P1) < 0.02
    certification = by_kind(records, "certification")
    assert certification["certified_bound"] <= certification["raw_bound"]
    assert not certification["positive"]  # 20k shots cannot certify positivity


def test_certify_rejects_foreign_scheme(capsys, tmp_path):
    path = tmp_path / "shots.tsv"
    code, _ = run_cli(
        capsys, "simulate", "--shots", "1000", "--seed", "1", "--out", str(path)
    )
    assert code == 0
    text = path.read_text().splitlines()
    tampered = [
        line.replace(line.split("scheme=")[1].split()[0], "0" * 64)
        if line.startswith("# scheme=")
        else line
        for line in text
    ]
    path.write_text("\n".join(tampered) + "\n")
    code, records = run_cli(capsys, "certify", "--records", str(path))
    assert code == 2
    assert records[-1]["record"] == "error"


def test_malformed_inputs_exit_two(capsys, tmp_path):
    bad_state = tmp_path / "bad.json"
    bad_state.write_text("{this is not json")
    code, records = run_cli(capsys, "ppt", "--state", str(bad_state))
    assert code == 2
    assert records[-1]["record"] == "error"

    code, records = run_cli(capsys, "certify", "--records", str(tmp_path / "nope.tsv"))
    assert code == 2

    not_unitary = tmp_path / "matrix.json"
    not_unitary.write_text(json.dumps({"matrix": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]}))
    code, records = run_cli(capsys, "gen", str(not_unitary), "--out", str(tmp_path / "x.json"))
    assert code == 2


def test_inconsistent_records_exit_three(capsys, tmp_path, flagship, full_scheme):
    # concentrate every setting's shots on the outcome that pushes the
    # coherence estimate past any spectrum the correlation weight allows
    digest = bk.scheme_hash(full_scheme)
    n = len(full_scheme.settings)
    coeff_r1 = np.asarray(full_scheme.coefficients)[1].reshape(n, 16)
    shots = 100000
    records = []
    for i, setting in enumerate(full_scheme.settings):
        if setting.name() == "zzxx":
            outcome = (1, -1, 1, 1)  # anticorrelated key bits
        else:
            outcome = OUTCOMES[int(np.argmax(coeff_r1[i] @ FUNCTIONAL_VALUES))]
        records.append(bk.ShotRecord(setting, {outcome: shots}, shots))
    path = tmp_path / "adversarial.tsv"
    bk.save_records(records, path, seed=0, scheme_digest=digest)

    code, out = run_cli(capsys, "certify", "--records", str(path))
    assert code == 3
    error = out[-1]
    assert error["record"] == "error"
    assert error["kind"] == "certification_infeasible"
