from __future__ import annotations

import json

import pandas as pd
import pytest

from app.benchmarks.builder import build_benchmark
from app.main import main
from app.models.schemas import OutcomeClass, OutcomeReason
from app.services.storage_service import CampaignStore


def test_asm_writes_flat_image(tmp_path):
    src = tmp_path / "prog.s"
    src.write_text("MOVI R1, 3\nOUT R1\nHALT\n")
    out = tmp_path / "prog.bin"
    assert main(["asm", str(src), "-o", str(out), "--listing"]) == 0
    assert out.read_bytes()[:4] == (0x1010_0003).to_bytes(4, "little")


def test_asm_error_exit_code(tmp_path):
    src = tmp_path / "bad.s"
    src.write_text("FROB R1\n")
    assert main(["asm", str(src)]) == 1


def test_asm_missing_source(tmp_path):
    assert main(["asm", str(tmp_path / "nope.s")]) == 3


def test_run_bundled_benchmark():
    assert main(["run", "qsort"]) == 0


def test_run_source_and_budget(tmp_path):
    src = tmp_path / "spin.s"
    src.write_text("loop: JMP loop\n")
    assert main(["run", str(src), "--budget", "50"]) == 1
    src.write_text("MOVI R1, 1\nOUT R1\nHALT\n")
    assert main(["run", str(src), "--mem-size", "4096"]) == 0


def test_usage_errors():
    assert main([]) == 1
    assert main(["campaign", "--location", "nowhere"]) == 1
    assert main(["campaign", "--benchmark", "qsort"]) == 1


def test_invalid_config_values(tmp_path):
    assert main(["campaign", "--benchmark", "qsort", "--location", "pc", "--faults", "0",
                 "--out", str(tmp_path)]) == 1
    assert main(["campaign", "--benchmark", "lu", "--location", "pc", "--faults", "2",
                 "--out", str(tmp_path)]) == 1


@pytest.fixture(scope="module")
def campaign_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "hash-registers"
    code = main(["campaign", "--benchmark", "hash", "--location", "registers", "--faults", "12",
                 "--seed", "5", "--out", str(out)])
    assert code == 0
    return out


def test_campaign_writes_directory(campaign_dir):
    store = CampaignStore(campaign_dir)
    assert store.exists()
    assert len(store.load_records()) == 12
    assert store.load_manifest().seed == 5


def test_campaign_rerun_is_byte_identical(campaign_dir, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"benchmark": "hash", "location_class": "registers",
                                  "num_faults": 12, "seed": 5}))
    again = tmp_path / "again"
    assert main(["campaign", str(config), "--out", str(again)]) == 0
    assert (again / "records.jsonl").read_bytes() == (campaign_dir / "records.jsonl").read_bytes()
    assert (again / "faults.csv").read_bytes() == (campaign_dir / "faults.csv").read_bytes()


def test_campaign_config_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["campaign", str(bad)]) == 1
    assert main(["campaign", str(tmp_path / "missing.json")]) == 3


def test_analyze_and_report(campaign_dir):
    assert main(["analyze", str(campaign_dir), "--bins", "5"]) == 0
    breakdown = pd.read_csv(campaign_dir / "breakdown.csv")
    row = breakdown.iloc[0]
    assert abs(row.benign_pct + row.sdc_pct + row.other_pct - 100) < 0.1
    records = CampaignStore(campaign_dir).load_records()
    scatter = pd.read_csv(campaign_dir / "pca_scatter.csv")
    assert len(scatter) == sum(r.outcome.value != "other" and r.events_complete for r in records)
    assert list(scatter.columns) == ["fault_id", "outcome", "pc1", "pc2"]
    hist = pd.read_csv(campaign_dir / "cycles_hist.csv")
    assert len(hist) == 5
    assert main(["report", str(campaign_dir)]) == 0


def test_analyze_empty_directory(tmp_path):
    assert main(["analyze", str(tmp_path)]) == 3
    assert main(["report", str(tmp_path)]) == 3


def test_analyze_empty_records(tmp_path, campaign_dir):
    target = tmp_path / "empty"
    target.mkdir()
    (target / "manifest.json").write_bytes((campaign_dir / "manifest.json").read_bytes())
    (target / "records.jsonl").write_text("")
    assert main(["analyze", str(target)]) != 0


def test_analyze_all_other_records_still_writes_breakdown(tmp_path, campaign_dir):
    target = tmp_path / "all-other"
    target.mkdir()
    (target / "manifest.json").write_bytes((campaign_dir / "manifest.json").read_bytes())
    records = [
        r.model_copy(update={"outcome": OutcomeClass.OTHER, "reason": OutcomeReason.TIMEOUT,
                             "events_complete": False})
        for r in CampaignStore(campaign_dir).load_records()
    ]
    (target / "records.jsonl").write_text("".join(r.model_dump_json() + "\n" for r in records))
    assert main(["analyze", str(target)]) == 0
    assert pd.read_csv(target / "breakdown.csv")["other_pct"].tolist() == [100.0]
    assert pd.read_csv(target / "pca_scatter.csv").empty
    assert pd.read_csv(target / "cycles_hist.csv").empty


def test_grid_analyze(tmp_path):
    root = tmp_path / "grid"
    for loc in ("registers", "memory"):
        assert main(["campaign", "--benchmark", "hash", "--location", loc, "--faults", "12",
                     "--out", str(root / f"hash-{loc}")]) == 0
    assert main(["analyze", str(root)]) == 0
    combined = pd.read_csv(root / "breakdown.csv")
    assert list(combined["location"]) == ["memory", "registers"]
    assert main(["report", str(root)]) == 0


def test_golden_command(tmp_path):
    out = tmp_path / "golden.json"
    assert main(["golden", "dijkstra", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert bytes.fromhex(data["output_hex"]) == build_benchmark("dijkstra").expected_output
    assert main(["golden", "nope", "--out", str(out)]) == 1
