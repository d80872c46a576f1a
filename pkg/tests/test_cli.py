import json

import pytest

from cascade_forensics.cli import STAGE_ORDER, main
from cascade_forensics.config import ConfigError, PipelineConfig, from_dict, load_config


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, [json.loads(l) for l in out.splitlines() if l.strip()], err


@pytest.fixture
def fixture_dir(tmp_path, capsys):
    code, lines, _ = run(capsys, "synth", "--out", str(tmp_path / "fx"), "--seed", "0")
    assert code == 0 and lines[0]["stage"] == "synth"
    return tmp_path / "fx"


def test_all_then_cached(fixture_dir, capsys):
    cfg = str(fixture_dir / "config.json")
    code, lines, _ = run(capsys, "all", "--config", cfg)
    assert code == 0
    assert [l["stage"] for l in lines] == list(STAGE_ORDER)
    assert not any(l["cached"] for l in lines)
    for name in STAGE_ORDER:
        assert (fixture_dir / "artifacts" / name / "manifest.json").exists()
    rdd = (fixture_dir / "artifacts" / "rdd").iterdir()
    assert {p.name for p in rdd} >= {"declining.csv", "increasing.csv", "manifest.json"}
    code, lines, _ = run(capsys, "rdd", "--config", cfg)
    assert code == 0 and lines[0]["cached"]
    code, lines, _ = run(capsys, "rdd", "--config", cfg, "--p-max", "0.1")
    assert code == 0 and not lines[0]["cached"]


def test_stage_order_composes(fixture_dir, tmp_path, capsys):
    cfg = str(fixture_dir / "config.json")
    for name in STAGE_ORDER:
        code, _, _ = run(capsys, name, "--config", cfg, "--out", str(tmp_path / "one"))
        assert code == 0
    code, _, _ = run(capsys, "all", "--config", cfg, "--out", str(tmp_path / "two"))
    for name in STAGE_ORDER:
        a = json.loads((tmp_path / "one" / name / "manifest.json").read_text())
        b = json.loads((tmp_path / "two" / name / "manifest.json").read_text())
        assert a == b


def test_missing_upstream_names_stage(fixture_dir, capsys):
    cfg = str(fixture_dir / "config.json")
    assert run(capsys, "ingest", "--config", cfg)[0] == 0
    code, _, err = run(capsys, "rdd", "--config", cfg)
    assert code == 2
    report = json.loads(err.strip().splitlines()[-1])
    assert report["required_stage"] == "cohort" and report["status"] == "error"


def test_bad_config_is_reported(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"records": "x.jsonl", "nonsense": 1}))
    code, _, err = run(capsys, "ingest", "--config", str(p))
    assert code == 1 and "nonsense" in err
    p.write_text(json.dumps({"records": "missing.jsonl"}))
    code, _, err = run(capsys, "ingest", "--config", str(p))
    assert code == 1 and "does not exist" in err
    code, _, err = run(capsys, "ingest", "--config", str(p), "--keep-fraction", "1.5")
    assert code == 1 and "keep_fraction" in err


def test_config_resolution(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"records": "r.jsonl", "detector": {"epochs": 2}}))
    cfg = load_config(p)
    assert cfg.records == str(tmp_path / "r.jsonl") and cfg.detector.epochs == 2
    with pytest.raises(ConfigError):
        from_dict({"detector": {"nope": 1}})
    base = PipelineConfig()
    assert base.digest(("seed",)) == PipelineConfig(out="elsewhere").digest(("seed",))
    assert base.digest(("seed",)) != PipelineConfig(seed=1).digest(("seed",))
    with pytest.raises(ConfigError):
        PipelineConfig(intervention_date="July").validate()


def test_synth_kinds(tmp_path, capsys):
    code, lines, _ = run(capsys, "synth", "--kind", "step-series", "--param", "sigma=0.1",
                         "--out", str(tmp_path / "s"))
    assert code == 0 and lines[0]["files"] == ["series.csv", "truth.json"]
    code, _, err = run(capsys, "synth", "--kind", "step-series", "--param", "bogus=1", "--out", str(tmp_path / "t"))
    assert code == 1 and "bogus" in err
