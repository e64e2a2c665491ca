import copy
import json

import pytest
import yaml

from hardrods import cli
from hardrods.config import ConfigError, ExperimentConfig, load_benchmark

TINY = {
    "replicas": 60,
    "epsilons": [0.1, 0.05, 0.02],
    "lln": {"replicas": 60},
    "euler": {"epsilon": 0.05},
    "diffusive": {"epsilon": 0.05, "correlation_replicas": 40, "field_replicas": 60},
    "oracle": {"cases": 50, "measures": 5},
}


def _merge(a, b):
    out = copy.deepcopy(a)
    for k, v in b.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


@pytest.fixture
def tiny_config(tmp_path):
    data = _merge(load_benchmark().resolved(), TINY)
    data.pop("out")
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_benchmark_config_targets():
    cfg = load_benchmark()
    from hardrods.measures import macro_params, v_eff, diffusivity
    p = macro_params(cfg["rho"], cfg.measure)
    assert (p.sigma, p.pi, p.rho_bar) == (1.0, 0.0, 0.5)
    assert v_eff(1.0, p) == 2.0
    assert diffusivity(-1.0, 1.0, cfg.measure) == 1.0
    assert cfg["epsilons"] == [0.1, 0.01, 0.001]
    assert len(cfg.test_functions) == 3


@pytest.mark.parametrize("patch, message", [
    ({"rho": -1.0}, "rho"),
    ({"epsilons": [0.01, 0.1]}, "decreasing"),
    ({"replicas": 1}, "replicas"),
    ({"bogus": 1}, "bogus"),
    ({"measure": [{"weight": 0.5, "velocity": 1.0, "length": 1.0}]}, "sum"),
    ({"test_functions": [{"kind": "sinc", "width": 1.0}]}, "kind"),
    ({"euler": {"transport_function": 7}}, "transport_function"),
])
def test_schema_rejections(patch, message):
    data = _merge(load_benchmark().resolved(), patch)
    with pytest.raises(ConfigError, match=message):
        ExperimentConfig(data)


def test_overrides():
    cfg = load_benchmark().override(seed=5, epsilon=0.02, replicas=100, out="x", center="asymptotic")
    assert cfg["seed"] == 5 and cfg["epsilons"] == [0.02] and cfg["euler"]["epsilon"] == 0.02
    assert cfg["replicas"] == 100 and cfg["out"] == "x" and cfg["center"] == "asymptotic"


def test_usage_errors(tmp_path, tiny_config):
    assert cli.main(["oracle", "--config", str(tmp_path / "missing.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("rho: [unclosed")
    assert cli.main(["oracle", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["oracle"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["oracle", "--config", str(tiny_config), "--seed", "-3"])
    assert e.value.code == 2


def test_statistical_failure_exit_code(tmp_path, tiny_config):
    data = yaml.safe_load(tiny_config.read_text())
    data["euler"]["transport_min_correlation"] = 1.5
    path = tmp_path / "strict.yaml"
    path.write_text(yaml.safe_dump(data))
    assert cli.main(["euler", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    lines = (tmp_path / "o" / "euler_verdicts.jsonl").read_text().splitlines()
    failed = [json.loads(s) for s in lines if not json.loads(s)["pass"]]
    assert [f["test_id"] for f in failed] == ["euler.transport_correlation[wide_bump][t=0.5]"]


def test_internal_error_exit_code(monkeypatch, tmp_path, tiny_config):
    def broken(cfg, threads=1):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli.RUNNERS, "oracle", broken)
    assert cli.main(["oracle", "--config", str(tiny_config), "--out", str(tmp_path)]) == 3


def test_inconsistent_parameters_are_config_errors(tmp_path, tiny_config):
    data = yaml.safe_load(tiny_config.read_text())
    data["test_functions"] = [{"kind": "gaussian_bump", "center": 0.0, "width": 1.0}]
    data["euler"]["fd_pair"] = [0, 0]
    data["euler"]["fd_step"] = 0.6
    path = tmp_path / "geom.yaml"
    path.write_text(yaml.safe_dump(data))
    assert cli.main(["euler", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("command", ["lln", "static-clt", "euler", "diffusive", "oracle"])
def test_artifacts_embed_config(command, tmp_path, tiny_config):
    out = tmp_path / "o"
    code = cli.main([command, "--config", str(tiny_config), "--out", str(out)])
    assert code in (0, 1)
    stem = command.replace("-", "_")
    csv_text = (out / f"{stem}.csv").read_text()
    assert csv_text.startswith(f"# command: {command}\n# seed: ")
    header = csv_text.splitlines()[3]
    assert header == "test_id,epsilon,t,label,estimate,target,stderr,lo,hi,score,pass"
    summary = json.loads((out / f"{stem}_summary.json").read_text())
    assert summary["config"]["seed"] == summary["seed"]
    assert summary["passed"] == (code == 0)
