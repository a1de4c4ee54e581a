import json

import pytest

from nslab import cli
from nslab.config import ConfigError, defaults, load_config, parse_config


def test_parse_types_comments_and_aliases():
    cfg = parse_config(
        """
        # leading comment
        preset = fd       # alias
        N = 8
        eps = 0.25
        counterterms = off
        eps_ladder = 0.4, 0.2,0.1
        variants = approx, reference
        """
    )
    assert cfg == {
        "preset": "finite_difference",
        "N": 8,
        "eps": 0.25,
        "counterterms": False,
        "eps_ladder": (0.4, 0.2, 0.1),
        "variants": ("approx", "reference"),
    }


@pytest.mark.parametrize(
    "text, line, key",
    [
        ("N = 8\nfoo = 1\n", 2, "foo"),
        ("N = 8\n\nN = 9\n", 3, "N"),
        ("N 8\n", 1, None),
        ("eps =\n", 1, "eps"),
        ("eps = nan\n", 1, "eps"),
        ("N = 2.5\n", 1, "N"),
        ("counterterms = maybe\n", 1, "counterterms"),
        ("preset = spectral\n", 1, "preset"),
        ("variants = approx, nope\n", 1, "variants"),
    ],
)
def test_parse_errors_name_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "run.cfg")
    assert info.value.line == line
    assert info.value.key == key
    assert str(info.value).startswith(f"run.cfg:{line}")


def test_load_config_layers(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("seed = 3\nN = 4\n")
    cfg = load_config(p, {"seed": 11, "out_dir": None})
    assert cfg["seed"] == 11 and cfg["N"] == 4
    assert cfg["out_dir"] == defaults()["out_dir"]
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def _cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_cli_constants_writes_manifest(tmp_path, capsys):
    cfg = _cfg(tmp_path, "preset = galerkin\neps_ladder = 0.4, 0.2\n")
    out = tmp_path / "o"
    assert cli.main(["constants", "--config", cfg, "--out", str(out), "--seed", "7"]) == 0
    man = json.loads((out / "constants_manifest.json").read_text())
    assert man["subcommand"] == "constants"
    assert man["seed"] == 7 and man["config"]["seed"] == 7
    assert man["all_asserted_pass"] is True
    for fn in man["outputs"]:
        assert (out / fn).is_file()
    assert "constants_checks.csv" in man["outputs"]
    assert "PASS" in capsys.readouterr().out


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = _cfg(tmp_path, "N = 4\nbogus = 1\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert ":2: key 'bogus'" in err


def test_cli_bad_model_parameter_is_config_error(tmp_path):
    cfg = _cfg(tmp_path, "L0 = -1\n")
    assert cli.main(["constants", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_cli_seed_must_be_u64(tmp_path):
    cfg = _cfg(tmp_path, "N = 4\n")
    with pytest.raises(SystemExit) as info:
        cli.main(["simulate", "--config", cfg, "--seed", str(2**64)])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        cli.main(["simulate", "--config", cfg, "--seed", "-1"])


def test_cli_failed_property_exit_code(tmp_path):
    # two seeds at a tiny cube: the discrepancy ladder is not monotone here
    cfg = _cfg(tmp_path, "N = 4\nT = 0.01\ndt = 0.005\nseeds = 2\neps_ladder = 0.4, 0.2\n")
    code = cli.main(["converge", "--config", cfg, "--out", str(tmp_path)])
    man = json.loads((tmp_path / "converge_manifest.json").read_text())
    assert code == (0 if man["all_asserted_pass"] else 1)
    rows = (tmp_path / "converge_checks.csv").read_text().splitlines()
    header = rows[0].split(",")
    assert {"name", "kind", "passed"} <= set(header)
    assert len(rows) >= 2


def test_cli_simulate_outputs_are_deterministic(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    cfg = _cfg(tmp_path, "N = 4\nT = 0.02\ndt = 0.005\nvariants = approx, reference\n")
    blobs = []
    for out in ("x", "y"):
        assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / out), "--seed", "5"]) == 0
        man = json.loads((tmp_path / out / "simulate_manifest.json").read_text())
        assert man["timestamp"] == "2023-11-14T22:13:20Z"
        names = man["outputs"] + ["simulate_manifest.json"]
        blobs.append({fn: (tmp_path / out / fn).read_bytes() for fn in names})
    x, y = blobs
    assert x.keys() == y.keys()
    for fn in x:
        if fn.endswith("_manifest.json"):
            continue
        assert x[fn] == y[fn], fn
    # the manifests differ only in out_dir
    mx = json.loads(x["simulate_manifest.json"])
    my = json.loads(y["simulate_manifest.json"])
    assert mx["run_id"] == my["run_id"]
    mx["config"].pop("out_dir"), my["config"].pop("out_dir")
    assert mx == my


def test_run_id_depends_on_config_not_output():
    a = defaults()
    b = dict(a, out_dir="elsewhere")
    c = dict(a, seed=1)
    assert cli.run_id("simulate", a) == cli.run_id("simulate", b)
    assert cli.run_id("simulate", a) != cli.run_id("simulate", c)
    assert cli.run_id("simulate", a) != cli.run_id("converge", a)


def test_write_csv_union_header_and_formatting(tmp_path):
    p = tmp_path / "t.csv"
    cli.write_csv(p, [{"a": 1, "b": True}, {"a": 0.1, "c": "x"}])
    assert p.read_text() == "a,b,c\n1,true,\n0.1,,x\n"


def test_write_json_handles_non_finite(tmp_path):
    p = tmp_path / "t.json"
    cli.write_json(p, {"x": float("inf"), "y": [1.0, float("nan")]})
    assert json.loads(p.read_text()) == {"x": "inf", "y": [1.0, "nan"]}
