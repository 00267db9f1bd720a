import csv
import json

import pytest

from fpp.errors import ConfigError
from fpp.growth import Ball
from fpp.harness import cli
from fpp.harness.config import _DEFAULTS, EXPERIMENTS, OUT_ENV, load_config
from fpp.harness.runner import run, science_echo
from fpp.weights import WeightDistribution, WeightField


def read_csv(path):
    lines = path.read_text().splitlines()
    echo = json.loads("\n".join(l[2:] for l in lines if l.startswith("# ")))
    body = [l for l in lines if not l.startswith("# ")]
    rows = list(csv.reader(body))
    return echo, rows[0], rows[1:]


def cfg_text(exp, body=""):
    return f'experiment = "{exp}"\n' + body


# ---- config

def test_defaults_load_for_every_experiment():
    for exp in EXPERIMENTS:
        cfg = load_config(text=cfg_text(exp))
        assert cfg.experiment == exp and cfg.d == 2


@pytest.mark.parametrize("body,msg", [
    ("bogus = 1\n", "unknown config key"),
    ("[gadget]\nzzz = 2\n", "gadget.zzz"),
    ("dimension = 1\n", "dimension"),
    ('[distribution]\nkind = "nope"\n', "distribution"),
    ('[distribution]\nkind = "two-point"\na = 0.0\nb = 1.0\np_a = 0.6\n', "p_c"),
    ("[times]\ngrid = [-1.0]\n", "times"),
    ("[output]\nworkers = 0\n", "workers"),
    ("[gadget]\np = 0.5\n", "gadget.p"),
    ('[gadget]\nn_mode = "huge"\n', "n_mode"),
    ("[seeds]\nlist = []\n", "no seeds"),
    ("gadget = 3\n", "must be a table"),
])
def test_bad_configs_are_rejected(body, msg):
    with pytest.raises(ConfigError, match=msg):
        load_config(text=cfg_text("holes", body))


def test_experiment_name_checks():
    with pytest.raises(ConfigError):
        load_config(text="")
    with pytest.raises(ConfigError):
        load_config(text=cfg_text("holes"), experiment="shape")
    with pytest.raises(ConfigError):
        load_config(text=cfg_text("nope"))
    with pytest.raises(ConfigError):
        load_config(text="experiment = ")


def test_flag_overrides_win(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(cfg_text("holes", "[seeds]\nbase = 4\ncount = 3\n[times]\ngrid = [9.0]\n"))
    cfg = load_config(p)
    assert cfg.seeds == [4, 5, 6] and cfg.times == [9.0]
    cfg = load_config(p, overrides={"seed": 11, "t": [1.0, 2.0], "out": "x", "workers": 3})
    assert cfg.seeds == [11] and cfg.times == [1.0, 2.0]
    assert str(cfg.out_dir) == "x" and cfg.workers == 3


def test_distribution_table_replaces_default():
    cfg = load_config(text=cfg_text("holes", '[distribution]\nkind = "uniform"\nlo = 1.0\nhi = 2.0\n'))
    assert cfg.distribution == WeightDistribution.uniform(1.0, 2.0)


def test_out_dir_env_fallback(monkeypatch):
    monkeypatch.setenv(OUT_ENV, "/tmp/somewhere")
    assert str(load_config(text=cfg_text("holes")).out_dir) == "/tmp/somewhere"
    cfg = load_config(text=cfg_text("holes", '[output]\ndir = "here"\n'))
    assert str(cfg.out_dir) == "here"


def test_log_n_mode():
    cfg = load_config(text=cfg_text("plant", '[gadget]\nn_mode = "log"\nc12 = 10.0\n'))
    assert cfg.gadget_n(1000.0) == 26


def _paths(d, pre=""):
    for k, v in d.items():
        if isinstance(v, dict) and k != "distribution":
            yield from _paths(v, f"{pre}{k}.")
        else:
            yield pre + k


def test_echo_names_every_parameter():
    cfg = load_config(text=cfg_text("shape"))
    echo = cfg.echo()
    assert echo["experiment"] == "shape"
    # seeds.list is the alternative to base/count and only echoed when used
    assert set(_paths(_DEFAULTS)) - {"seeds.list"} <= set(_paths(echo))
    sci = science_echo(cfg)
    assert set(_paths(sci)) == set(_paths(echo)) - {"output.dir", "output.workers"}


# ---- runs

def holes_cfg(tmp_path, body, **ov):
    return load_config(text=cfg_text("holes", body), overrides={"out": tmp_path, **ov})


def test_constant_weights_have_no_holes(tmp_path):
    cfg = holes_cfg(tmp_path, '[distribution]\nkind = "constant"\nc = 1.0\n'
                              "[seeds]\ncount = 3\n[times]\ngrid = [5.0]\n")
    man = run(cfg)
    assert man.exit_code == 0
    s = json.loads((tmp_path / "summary.json").read_text())["summary"]
    assert s["mean_N"] == [0.0] and s["max_M"] == [0]
    _, header, rows = read_csv(tmp_path / "holes.csv")
    summ = [r for r in rows if r[0] == "summary"]
    assert len(summ) == 3
    assert all(r[header.index("N")] == "0" and r[header.index("M")] == "0" for r in summ)


def test_csv_echo_is_the_science_config(tmp_path):
    cfg = holes_cfg(tmp_path, "[times]\ngrid = [8.0]\n")
    run(cfg)
    echo, _, _ = read_csv(tmp_path / "holes.csv")
    assert echo == json.loads(json.dumps(science_echo(cfg)))
    assert json.loads((tmp_path / "summary.json").read_text())["config"] == echo


def test_outputs_do_not_depend_on_worker_count(tmp_path):
    body = "[seeds]\ncount = 4\n[times]\ngrid = [10.0, 20.0, 30.0, 40.0]\n"
    blobs = []
    for w in (1, 3):
        out = tmp_path / f"w{w}"
        run(load_config(text=cfg_text("scaling", body), overrides={"out": out, "workers": w}))
        blobs.append(((out / "scaling.csv").read_bytes(), (out / "summary.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_rerun_is_byte_identical_and_manifest_appends(tmp_path):
    cfg = holes_cfg(tmp_path, "[times]\ngrid = [15.0]\n")
    run(cfg)
    first = (tmp_path / "holes.csv").read_bytes()
    run(cfg)
    assert (tmp_path / "holes.csv").read_bytes() == first
    lines = (tmp_path / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 2
    m = json.loads(lines[0])
    assert m["failed"] == [] and m["version"] and m["seeds"][0]["ok"]


def test_scaling_row_count(tmp_path):
    cfg = load_config(text=cfg_text("scaling", "[seeds]\ncount = 20\n"
                                    "[times]\ngrid = [10.0, 20.0, 30.0, 40.0]\n"),
                      overrides={"out": tmp_path, "workers": 4})
    run(cfg)
    _, header, rows = read_csv(tmp_path / "scaling.csv")
    assert len(rows) == 4 * 20 + 1
    assert [r[0] for r in rows].count("summary") == 1
    assert header[0] == "row_type"


def test_crash_isolation(tmp_path):
    sizes = {s: len(Ball(WeightField(WeightDistribution.exponential(), s)).grow_to(30.0)
                    .time_table()[1]) for s in range(6)}
    cap = sorted(sizes.values())[3]
    body = f"[seeds]\ncount = 6\n[times]\ngrid = [30.0]\n[caps]\nmax_vertices = {cap}\n"
    man = run(holes_cfg(tmp_path / "capped", body, workers=3))
    assert man.exit_code == 2
    assert 0 < len(man.failed) < 6
    ok = [s.seed for s in man.seeds if s.ok]
    assert all(sizes[s] <= cap for s in ok)
    assert all("ResourceLimitError" in s.error for s in man.seeds if not s.ok)
    # surviving seeds write exactly what a clean run of them writes
    clean = load_config(text=cfg_text("holes", "[times]\ngrid = [30.0]\n"
                                      f"[seeds]\nlist = {ok}\n"),
                        overrides={"out": tmp_path / "clean"})
    run(clean)
    rows_a = read_csv(tmp_path / "capped" / "holes.csv")[2]
    rows_b = read_csv(tmp_path / "clean" / "holes.csv")[2]
    assert rows_a == rows_b


# ---- CLI

def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("dimension = 0\n")
    assert cli.main(["holes", "--config", str(bad)]) == 1
    good = tmp_path / "good.toml"
    good.write_text('[distribution]\nkind = "constant"\nc = 1.0\n')
    rc = cli.main(["holes", "--config", str(good), "--seed", "3", "--t", "2,4",
                   "--out", str(tmp_path / "o")])
    assert rc == 0
    echo, _, rows = read_csv(tmp_path / "o" / "holes.csv")
    assert echo["seeds"] == {"list": [3]} and echo["times"]["grid"] == [2.0, 4.0]
    capped = tmp_path / "capped.toml"
    capped.write_text("[caps]\nmax_vertices = 10\n")
    assert cli.main(["holes", "--config", str(capped), "--t", "30",
                     "--out", str(tmp_path / "c")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_missing_config_file(tmp_path):
    assert cli.main(["kesten", "--config", str(tmp_path / "none.toml")]) == 1


@pytest.mark.parametrize("exp,body", [
    ("kesten", "[seeds]\ncount = 3\n[probe]\nn = 4\n"),
    ("shape", "[probe]\nr_max = 20.0\nsamples = 2\n"),
    ("barrel", '[gadget]\neps = 0.3\nb = 5.0\nbarrel_n = [50]\n'),
    ("straightness", "[probe]\nradii = [10.0, 20.0]\nsamples = 2\n"),
])
def test_small_runs_of_other_experiments(tmp_path, exp, body):
    man = run(load_config(text=cfg_text(exp, body), overrides={"out": tmp_path}))
    assert man.exit_code == 0, [s.error for s in man.seeds]
    _, header, rows = read_csv(next(tmp_path.glob("*.csv")))
    assert rows and all(len(r) == len(header) for r in rows)
