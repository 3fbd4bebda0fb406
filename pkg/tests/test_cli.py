import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geobeam import cli
from geobeam.cli import ExperimentConfig, ReportRow, derive_seeds, emit, format_rows, main, parse_report, run


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows_of(cfg, observable):
    return [r for r in run(cfg) if r.observable == observable]


# -- seeds -------------------------------------------------------------------

def test_splitmix_reference_values():
    # published splitmix64 outputs for state 0
    state, z = cli.splitmix64(0)
    assert z == 0xE220A8397B1DCDAF
    state, z = cli.splitmix64(state)
    assert z == 0x6E789E6AA1B965F4


def test_derived_seeds_distinct_and_exact_as_float():
    seeds = derive_seeds(12345)
    assert len(set(seeds)) == 3
    assert all(float(s) == s for s in seeds)
    assert derive_seeds(12345) == seeds and derive_seeds(12346) != seeds


# -- config --------------------------------------------------------------------

configs = st.builds(
    ExperimentConfig,
    experiment=st.sampled_from(cli.EXPERIMENTS),
    d=st.sampled_from([3, 5, 7]),
    group=st.sampled_from(["standard", "trivial"]),
    p=st.integers(1, 30),
    l=st.lists(st.integers(1, 30), max_size=4),
    geodesics=st.lists(st.sampled_from(["gamma:1", "gamma:2", "random"]), max_size=3),
    frames=st.lists(st.lists(st.lists(st.floats(-1, 1), min_size=4, max_size=4), min_size=2, max_size=2), max_size=2),
    weights=st.lists(st.floats(0.01, 10), max_size=3),
    degrees=st.lists(st.integers(0, 400), max_size=6),
    seed=st.integers(0, 2**63 - 1),
    dictionary_seed=st.one_of(st.none(), st.integers(0, 2**63 - 1)),
    resolution=st.integers(4, 128),
    out=st.one_of(st.none(), st.text(min_size=1, max_size=20)),
    format=st.sampled_from(["csv", "json"]),
)


@settings(max_examples=100, deadline=None)
@given(configs)
def test_config_roundtrip(cfg):
    assert ExperimentConfig.from_toml(cfg.to_toml()) == cfg


def test_config_examples(tmp_path):
    cfg = ExperimentConfig.from_toml('experiment = "average"\np = 5\nl = [1, 2]\n')
    assert cfg.l_tuple == (1, 2) and cfg.p_value == 5
    cfg = ExperimentConfig.from_toml('experiment = "average"\nl = "trivial"\n')
    assert cfg.group == "trivial" and cfg.p_value == 1
    with pytest.raises(cli.ConfigError, match="unknown config keys"):
        ExperimentConfig.from_toml('experiment = "average"\nbogus = 1\n')
    with pytest.raises(cli.ConfigError, match="invalid TOML"):
        ExperimentConfig.from_toml("experiment = \n")
    with pytest.raises(cli.ConfigError, match="missing key"):
        ExperimentConfig.from_toml("d = 3\n")


@pytest.mark.parametrize("text,match", [
    ('experiment = "average"\np = 4\nl = [2, 1]\n', "fixed points at power 2"),
    ('experiment = "average"\nd = 4\n', "odd integer"),
    ('experiment = "realize"\ndegrees = [300]\n', "outside"),
    ('experiment = "average"\ndegrees = [5000]\n', "outside"),
    ('experiment = "beam-converge"\nd = 5\n', "only for d=3"),
    ('experiment = "average"\ngeodesics = ["line:1"]\n', "bad geodesic"),
    ('experiment = "nope"\n', "unknown experiment"),
])
def test_config_validation(text, match):
    with pytest.raises(cli.ConfigError, match=match):
        ExperimentConfig.from_toml(text).validate()


# -- emit ----------------------------------------------------------------------

def _rows():
    return [
        ReportRow("average", 3, 5, (1, 2), 320, "avg_norm_sq", 0.2000000000000169, 0.2),
        ReportRow("average", 3, 5, (1, 2), None, "seed:master", 7.0),
        ReportRow("lens-spectrum", 3, 2, (1, 1), 2, "invariant_dimension", 9.0, 9.0),
    ]


def test_emit_empty(tmp_path):
    path = tmp_path / "e.csv"
    emit([], "csv", str(path))
    assert path.read_text() == "experiment,d,p,l,k,observable,value,reference,abs_error\n"


def test_emit_one_row_roundtrip(tmp_path):
    path = tmp_path / "one.csv"
    rows = _rows()[:1]
    emit(rows, "csv", str(path))
    text = path.read_text()
    assert len(text.splitlines()) == 2
    rec = parse_report(text)[0]
    assert rec["l"] == "1-2" and rec["k"] == 320
    assert rec["value"] == rows[0].value
    assert rec["abs_error"] == abs(rows[0].value - 0.2)
    assert "0.20000000000000001" in text  # 17 significant digits


def test_csv_json_consistency():
    rows = _rows()
    a = parse_report(format_rows(rows, "csv"), "csv")
    b = parse_report(format_rows(rows, "json"), "json")
    assert a == b
    assert list(b[0]) == cli.HEADER


def test_abs_error_only_with_reference():
    r = ReportRow("x", 3, 1, (1, 1), 1, "o", 1.5)
    assert r.abs_error is None
    assert ReportRow("x", 3, 1, (1, 1), 1, "o", 1.5, 2.0).abs_error == 0.5


# -- experiments ---------------------------------------------------------------

def test_lens_spectrum_example():
    cfg = ExperimentConfig("lens-spectrum", p=2, l=[1, 1], degrees=list(range(7)))
    rows = rows_of(cfg, "invariant_dimension")
    assert [r.value for r in rows] == [1, 0, 9, 0, 25, 0, 49]
    assert all(r.abs_error == 0 for r in rows)


def test_average_example():
    cfg = ExperimentConfig("average", p=5, l=[1, 2], geodesics=["random"], degrees=[320])
    norm = rows_of(cfg, "avg_norm_sq")[0]
    assert abs(norm.value - 0.2) <= 0.05
    assert rows_of(cfg, "invariance_residual")[0].value <= 1e-9


def test_average_full_stabilizer():
    cfg = ExperimentConfig("average", p=5, l=[1, 2], geodesics=["gamma:1"], degrees=[5, 7, 10])
    vals = [r.value for r in rows_of(cfg, "avg_norm_sq")]
    assert abs(vals[0] - 1) <= 1e-10 and vals[1] == 0 and abs(vals[2] - 1) <= 1e-10


def test_beam_converge_example():
    cfg = ExperimentConfig("beam-converge", group="trivial", degrees=[8, 16, 32, 64])
    vals = [r.value for r in rows_of(cfg, "weak_star_discrepancy")]
    assert len(vals) == 4 and all(b < a for a, b in zip(vals, vals[1:]))


def test_realize_rows():
    cfg = ExperimentConfig("realize", group="trivial", geodesics=["gamma:1", "gamma:2"],
                           weights=[0.5, 0.5], degrees=[64], resolution=48)
    masses = [r for r in run(cfg) if r.observable.startswith("mass_atom")]
    assert len(masses) == 2 and all(r.abs_error <= 0.05 for r in masses)


def test_frame_warning_row():
    frames = [[[1.0, 0.0, 0.0, 0.0], [0.1, 1.0, 0.0, 0.0]]]
    cfg = ExperimentConfig("average", geodesics=[], frames=frames, degrees=[4])
    rows = run(cfg)
    assert any(r.observable.startswith("warning:frame_0") for r in rows)
    clean = ExperimentConfig("average", geodesics=[], frames=[[[1, 0, 0, 0], [0, 1, 0, 0]]], degrees=[4])
    assert not any(r.observable.startswith("warning") for r in run(clean))


def test_seed_rows_recorded():
    cfg = ExperimentConfig("lens-spectrum", seed=99, degrees=[0])
    rows = {r.observable: r.value for r in run(cfg)}
    dic, geo, samp = derive_seeds(99)
    assert rows["seed:master"] == 99 and rows["seed:dictionary"] == dic
    assert rows["seed:geodesics"] == geo and rows["seed:samples"] == samp


# -- entry point ---------------------------------------------------------------

def test_main_deterministic_output(tmp_path):
    cfg = write(tmp_path, 'experiment = "average"\np = 5\nl = [1, 2]\ngeodesics = ["random"]\ndegrees = [10, 40]\n')
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["average", "--config", cfg, "--out", str(a), "--seed", "4"]) == 0
    assert main(["average", "--config", cfg, "--out", str(b), "--seed", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    main(["average", "--config", cfg, "--out", str(c), "--seed", "5"])
    assert c.read_bytes() != a.read_bytes()


def test_main_flags_override(tmp_path):
    cfg = write(tmp_path, 'experiment = "lens-spectrum"\np = 2\nl = [1, 1]\ndegrees = [0]\nformat = "csv"\n')
    out = tmp_path / "o.json"
    assert main(["lens-spectrum", "--config", cfg, "--out", str(out), "--format", "json",
                 "--p", "3", "--degrees", "0,1,2,3"]) == 0
    recs = [r for r in json.loads(out.read_text()) if r["observable"] == "invariant_dimension"]
    assert [r["k"] for r in recs] == [0, 1, 2, 3] and recs[0]["p"] == 3


def _last_error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return json.loads(err[0])


def test_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, 'experiment = "average"\np = 4\nl = [2, 1]\n')
    assert main(["average", "--config", bad]) == 1
    assert _last_error(capsys)["error"] == "config"
    assert main(["average", "--config", str(tmp_path / "missing.toml")]) == 1
    assert _last_error(capsys)["error"] == "config"
    good = write(tmp_path, 'experiment = "lens-spectrum"\ndegrees = [0]\n', "g.toml")
    assert main(["lens-spectrum", "--config", good, "--out", str(tmp_path / "no" / "x.csv")]) == 3
    assert _last_error(capsys)["error"] == "io"
    inf = write(tmp_path, 'experiment = "realize"\np = 3\nl = [1, 1]\ndegrees = [7]\nresolution = 8\n', "i.toml")
    out = tmp_path / "inf.csv"
    assert main(["realize", "--config", inf, "--out", str(out)]) == 2
    assert _last_error(capsys)["error"] == "infeasible"
    rec = parse_report(out.read_text())
    assert len(rec) == 1 and rec[0]["observable"].startswith("error:") and math.isnan(rec[0]["value"])


def test_verify_passes(tmp_path, capsys):
    cfg = write(tmp_path, 'experiment = "verify"\n')
    out = tmp_path / "v.csv"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    recs = [r for r in parse_report(out.read_text()) if r["observable"].startswith("pass:")]
    assert len(recs) == len(cli.INVARIANT_SUITE) and all(r["value"] == 1.0 for r in recs)


def test_verify_exit_nonzero_on_failure(tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(cli.INVARIANT_SUITE, "always_fails", lambda d, rng: (1.0, 0.0))
    cfg = write(tmp_path, 'experiment = "verify"\n')
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "v.csv")]) != 0
    assert _last_error(capsys)["error"] == "verify"
