import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from fqhcavity import cli
from fqhcavity.config import (
    ExperimentConfig,
    GaugeBlock,
    LatticeBlock,
    ModelBlock,
    OutputBlock,
    TaskBlock,
    parse_config,
)
from fqhcavity.errors import ConfigError
from fqhcavity.lattice import Solenoid

BASE = """
[experiment]
name = demo
seed = 4

[lattice]
Lx = 4
Ly = 4

[gauge]
alpha = {alpha}

[model]
kind = hardcore
N = 2

[task]
kind = spectrum
k = 3
"""


def test_parse_minimal():
    cfg = parse_config(BASE.format(alpha="1/4"))
    assert cfg.gauge.alpha == Fraction(1, 4)
    assert cfg.lattice.spec().n_sites == 16
    assert cfg.seed == 4 and cfg.task.k == 3


@pytest.mark.parametrize("alpha", ["0.25", "1e-1", "quarter"])
def test_float_alpha_rejected(alpha):
    with pytest.raises(ConfigError):
        parse_config(BASE.format(alpha=alpha))


@pytest.mark.parametrize(
    "extra",
    ["[model]\nkind = hardcore\nN = 2\ncolour = red\n", "[plotting]\nx = 1\n"],
)
def test_unknown_keys_and_sections(extra):
    text = BASE.format(alpha="1/4").replace("[model]\nkind = hardcore\nN = 2\n", "") + extra
    with pytest.raises(ConfigError):
        parse_config(text)


@pytest.mark.parametrize(
    "patch",
    [("kind = spectrum", "kind = nonsense"), ("N = 2", "N = 40"), ("Lx = 4", "Lx = 1"), ("kind = hardcore", "kind = laser")],
)
def test_schema_violations(patch):
    with pytest.raises(ConfigError):
        parse_config(BASE.format(alpha="1/4").replace(*patch))


def test_missing_required_list():
    with pytest.raises(ConfigError):
        parse_config(BASE.format(alpha="1/4").replace("kind = spectrum", "kind = gap-curve"))


configs = st.builds(
    ExperimentConfig,
    name=st.from_regex(r"[a-z][a-z0-9_]{0,10}", fullmatch=True),
    lattice=st.builds(LatticeBlock, st.integers(2, 8), st.integers(2, 8), st.sampled_from(["torus", "open"])),
    gauge=st.builds(
        GaugeBlock,
        st.fractions(min_value=-1, max_value=1, max_denominator=12),
        st.lists(st.builds(Solenoid, st.just(0.5), st.floats(0.5, 1.5).map(lambda y: y + 0.25), st.sampled_from([1.0, -1.0])), max_size=2).map(tuple),
    ),
    model=st.builds(ModelBlock, st.sampled_from(["hardcore", "cavity"]), st.integers(0, 4), st.floats(0.1, 5), st.just(((0, 0), (1, 1))), st.floats(0, 50)),
    task=st.builds(
        TaskBlock,
        st.just("gap-curve"),
        st.integers(1, 10),
        st.floats(1e-14, 1e-6),
        epsilons=st.lists(st.floats(0, 100), min_size=1, max_size=5).map(tuple),
    ),
    output=st.builds(OutputBlock, st.just("out"), st.just(("json", "csv"))),
    seed=st.integers(0, 2**31),
)


@settings(max_examples=50, deadline=None)
@given(cfg=configs)
def test_canonical_echo_round_trip(cfg):
    again = parse_config(cfg.to_ini())
    assert again == cfg
    assert again.to_ini() == cfg.to_ini()


def test_list_presets_covers_criteria():
    names = cli.list_presets()
    for required in ("paper_fidelity_ideal", "fig3_gap_curve", "flux_insertion_quasihole"):
        assert required in names
    assert len(names) == 9
    assert all(desc for desc in names.values())


def test_every_preset_validates(capsys):
    for name in cli.list_presets():
        assert cli.main(["validate", name]) == 0


def test_run_ideal_fidelity_bundle(tmp_path, capsys):
    assert cli.main(["run", "paper_fidelity_ideal", "--output-dir", str(tmp_path)]) == 0
    out = tmp_path / "paper_fidelity_ideal"
    summary = (out / "summary.txt").read_text()
    assert "projector fidelity 0.989" in summary
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["seed"] == 0 and "gauge" in meta and "code_version" in meta
    results = json.loads((out / "results.json").read_text())
    assert abs(results["fidelity"]["projector"] - 0.989) < 0.01
    # canonical echo re-parses to the preset
    assert parse_config((out / "config.ini").read_text()) == cli.resolve_config("paper_fidelity_ideal")
    # a second run goes to a fresh directory and reproduces the scalars
    assert cli.main(["run", "paper_fidelity_ideal", "--output-dir", str(tmp_path)]) == 0
    again = json.loads((tmp_path / "paper_fidelity_ideal-1" / "results.json").read_text())
    assert round(again["fidelity"]["projector"], 10) == round(results["fidelity"]["projector"], 10)
    assert [round(e, 10) for e in again["eigenvalues"]] == [round(e, 10) for e in results["eigenvalues"]]


def test_run_spectrum_writes_vectors(tmp_path, capsys):
    cfg = tmp_path / "spec.ini"
    cfg.write_text(BASE.format(alpha="1/4"))
    assert cli.main(["run", str(cfg), "--output-dir", str(tmp_path), "--seed", "9"]) == 0
    out = tmp_path / "demo"
    assert (out / "spectrum.bin").stat().st_size == 3 * 120 * 16
    assert "seed = 9" in (out / "config.ini").read_text()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(BASE.format(alpha="0.25"))
    assert cli.main(["run", str(cfg), "--output-dir", str(tmp_path)]) == 1
    report = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert report["error"] == "ConfigError" and report["exit_code"] == 1
    assert cli.main(["validate", "no_such_preset"]) == 1


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "strict.ini"
    # tolerance zero can never be met
    cfg.write_text(BASE.format(alpha="1/4").replace("k = 3", "k = 3\ntol = 0"))
    assert cli.main(["run", str(cfg), "--output-dir", str(tmp_path)]) == 2
    report = json.loads((tmp_path / "demo" / "error.json").read_text())
    assert report["error"] == "NoConvergence"


def test_threads_option_sets_environment(monkeypatch, capsys):
    for var in cli._BLAS_VARS:
        monkeypatch.delenv(var, raising=False)
    import os

    assert cli.main(["--threads", "2", "list-presets"]) == 0
    assert os.environ["OPENBLAS_NUM_THREADS"] == "2"
