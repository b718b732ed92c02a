"""Configuration grammar, subcommand dispatch, file formats, reproducibility."""

import os

import numpy as np
import pytest

from vpice.cli import dispatch
from vpice.config import ConfigError, RunConfig, parse_config
from vpice.grid import FieldSet, Grid
from vpice.io_formats import read_snapshot, write_snapshot


SCALED_SNIPPET = """
# desk-scale parameters
rheology.delta = 1e-6
rheology.p_star = 1.0
rheology.c = 2.0
rheology.rho_ice = 1.0
rheology.c_cor = 0.0
rheology.g = 1.0
grid.nx = 9
grid.ny = 9
stepper.dt = 0.01
stepper.t_end = 0.05
experiment.n_samples = 25
"""


def write_config(tmp_path, body, name="run.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def test_empty_config_is_all_defaults():
    cfg = parse_config("")
    assert cfg["rheology.e"] == 2.0
    assert cfg["grid.nx"] == 17
    assert cfg["experiment.output_dir"] == "out"
    assert cfg["experiment.emit_ppm"] is False


def test_parse_assignments_and_comments():
    cfg = parse_config("""
    # comment line
    rheology.delta = 1e-9   # trailing comment
    grid.nx = 33
    rheology.variant = tanh
    experiment.emit_ppm = true
    """)
    assert cfg["rheology.delta"] == 1e-9
    assert cfg["grid.nx"] == 33
    assert cfg["rheology.variant"] == "tanh"
    assert cfg["experiment.emit_ppm"] is True


def test_parse_is_order_independent():
    a = parse_config("grid.nx = 9\nrheology.e = 1.5\n")
    b = parse_config("rheology.e = 1.5\ngrid.nx = 9\n")
    assert a.values == b.values


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as excinfo:
        parse_config("rheology.e = 2.0\nbogus.key = 1\n")
    assert "line 2" in str(excinfo.value)
    assert "unknown key" in str(excinfo.value)


def test_range_violation_nx():
    with pytest.raises(ConfigError) as excinfo:
        parse_config("grid.nx = 2")
    assert "violates its range" in str(excinfo.value)


def test_type_errors():
    with pytest.raises(ConfigError):
        parse_config("grid.nx = 2.5")
    with pytest.raises(ConfigError):
        parse_config("stepper.dt = fast")
    with pytest.raises(ConfigError):
        parse_config("experiment.emit_ppm = yes")
    with pytest.raises(ConfigError):
        parse_config("just some words")


def test_negative_lambda_re_min_is_range_error():
    with pytest.raises(ConfigError):
        parse_config("experiment.lambda_re_min = -0.5")


def test_typed_accessors():
    cfg = parse_config(SCALED_SNIPPET)
    params = cfg.rheology_params()
    assert params.p_star == 1.0
    grid = cfg.grid()
    assert (grid.nx, grid.ny) == (9, 9)
    stepper = cfg.stepper()
    assert stepper.dt == 0.01
    eq = cfg.equilibrium()
    assert eq.h_star == 1.0


def test_echo_prints_17_digits():
    cfg = parse_config("rheology.delta = 0.1")
    echo = dict(cfg.echo())
    assert echo["rheology.delta"] == "0.10000000000000001"


# ---------------------------------------------------------------------------
# Snapshot round trip
# ---------------------------------------------------------------------------

def test_snapshot_roundtrip(tmp_path):
    g = Grid(7, 5, 2.0, 3.0)
    rng = np.random.default_rng(0)
    v = FieldSet.constant(g, 1.0, 0.5)
    v.h += 0.01 * rng.normal(size=(g.ny, g.nx))
    interior = g.interior_mask()
    v.u1[interior] = rng.normal(size=interior.sum())
    path = tmp_path / "snap.bin"
    write_snapshot(path, v, t=1.25)
    back, t = read_snapshot(path)
    assert t == 1.25
    assert (back.grid.nx, back.grid.ny) == (7, 5)
    np.testing.assert_array_equal(back.u1, v.u1)
    np.testing.assert_array_equal(back.h, v.h)


# ---------------------------------------------------------------------------
# Dispatch and exit codes
# ---------------------------------------------------------------------------

def test_dispatch_usage_errors(tmp_path, capsys):
    assert dispatch([]) == 2
    assert dispatch(["not-a-command"]) == 2
    assert dispatch(["spectrum"]) == 2
    assert dispatch(["spectrum", str(tmp_path / "missing.cfg")]) == 2
    capsys.readouterr()


def test_dispatch_config_error_exit_2(tmp_path, capsys):
    path = write_config(tmp_path, "grid.nx = 2\n")
    assert dispatch(["spectrum", path]) == 2
    capsys.readouterr()


def test_lscheck_negative_lambda_config_exit_2(tmp_path, capsys):
    path = write_config(tmp_path, "experiment.lambda_re_min = -1.0\n")
    assert dispatch(["ls-check", path]) == 2
    capsys.readouterr()


def test_spectrum_budget_exit_2(tmp_path, capsys):
    path = write_config(tmp_path, "grid.nx = 80\ngrid.ny = 80\n")
    assert dispatch(["spectrum", path]) == 2
    err = capsys.readouterr().err
    assert "budget" in err


def test_spectrum_subcommand_outputs(tmp_path, capsys):
    out = tmp_path / "outdir"
    body = SCALED_SNIPPET + f"experiment.output_dir = {out}\n"
    path = write_config(tmp_path, body)
    assert dispatch(["spectrum", path]) == 0
    capsys.readouterr()
    lines = (out / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "re,im"
    n = 9 * 9
    interior_unknowns = 2 * (7 * 7) + 2 * n
    assert len(lines) - 1 == interior_unknowns
    summary = (out / "spectrum_summary.txt").read_text()
    assert "kernel_dim = 2" in summary
    manifest = (out / "manifest.txt").read_text()
    assert "file.0.name = spectrum.csv" in manifest
    assert "config.grid.nx = 9" in manifest


def test_symbol_subcommand_and_reproducibility(tmp_path, capsys):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        body = SCALED_SNIPPET + f"experiment.output_dir = {out}\n"
        path = write_config(tmp_path, body, name=f"cfg_{out.name}.cfg")
        assert dispatch(["symbol", path]) == 0
        capsys.readouterr()
    bytes_a = (out_a / "symbol_report.csv").read_bytes()
    bytes_b = (out_b / "symbol_report.csv").read_bytes()
    assert bytes_a == bytes_b


def test_ls_check_subcommand(tmp_path, capsys):
    out = tmp_path / "ls"
    body = SCALED_SNIPPET + f"experiment.output_dir = {out}\n"
    path = write_config(tmp_path, body)
    assert dispatch(["ls-check", path]) == 0
    capsys.readouterr()
    lines = (out / "ls_report.csv").read_text().splitlines()
    assert len(lines) == 26  # header + n_samples
    assert lines[0].startswith("id,")
    # every probe must report the 2/2 split
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[8] == "2" and cells[9] == "2"


def test_decay_subcommand(tmp_path, capsys):
    out = tmp_path / "decay"
    body = (SCALED_SNIPPET
            + f"experiment.output_dir = {out}\n"
            + "grid.nx = 11\ngrid.ny = 11\n"
            + "stepper.dt = 0.005\nstepper.t_end = 0.25\n")
    path = write_config(tmp_path, body)
    assert dispatch(["decay", path]) == 0
    capsys.readouterr()
    summary = (out / "decay_summary.txt").read_text()
    assert "fitted_rate" in summary and "predicted_gap" in summary
    header = (out / "decay_diagnostics.csv").read_text().splitlines()[0]
    assert header == "time,kinetic_energy,mean_h,mean_a,max_u,perturbation_norm"


def test_simulate_subcommand_with_snapshots_and_ppm(tmp_path, capsys):
    out = tmp_path / "sim"
    body = (SCALED_SNIPPET
            + f"experiment.output_dir = {out}\n"
            + "experiment.snapshot_every = 2\n"
            + "experiment.emit_ppm = true\n")
    path = write_config(tmp_path, body)
    assert dispatch(["simulate", path]) == 0
    capsys.readouterr()
    names = sorted(os.listdir(out))
    assert "diagnostics.csv" in names
    assert "snapshot_000000.bin" in names
    assert "snapshot_000000_h.ppm" in names
    assert "snapshot_000000_h.ppm.scale.txt" in names
    with open(out / "snapshot_000000_h.ppm", "rb") as fh:
        assert fh.readline() == b"P6\n"
    # manifest lists every emitted file except itself
    manifest = (out / "manifest.txt").read_text()
    listed = {line.split(" = ")[1] for line in manifest.splitlines()
              if line.startswith("file.") and ".name" in line.split(" = ")[0]}
    emitted = set(names) - {"manifest.txt"}
    assert listed == emitted


def test_simulate_reproducibility_byte_identical(tmp_path, capsys):
    outs = []
    for tag in ("r1", "r2"):
        out = tmp_path / tag
        body = SCALED_SNIPPET + f"experiment.output_dir = {out}\n"
        path = write_config(tmp_path, body, name=f"{tag}.cfg")
        assert dispatch(["simulate", path]) == 0
        capsys.readouterr()
        outs.append(out)
    a = (outs[0] / "diagnostics.csv").read_bytes()
    b = (outs[1] / "diagnostics.csv").read_bytes()
    assert a == b


def test_dump_matrix_flag(tmp_path, capsys):
    out = tmp_path / "dump"
    body = SCALED_SNIPPET + f"experiment.output_dir = {out}\n"
    path = write_config(tmp_path, body)
    target = str(out / "a0.txt")
    os.makedirs(out, exist_ok=True)
    assert dispatch(["spectrum", path, "--dump-matrix", target]) == 0
    capsys.readouterr()
    first = open(target).readline().split()
    assert len(first) == 3
    assert dispatch(["symbol", path, "--dump-matrix", target]) == 2
    capsys.readouterr()


def test_default_runconfig_usable_directly():
    cfg = RunConfig()
    assert cfg["grid.nx"] == 17
    cfg.rheology_params()
    cfg.stepper()
