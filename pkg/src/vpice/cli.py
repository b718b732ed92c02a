"""Subcommand front end.

    vpice simulate <config>   unforced run from the perturbed equilibrium:
                              diagnostics CSV, optional snapshots/PPM
    vpice symbol <config>     ellipticity margins over random states: CSV
    vpice ls-check <config>   boundary-condition probes: CSV
    vpice spectrum <config>   linearized spectrum: eigenvalue CSV + summary
    vpice decay <config>      decay experiment: diagnostics CSV + fit summary
    vpice selftest [config]   run the built-in invariant suites

Exit codes: 0 success, 1 violated contract or margin, 2 usage/config error.
Every subcommand that writes files puts them under experiment.output_dir and
lists them, with the exact configuration echo, in manifest.txt.  Identical
configuration and seed produce byte-identical CSV output.

Optional flag for simulate and spectrum: --dump-matrix <path> exports the
assembled operator as 'row col value' lines.
"""

from __future__ import annotations

import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .dynamics import ForcingInputs, RunSinks, run
from .io_formats import (
    DiagnosticsCsvWriter,
    format_float,
    write_eigenvalue_csv,
    write_key_values,
    write_manifest,
    write_ppm,
    write_snapshot,
)
from .operators import assemble_coupled, export_coo
from .params import InvalidStateError
from .rheology import StrainRate, coercivity_lower_bound, pressure
from .stability import (
    BudgetExceededError,
    DENSE_EIG_BUDGET,
    assemble_A0,
    decay_experiment,
    perturbed_equilibrium,
    semisimplicity_proxy,
    spectrum,
)
from .symbols import (
    LSProbe,
    RootBalanceError,
    ellipticity_report,
    lopatinskii_shapiro_check,
)
from .selftest import run_selftest

USAGE = __doc__

SUBCOMMANDS = ("simulate", "symbol", "ls-check", "spectrum", "decay", "selftest")


def _fail(message: str, code: int) -> int:
    print(f"vpice: {message}", file=sys.stderr)
    return code


def _prepare_output(cfg: RunConfig) -> str:
    directory = cfg["experiment.output_dir"]
    os.makedirs(directory, exist_ok=True)
    return directory


def _sample_state(rng, cfg: RunConfig, params):
    eps = StrainRate(*rng.normal(size=3))
    h_star = cfg["equilibrium.h_star"]
    h = rng.uniform(0.5 * h_star, 2.0 * h_star)
    a = rng.uniform(0.0, 1.0)
    return eps, h, a, float(pressure(h, a, params))


def cmd_symbol(cfg: RunConfig) -> int:
    params = cfg.rheology_params()
    rng = np.random.default_rng(cfg["experiment.seed"])
    directory = _prepare_output(cfg)
    path = os.path.join(directory, "symbol_report.csv")
    violated = False
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,e11,e12,e22,h,a,p,min_eigenvalue,"
                 "coercivity_margin,relative_margin\n")
        for index in range(cfg["experiment.n_samples"]):
            eps, h, a, p = _sample_state(rng, cfg, params)
            report = ellipticity_report(eps, p, params, n_samples=8,
                                        seed=int(rng.integers(1 << 31)))
            bound = (coercivity_lower_bound(eps, p, params)
                     * params.delta / params.e**2)
            rel = report.min_coercivity_margin / max(abs(bound), 1e-300)
            fh.write(",".join(
                [str(index)]
                + [format_float(x) for x in (eps.e11, eps.e12, eps.e22, h, a, p)]
                + [format_float(report.min_eigenvalue),
                   format_float(report.min_coercivity_margin),
                   format_float(rel)]) + "\n")
            if report.min_eigenvalue <= 0.0 or rel < -1e-10:
                violated = True
    write_manifest(directory, [("symbol_report.csv", "csv")], cfg.echo())
    print(f"symbol report: {path}")
    return 1 if violated else 0


def cmd_ls_check(cfg: RunConfig) -> int:
    params = cfg.rheology_params()
    rng = np.random.default_rng(cfg["experiment.seed"])
    directory = _prepare_output(cfg)
    path = os.path.join(directory, "ls_report.csv")
    re_min = cfg["experiment.lambda_re_min"]
    violated = False
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,e11,e12,e22,p,theta,lambda_re,lambda_im,"
                 "n_stable,n_unstable,s_min,s_max,margin\n")
        for index in range(cfg["experiment.n_samples"]):
            eps, _, _, p = _sample_state(rng, cfg, params)
            theta = rng.uniform(0.0, 2.0 * np.pi)
            lam = complex(re_min + rng.uniform(0.0, 1.0),
                          rng.uniform(-1.0, 1.0)) * 10 ** rng.uniform(-2, 2)
            probe = LSProbe(
                xi=np.array([np.cos(theta), np.sin(theta)]),
                nu=np.array([-np.sin(theta), np.cos(theta)]),
                lam=lam, eps=eps, p=p)
            try:
                result = lopatinskii_shapiro_check(probe, params)
            except RootBalanceError as exc:
                print(f"probe {index}: {exc}", file=sys.stderr)
                violated = True
                continue
            margin = result.s_min - 1e-8 * result.s_max
            fh.write(",".join(
                [str(index)]
                + [format_float(x) for x in
                   (eps.e11, eps.e12, eps.e22, p, theta, lam.real, lam.imag)]
                + [str(len(result.stable_roots)), str(len(result.unstable_roots))]
                + [format_float(result.s_min), format_float(result.s_max),
                   format_float(margin)]) + "\n")
            if margin <= 0.0:
                violated = True
    write_manifest(directory, [("ls_report.csv", "csv")], cfg.echo())
    print(f"boundary-condition report: {path}")
    return 1 if violated else 0


def cmd_spectrum(cfg: RunConfig, dump_matrix=None) -> int:
    params = cfg.rheology_params()
    grid = cfg.grid()
    interior_unknowns = (2 * int(np.sum(grid.interior_mask()))
                         + 2 * grid.n_nodes)
    if interior_unknowns > DENSE_EIG_BUDGET:
        return _fail(
            f"grid {grid.nx}x{grid.ny} has {interior_unknowns} unknowns, "
            f"beyond the dense eigensolve budget {DENSE_EIG_BUDGET}", 2)
    op = assemble_A0(cfg.equilibrium(), grid, params)
    if dump_matrix:
        export_coo(op, dump_matrix)
    report = spectrum(op, interior_only=True)
    proxy = semisimplicity_proxy(op, interior_only=True)
    directory = _prepare_output(cfg)
    csv_path = os.path.join(directory, "spectrum.csv")
    write_eigenvalue_csv(csv_path, report.eigenvalues)
    summary_path = os.path.join(directory, "spectrum_summary.txt")
    write_key_values(summary_path, [
        ("kernel_dim", report.kernel_dim),
        ("spectral_gap", report.spectral_gap),
        ("tol_kernel", report.tol_kernel),
        ("spectral_radius", report.spectral_radius),
        ("kernel_basis_min_singular_value", proxy.basis_min_singular_value),
        ("kernel_restriction_norm", proxy.restriction_norm),
    ])
    files = [("spectrum.csv", "csv"), ("spectrum_summary.txt", "key-value")]
    if dump_matrix:
        files.append((os.path.basename(dump_matrix), "coo-text"))
    write_manifest(directory, files, cfg.echo())
    print(f"spectrum: kernel dim {report.kernel_dim}, "
          f"gap {format_float(report.spectral_gap)}")
    violated = report.kernel_dim != 2 or report.spectral_gap <= 0.0
    return 1 if violated else 0


def cmd_decay(cfg: RunConfig) -> int:
    params = cfg.rheology_params()
    grid = cfg.grid()
    directory = _prepare_output(cfg)
    csv_path = os.path.join(directory, "decay_diagnostics.csv")
    result = decay_experiment(cfg.equilibrium(),
                              cfg["experiment.perturbation_scale"],
                              grid, params, cfg.stepper())
    with DiagnosticsCsvWriter(csv_path) as writer:
        traj = result.trajectory
        for k in range(len(traj.times)):
            writer({
                "time": traj.times[k],
                "kinetic_energy": traj.kinetic_energy[k],
                "mean_h": traj.mean_h[k],
                "mean_a": traj.mean_a[k],
                "max_u": traj.max_u[k],
                "perturbation_norm": traj.perturbation_norm[k],
            })
    rel = (abs(result.fitted_rate - result.predicted_gap)
           / max(result.predicted_gap, 1e-300))
    summary_path = os.path.join(directory, "decay_summary.txt")
    write_key_values(summary_path, [
        ("fitted_rate", result.fitted_rate),
        ("predicted_gap", result.predicted_gap),
        ("relative_gap_error", rel),
        ("limit_mismatch", result.limit_mismatch),
        ("mean_h_drift", result.mean_h_drift),
        ("mean_a_drift", result.mean_a_drift),
    ])
    write_manifest(directory, [("decay_diagnostics.csv", "csv"),
                               ("decay_summary.txt", "key-value")], cfg.echo())
    print(f"decay: fitted rate {format_float(result.fitted_rate)}, "
          f"gap {format_float(result.predicted_gap)}")
    return 0


def cmd_simulate(cfg: RunConfig, dump_matrix=None) -> int:
    params = cfg.rheology_params()
    grid = cfg.grid()
    eq = cfg.equilibrium()
    v0 = perturbed_equilibrium(eq, grid,
                               cfg["experiment.perturbation_scale"])
    v0.validate(params)
    if dump_matrix:
        export_coo(assemble_coupled(v0, grid, params,
                                    omega=cfg["stepper.omega"]), dump_matrix)
    directory = _prepare_output(cfg)
    files = [("diagnostics.csv", "csv")]
    snapshots = []

    def on_snapshot(step_index, t, state):
        name = f"snapshot_{step_index:06d}.bin"
        write_snapshot(os.path.join(directory, name), state, t)
        snapshots.append((name, "snapshot-binary"))
        if cfg["experiment.emit_ppm"]:
            for field_name, field in (("u1", state.u1), ("u2", state.u2),
                                      ("h", state.h), ("a", state.a)):
                ppm = f"snapshot_{step_index:06d}_{field_name}.ppm"
                write_ppm(os.path.join(directory, ppm), field)
                snapshots.append((ppm, "ppm-p6"))
                snapshots.append((ppm + ".scale.txt", "key-value"))

    csv_path = os.path.join(directory, "diagnostics.csv")
    with DiagnosticsCsvWriter(csv_path) as writer:
        sinks = RunSinks(on_diagnostics=writer, on_snapshot=on_snapshot,
                         snapshot_every=cfg["experiment.snapshot_every"])
        run(v0, ForcingInputs.none(), params, cfg.stepper(), sinks=sinks)
    files.extend(snapshots)
    if dump_matrix:
        files.append((os.path.basename(dump_matrix), "coo-text"))
    write_manifest(directory, files, cfg.echo())
    print(f"simulation diagnostics: {csv_path}")
    return 0


def cmd_selftest(cfg: RunConfig) -> int:
    del cfg  # suites pin their own scaled parameters
    return 0 if run_selftest() else 1


def dispatch(argv) -> int:
    """Entry point used by the console script; returns the exit code."""
    argv = list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE)
        return 0 if argv else 2
    command, rest = argv[0], argv[1:]
    if command not in SUBCOMMANDS:
        return _fail(f"unknown subcommand {command!r}; "
                     f"expected one of {', '.join(SUBCOMMANDS)}", 2)

    dump_matrix = None
    if "--dump-matrix" in rest:
        index = rest.index("--dump-matrix")
        if command not in ("simulate", "spectrum"):
            return _fail("--dump-matrix applies to simulate and spectrum", 2)
        if index + 1 >= len(rest):
            return _fail("--dump-matrix needs a path", 2)
        dump_matrix = rest[index + 1]
        rest = rest[:index] + rest[index + 2:]

    if command == "selftest":
        config_path = rest[0] if rest else None
    else:
        if len(rest) != 1:
            return _fail(f"usage: vpice {command} <config>", 2)
        config_path = rest[0]

    try:
        cfg = load_config(config_path) if config_path else RunConfig()
    except FileNotFoundError:
        return _fail(f"config file not found: {config_path}", 2)
    except ConfigError as exc:
        return _fail(f"config error: {exc}", 2)

    try:
        if command == "simulate":
            return cmd_simulate(cfg, dump_matrix)
        if command == "symbol":
            return cmd_symbol(cfg)
        if command == "ls-check":
            return cmd_ls_check(cfg)
        if command == "spectrum":
            return cmd_spectrum(cfg, dump_matrix)
        if command == "decay":
            return cmd_decay(cfg)
        return cmd_selftest(cfg)
    except BudgetExceededError as exc:
        return _fail(str(exc), 2)
    except (ConfigError, InvalidStateError) as exc:
        return _fail(str(exc), 2)


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
