"""Command-line runner: ``softmode [--config FILE] {simulate,theory,oracle,probe,pulse} [--key value ...]``.

Exit status: 0 success, 1 other package error, 2 configuration error,
3 numerical divergence, 4 oracle failure. The worker count for ``simulate``
is read from the ``SOFTMODE_WORKERS`` environment variable only.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import analyze_trajectory, summarize
from .config import KEY_SECTION, SCHEMA, ExperimentConfig, load_config
from .dynamics import IntegratorConfig, run_ensemble, write_pgm
from .errors import ConfigError, DivergenceError, EstimationError, NoTransitionError, SoftmodeError
from .lattice import LatticeGrid, format_real
from .pulse import PulseConfig, run_pulse_experiment
from .schedule import log_grid, make_schedule
from .scores import LocalTanhScore, PatchDictionary, PatchPosteriorScore, make_drift, make_patch_dictionary
from .spectral import analytic_dispersion, estimate_critical_scale, oracle_deviation, spectrum_at_zero, xi_eq_series
from .theory import MASS_CONVENTIONS, critical_time, theory_table

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_ORACLE = 0, 1, 2, 3, 4
ORACLE_TOL = 1e-10
SNAPSHOTS_PER_TRAJECTORY = 5


class OracleFailure(SoftmodeError):
    pass


# ---------------------------------------------------------------------------
# shared construction


def build_dictionary(cfg: ExperimentConfig) -> PatchDictionary:
    if cfg.dictionary == "generated":
        return make_patch_dictionary(cfg.dictionary_seed, cfg.K, cfg.d, cfg.variant, cfg.random_mass)
    path = Path(cfg.dictionary)
    if not path.exists():
        raise ConfigError(f"dictionary: file {path} does not exist", field="dictionary")
    dictionary = PatchDictionary.load(path)
    if (dictionary.K, dictionary.d) != (cfg.K, cfg.d):
        raise ConfigError(f"dictionary: file has K={dictionary.K}, d={dictionary.d}", field="dictionary")
    return dictionary


def header_lines(cfg: ExperimentConfig, command: str) -> list[str]:
    return [f"softmode {__version__} {command}"] + cfg.echo_lines()


def critical_times_or_none(cfg: ExperimentConfig, schedule) -> dict[str, float | None]:
    out = {}
    for conv in MASS_CONVENTIONS:
        try:
            out[conv] = critical_time(cfg.K, cfg.d, schedule, conv)
        except NoTransitionError:
            out[conv] = None
    return out


def _write_csv(path: Path, header: list[str], rows, comments: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format_real(v) for v in row])


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_echo(path: Path, cfg: ExperimentConfig, command: str) -> None:
    path.write_text(f"# softmode {__version__} {command}\n" + cfg.to_text())


def snapshot_indices(times: np.ndarray, count: int = SNAPSHOTS_PER_TRAJECTORY) -> list[int]:
    """Indices of the recorded times closest in ``log t`` to ``count`` log-spaced targets."""
    targets = np.geomspace(times[0], times[-1], count)
    logt = np.log(times)
    return [int(np.argmin(np.abs(logt - np.log(tt)))) for tt in targets]


# ---------------------------------------------------------------------------
# commands; each writes into a staging directory


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    schedule = make_schedule(cfg.beta)
    grid = log_grid(cfg.t_max, cfg.t_min, cfg.steps)
    lattice = LatticeGrid(cfg.L, cfg.d)
    model = PatchPosteriorScore(build_dictionary(cfg), schedule)
    icfg = IntegratorConfig(grid, True, cfg.base_seed, cfg.record_every, cfg.flow_convention)
    records = run_ensemble(model, schedule, icfg, cfg.n_traj, shape=lattice.shape)
    drift = make_drift(model, cfg.probe_convention)
    analyses = [
        analyze_trajectory(rec, schedule, drift, cfg.n_max, cfg.directions, cfg.shells_used, cfg.smoothing_width)
        for rec in records
    ]
    comments = header_lines(cfg, "simulate")
    lam_cols = [f"lambda_{n}" for n in range(cfg.n_max + 1)]
    for j, (rec, an) in enumerate(zip(records, analyses)):
        rows = np.column_stack([an.times, an.xi_x, an.xi_x_smoothed, an.dxi_dlogt, an.spectrum.lam, an.xi_eq])
        _write_csv(
            out / f"trajectory_{j:03d}.csv",
            ["t", "xi_x", "xi_x_smoothed", "dxi_dlogt"] + lam_cols + ["xi_eq"],
            rows,
            comments + [f"seed = {rec.seed}"],
        )
        fields = list(rec.snapshots) + ([rec.final] if rec.times[-1] != rec.t_final else [])
        for i, idx in enumerate(snapshot_indices(an.times)):
            write_pgm(
                out / f"snapshot_{j:03d}_{i}.pgm",
                fields[idx],
                comments=comments + [f"seed = {rec.seed}", f"t = {format_real(an.times[idx])}"],
            )
    summ = summarize(analyses)
    rows = np.column_stack([summ.times, summ.xi_x, summ.growth_rate, summ.abs_lambda, summ.xi_eq])
    _write_csv(
        out / "median.csv",
        ["t", "xi_x", "growth_rate"] + [f"abs_lambda_{n}" for n in range(cfg.n_max + 1)] + ["xi_eq"],
        rows,
        comments + ["medians across trajectories; growth_rate = median of -dxi_x/dlog t"],
    )
    try:
        t_c_hat = estimate_critical_scale(summ.spectrum_times, [a.xi_eq for a in analyses])
    except EstimationError:
        t_c_hat = None
    summary = {
        "version": __version__,
        "command": "simulate",
        "config": cfg.as_dict(),
        "t_c": critical_times_or_none(cfg, schedule),
        "t_c_hat": t_c_hat,
        "argmin_abs_lambda": {str(n): summ.argmin_abs_lambda(n) for n in range(cfg.n_max + 1)},
        "argmax_growth_rate": summ.argmax_growth(),
        "median_final_xi_x": float(summ.xi_x[-1]),
        "seeds": [rec.seed for rec in records],
    }
    _write_json(out / "summary.json", summary)
    return summary


def cmd_theory(cfg: ExperimentConfig, out: Path) -> dict:
    schedule = make_schedule(cfg.beta)
    tcs = critical_times_or_none(cfg, schedule)
    times = np.unique(np.concatenate([log_grid(cfg.t_max, cfg.t_min, cfg.steps).times, [t for t in tcs.values() if t is not None]]))[::-1]
    table = theory_table(cfg.K, cfg.d, schedule, times, cfg.mass_convention)
    _write_csv(
        out / "theory.csv",
        ["t", "r", "kappa", "u", "r_eff"],
        table,
        header_lines(cfg, "theory") + [f"mass convention = {cfg.mass_convention}"],
    )
    line = "t_c: " + ", ".join(f"{c}={'none' if t is None else format_real(t)}" for c, t in tcs.items())
    print(line)
    summary = {"version": __version__, "command": "theory", "config": cfg.as_dict(), "t_c": tcs}
    _write_json(out / "theory_summary.json", summary)
    return summary


def cmd_oracle(cfg: ExperimentConfig, out: Path) -> dict:
    """Dense-vs-analytic dispersion, plus finite-difference probes of the local model at ``x = 0``."""
    schedule = make_schedule(cfg.beta)
    small = LatticeGrid(cfg.oracle_L, cfg.d)
    lines = header_lines(cfg, "oracle")
    dense_dev = {}
    for t in cfg.oracle_times:
        dense_dev[t] = oracle_deviation(cfg.oracle_K, cfg.d, schedule, small, t, "main-text")
        lines.append(f"dense L={cfg.oracle_L} K={cfg.oracle_K} t={format_real(t)} max_deviation={dense_dev[t]:.3e}")
    lattice = LatticeGrid(cfg.L, cfg.d)
    drift = make_drift(LocalTanhScore(cfg.K, schedule), "main-text")
    spec = spectrum_at_zero(drift, lattice, schedule, cfg.oracle_times, cfg.n_max, cfg.directions)
    shells = np.arange(cfg.n_max + 1) * lattice.k_min
    probe_ratio = {}
    for i, t in enumerate(cfg.oracle_times):
        k = np.zeros((len(shells), cfg.d))
        k[:, 0] = shells
        exact = analytic_dispersion(cfg.K, cfg.d, schedule, k, t, "main-text")
        probe_ratio[t] = float(np.max(np.abs(spec.lam[i] - exact) / (1.0 + np.abs(exact))))
        lines.append(f"probe L={cfg.L} K={cfg.K} t={format_real(t)} max_scaled_deviation={probe_ratio[t]:.3e}")
    dense_ok = max(dense_dev.values()) <= ORACLE_TOL
    probe_ok = max(probe_ratio.values()) <= 1e-6
    lines.append(f"dense oracle {'PASS' if dense_ok else 'FAIL'} (tolerance {ORACLE_TOL:g})")
    lines.append(f"probe oracle {'PASS' if probe_ok else 'FAIL'} (tolerance 1e-6 (1 + |lambda|))")
    (out / "oracle_report.txt").write_text("\n".join(lines) + "\n")
    for line in lines[len(header_lines(cfg, "oracle")):]:
        print(line)
    if not (dense_ok and probe_ok):
        raise OracleFailure("dense or probe oracle exceeded tolerance")
    return {"dense": dense_dev, "probe": probe_ratio}


def cmd_probe(cfg: ExperimentConfig, out: Path) -> dict:
    schedule = make_schedule(cfg.beta)
    lattice = LatticeGrid(cfg.L, cfg.d)
    model = PatchPosteriorScore(build_dictionary(cfg), schedule)
    times = np.geomspace(cfg.probe_t_max, cfg.probe_t_min, cfg.probe_points)
    spec = spectrum_at_zero(make_drift(model, cfg.probe_convention), lattice, schedule, times, cfg.n_max, cfg.directions)
    spec.xi_eq = xi_eq_series(spec, cfg.shells_used)
    spec.to_csv(out / "probe.csv", comments=header_lines(cfg, "probe") + [f"drift convention = {cfg.probe_convention}"])
    return {"times": len(times)}


def _pulse_center(cfg: ExperimentConfig, schedule) -> float:
    if cfg.critical_source == "theory":
        return critical_time(cfg.K, cfg.d, schedule, cfg.mass_convention)
    summary = Path(cfg.output_dir) / "summary.json"
    if not summary.exists():
        raise ConfigError("critical_source: 'measured' needs summary.json from a previous simulate run", field="critical_source")
    t_c_hat = json.loads(summary.read_text()).get("t_c_hat")
    if t_c_hat is None:
        raise ConfigError("critical_source: previous run has no measured critical time", field="critical_source")
    return float(t_c_hat)


def cmd_pulse(cfg: ExperimentConfig, out: Path) -> dict:
    schedule = make_schedule(cfg.beta)
    dictionary = build_dictionary(cfg)
    target = cfg.target
    if target < 0:
        target = dictionary.index_of(np.ones(dictionary.patterns.shape[1]))
    pcfg = PulseConfig(_pulse_center(cfg, schedule), cfg.w_pulse, cfg.half_width, cfg.trials, cfg.pulse_seed, cfg.window, cfg.flow_convention)
    outcome = run_pulse_experiment(dictionary, target, schedule, log_grid(cfg.t_max, cfg.t_min, cfg.steps), pcfg, LatticeGrid(cfg.L, cfg.d))
    outcome.to_csv(out / "pulse_trials.csv", comments=header_lines(cfg, "pulse"))
    outcome.write_summary(out / "pulse_summary.json", {"version": __version__, "effective_config": cfg.as_dict()})
    p = outcome.p_value
    print(
        f"median alignment critical={outcome.medians['critical']:.4f} random={outcome.medians['random']:.4f} "
        f"p={'undefined' if p is None else f'{p:.4g}'}"
    )
    return outcome.summary()


COMMANDS = {
    "simulate": cmd_simulate,
    "theory": cmd_theory,
    "oracle": cmd_oracle,
    "probe": cmd_probe,
    "pulse": cmd_pulse,
}


# ---------------------------------------------------------------------------
# staging and entry point


def run_command(command: str, cfg: ExperimentConfig) -> dict:
    """Run into a staging directory and move the files into ``output_dir`` only on success."""
    target = Path(cfg.output_dir)
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".softmode-", dir=target.parent))
    try:
        result = COMMANDS[command](cfg, staging)
        _write_echo(staging / "config.echo", cfg, command)
    except OracleFailure:
        # keep the deviation report; it is the point of a failed oracle run
        _finalize(staging, target)
        raise
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    _finalize(staging, target)
    return result


def _finalize(staging: Path, target: Path) -> None:
    target.mkdir(parents=True, exist_ok=True)
    for item in sorted(staging.iterdir()):
        item.replace(target / item.name)
    staging.rmdir()


def build_parser() -> argparse.ArgumentParser:
    overrides = argparse.ArgumentParser(add_help=False)
    group = overrides.add_argument_group("configuration overrides (one flag per key)")
    for key, section in KEY_SECTION.items():
        typ, default = SCHEMA[section][key]
        flags = sorted({f"--{key}", f"--{key.replace('_', '-')}"})
        group.add_argument(*flags, dest=key, type=str, default=None, help=f"[{section}] (default {default})")
    group.add_argument("--seed", dest="base_seed", type=str, default=None, help="alias of --base_seed")
    parser = argparse.ArgumentParser(prog="softmode", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"softmode {__version__}")
    parser.add_argument("--config", default=None, help="configuration file ([section] / key = value)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[overrides])
        p.add_argument("--config", dest="sub_config", default=None, help="configuration file")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.sub_config or args.config)
    for key in KEY_SECTION:
        value = getattr(args, key, None)
        if value is not None:
            cfg.set(key, value)
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        run_command(args.command, cfg)
    except ConfigError as exc:
        print(f"softmode: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"softmode: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OracleFailure as exc:
        print(f"softmode: oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except SoftmodeError as exc:
        print(f"softmode: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
