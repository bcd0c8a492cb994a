"""
glm-mp command line.

    glm-mp run --config etc/clipped_cs.yml --experiment clipped_cs --seeds 0-2 --out /tmp/clipped_cs
    glm-mp gen-config --preset clipped_cs --out my.yml

`run` exits 0 on success, 2 on an invalid configuration and 3 if any cell diverged.
"""
import sys
import logging
import logging.config
import dataclasses
from pathlib import Path

from clii import App

from . import settings
from .errors import ConfigError
from .experiments import (
    ExperimentConfig, final_mse_by_snr, load_experiment, preset_yaml, run_experiment,
)


log = logging.getLogger(__name__)
cli = App()

EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _split(s: str) -> list[str]:
    return [i.strip() for i in s.split(",") if i.strip()]


def parse_seeds(s: str) -> list[int]:
    """Accepts "3", "0,4,7" or an inclusive range "0-9"."""
    seeds: list[int] = []
    for part in _split(s):
        if "-" in part.lstrip("-"):
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def build_config(
    config: str = "",
    experiment: str = "",
    m: int = 0,
    n: int = 0,
    lam: float = 0.0,
    theta: float = 0.0,
    snr: str = "",
    solver: str = "",
    seeds: str = "",
    max_iters: int = 0,
    epsilon: float = 0.0,
    out: str = "",
    timing: bool = False,
) -> ExperimentConfig:
    """The experiment from the config file (or defaults) with flag overrides applied."""
    exp = load_experiment(config, experiment) if config else ExperimentConfig()

    overrides: dict = {}
    solver_overrides: dict = {}
    try:
        if m:
            overrides['M'] = m
        if n:
            overrides['N'] = n
        if lam:
            overrides['lam'] = lam
        if theta:
            overrides['theta'] = theta
        if snr:
            overrides['snr_db_list'] = [float(i) for i in _split(snr)]
        if solver:
            overrides['solvers'] = _split(solver)
        if seeds:
            overrides['seeds'] = parse_seeds(seeds)
        if out:
            overrides['output_dir'] = Path(out)
        if timing:
            overrides['record_timing'] = True
        if max_iters:
            solver_overrides['max_iters'] = max_iters
        if epsilon:
            solver_overrides['epsilon'] = epsilon
    except ValueError as e:
        raise ConfigError(str(e)) from e

    if solver_overrides:
        overrides['solver_config'] = dataclasses.replace(exp.solver_config, **solver_overrides)

    return dataclasses.replace(exp, **overrides).validate()


@cli.cmd
@cli.arg("config", "-c", help="YAML file with an 'experiments' mapping")
@cli.arg("experiment", "-e", help="Which experiment in the file to run")
def run(
    config: str = "",
    experiment: str = "",
    m: int = 0,
    n: int = 0,
    lam: float = 0.0,
    theta: float = 0.0,
    snr: str = "",
    solver: str = "",
    seeds: str = "",
    max_iters: int = 0,
    epsilon: float = 0.0,
    out: str = "",
    timing: bool = False,
):
    """Run an experiment grid and write CSV, Avro, plot script and metrics."""
    try:
        exp = build_config(
            config, experiment, m, n, lam, theta, snr, solver, seeds,
            max_iters, epsilon, out, timing)
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)

    print(f"running {exp.name}: M={exp.M} N={exp.N} lam={exp.lam:g} theta={exp.theta:g} "
          f"solvers={','.join(s.value for s in exp.solvers)} "
          f"snr={','.join(f'{s:g}' for s in exp.snr_db_list)} seeds={len(exp.seeds)}")

    records = run_experiment(exp)

    for solver_name, by_snr in final_mse_by_snr(records).items():
        for snr_db, final in by_snr.items():
            print(f"  {solver_name:16} {snr_db:6g} dB  final median MSE {final:.4e}")
    print(f"wrote {len(records)} records to {exp.output_dir}")

    if any(r.diverged for r in records):
        print("some cells diverged; see the diverged column", file=sys.stderr)
        sys.exit(EXIT_DIVERGED)


@cli.cmd
def gen_config(preset: str = "clipped_cs", out: str = "", full: bool = False):
    """Print (or write to --out) a preset experiment file."""
    try:
        text = preset_yaml(preset, full)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        sys.exit(EXIT_CONFIG)

    if out:
        Path(out).write_text(text)
        print(f"wrote {out}")
    else:
        print(text, end="")


def main() -> None:
    logging.config.dictConfig(settings.LOGGING)
    cli.run()
