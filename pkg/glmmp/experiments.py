"""
Synthetic problem generation and the experiment harness.

An experiment is a grid of (solver, snr_db, seed) cells. Each cell generates its
instance from the seed alone, runs one solver and yields one ResultRecord per
iteration. Cells run concurrently; records are sorted before anything is
written, so output files depend only on the configuration.

Files written into output_dir:

    records.csv     one row per solver-iteration
    summary.csv     median MSE over seeds per (solver, snr_db, iter)
    records.avro    records.csv as an Avro archive
    plot.gp         gnuplot script drawing summary.csv
    metrics.prom    prometheus textfile
"""
import csv
import math
import hashlib
import time
import logging
import dataclasses
import typing as t
from pathlib import Path
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import fastavro
import numpy as np
import yaml

from . import metrics, settings
from .channels import ChannelSpec, channel_sample
from .errors import ConfigError, DomainError, SolverError
from .priors import PriorSpec, prior_sample
from .solvers import SolverConfig, SolverName, run_solver
from .solvers.base import ProblemInstance, RunResult, mse, prior_start


log = logging.getLogger(__name__)

CSV_HEADER = ['solver', 'seed', 'snr_db', 'iter', 'mse', 'stop_metric', 'wall_ms', 'diverged']
SUMMARY_HEADER = ['solver', 'snr_db', 'iter', 'median_mse']


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "default"
    M: int = 500
    N: int = 500
    lam: float = 0.5
    theta: float = 1.0
    snr_db_list: tuple[float, ...] = (20.0,)
    solvers: tuple[SolverName, ...] = (SolverName.gamp,)
    seeds: tuple[int, ...] = (0,)
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    output_dir: Path = field(default_factory=lambda: settings.OUTPUT_DIR)

    # Entries of A are drawn with variance a_var / M, then rescaled to 1 / M.
    a_var: float = 1.0

    # Fill the wall_ms column. Off by default since it makes output nondeterministic.
    record_timing: bool = False

    def __post_init__(self):
        def coerce(name, fn):
            object.__setattr__(self, name, fn(getattr(self, name)))

        try:
            coerce('M', int)
            coerce('N', int)
            coerce('lam', float)
            coerce('theta', float)
            coerce('a_var', float)
            coerce('snr_db_list', lambda v: tuple(float(i) for i in _aslist(v)))
            coerce('solvers', lambda v: tuple(SolverName(i) for i in _aslist(v)))
            coerce('seeds', lambda v: tuple(int(i) for i in _aslist(v)))
            coerce('output_dir', Path)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"experiment {self.name!r}: {e}") from e

    def validate(self) -> "ExperimentConfig":
        def bad(msg):
            return ConfigError(f"experiment {self.name!r}: {msg}")

        if self.M < 1 or self.N < 1:
            raise bad(f"M and N must be at least 1, got {self.M}, {self.N}")
        if not (0 < self.lam <= 1):
            raise bad(f"lam must lie in (0, 1], got {self.lam}")
        if not self.theta > 0:
            raise bad(f"theta must be positive or inf, got {self.theta}")
        if not self.a_var > 0:
            raise bad(f"a_var must be positive, got {self.a_var}")
        if not self.snr_db_list:
            raise bad("snr_db_list is empty")
        if not self.solvers:
            raise bad("no solvers selected")
        if not self.seeds:
            raise bad("no seeds given")
        if SolverName.amp in self.solvers and not math.isinf(self.theta):
            raise bad("amp needs an unclipped channel (theta = inf)")

        self.solver_config.validate()
        return self

    @classmethod
    def from_dict(cls, d: dict, name: str = "default") -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)} - {'solver_config', 'name'}
        solver = d.pop('solver', None) or {}

        if unknown := set(d) - known:
            raise ConfigError(f"experiment {name!r}: unknown settings {sorted(unknown)}")
        if not isinstance(solver, dict):
            raise ConfigError(f"experiment {name!r}: 'solver' must be a mapping")

        return cls(name=name, solver_config=SolverConfig.from_dict(solver), **d).validate()

    def asdict(self) -> dict:
        return {
            'M': self.M,
            'N': self.N,
            'lam': self.lam,
            'theta': self.theta,
            'snr_db_list': list(self.snr_db_list),
            'solvers': [s.value for s in self.solvers],
            'seeds': list(self.seeds),
            'output_dir': str(self.output_dir),
            'a_var': self.a_var,
            'record_timing': self.record_timing,
            'solver': self.solver_config.asdict(),
        }


def _aslist(v) -> list:
    if isinstance(v, (str, int, float)):
        return [v]
    return list(v)


def load_experiments(path: Path | str) -> dict[str, ExperimentConfig]:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"can't read {path}: {e}") from e

    if not isinstance(data, dict) or not isinstance(data.get('experiments'), dict):
        raise ConfigError(f"{path}: expected a top-level 'experiments' mapping")

    return {
        str(name): ExperimentConfig.from_dict(d or {}, name=str(name))
        for name, d in data['experiments'].items()
    }


def load_experiment(path: Path | str, name: str = "") -> ExperimentConfig:
    experiments = load_experiments(path)
    if not name:
        if len(experiments) != 1:
            raise ConfigError(
                f"{path} holds several experiments, pick one of {sorted(experiments)}")
        [name] = experiments
    if name not in experiments:
        raise ConfigError(f"no experiment {name!r} in {path}")
    return experiments[name]


def generate_problem(
    M: int,
    N: int,
    lam: float,
    theta: float,
    snr_db: float,
    seed: int,
    a_var: float = 1.0,
) -> ProblemInstance:
    """
    A ~ N(0, a_var/M) iid, x ~ Bernoulli-Gaussian(lam), y = clip(Ax, theta) + noise
    with noise variance 10**(-snr_db/10). The matrix, signal and noise each get
    their own child of SeedSequence(seed). The result is rescaled to unit scale.
    """
    if M < 1 or N < 1:
        raise DomainError(f"M and N must be at least 1, got {M}, {N}")

    prior = PriorSpec.bernoulli_gaussian(lam)
    channel = ChannelSpec.for_snr(snr_db, theta)
    matrix_seed, signal_seed, noise_seed = np.random.SeedSequence(seed).spawn(3)

    A = np.random.default_rng(matrix_seed).normal(0.0, math.sqrt(a_var / M), (M, N))
    x = prior_sample(prior, N, signal_seed)
    y = channel_sample(channel, A @ x, noise_seed)

    problem = ProblemInstance(A=A, y=y, prior=prior, channel=channel, x_true=x)
    if a_var == 1:
        return problem
    return rescale_problem(problem, a_var)


def rescale_problem(problem: ProblemInstance, a_var: float) -> ProblemInstance:
    """
    Map an instance whose A has entry variance a_var/M onto one with 1/M, leaving
    x unchanged: A, y and the clipping threshold shrink by sqrt(a_var), the noise
    variance by a_var.
    """
    if not a_var > 0:
        raise DomainError(f"a_var must be positive, got {a_var}")
    scale = math.sqrt(a_var)

    channel = dataclasses.replace(
        problem.channel,
        noise_var=problem.channel.noise_var / a_var,
        clip_threshold=problem.channel.clip_threshold / scale,
    )
    return ProblemInstance(
        A=problem.A / scale,
        y=problem.y / scale,
        prior=problem.prior,
        channel=channel,
        x_true=problem.x_true,
    )


@dataclass(frozen=True, order=True)
class ResultRecord:
    solver: str
    snr_db: float
    seed: int
    iter: int
    mse: float
    stop_metric: float
    wall_ms: float
    diverged: bool

    def as_row(self) -> list[str]:
        return [
            self.solver,
            str(self.seed),
            repr(self.snr_db),
            str(self.iter),
            repr(self.mse),
            repr(self.stop_metric),
            repr(self.wall_ms),
            str(int(self.diverged)),
        ]

    def avro_record(self) -> dict:
        return dataclasses.asdict(self)


records_avro_schema = fastavro.parse_schema(
    {
        "doc": "Per-iteration solver results",
        "name": "ResultRecord",
        "type": "record",
        "fields": [
            {
                "name": "solver",
                "type": {
                    "type": "enum",
                    "name": "SolverName",
                    "symbols": [s.value for s in SolverName],
                },
            },
            {"name": "snr_db", "type": "double"},
            {"name": "seed", "type": "long"},
            {"name": "iter", "type": "int"},
            {"name": "mse", "type": "double"},
            {"name": "stop_metric", "type": "double"},
            {"name": "wall_ms", "type": "double"},
            {"name": "diverged", "type": "boolean"},
        ],
    }
)


@dataclass(frozen=True, order=True)
class Cell:
    solver: SolverName
    snr_db: float
    seed: int


@dataclass
class CellOutcome:
    records: list[ResultRecord]
    diverged: bool
    seconds: float


def run_cell(config: ExperimentConfig, cell: Cell) -> CellOutcome:
    started = time.perf_counter()
    solver_config = dataclasses.replace(config.solver_config, record_trajectory=True)
    problem = generate_problem(
        config.M, config.N, config.lam, config.theta, cell.snr_db, cell.seed, config.a_var)

    result: RunResult | None
    diverged = False
    try:
        result = run_solver(cell.solver, problem, solver_config)
    except SolverError as e:
        log.exception("cell %s diverged", cell)
        result, diverged = e.result, True
    except Exception:
        log.exception("cell %s failed", cell)
        result, diverged = None, True

    def record(it, mse_, metric, wall_ms):
        return ResultRecord(
            solver=cell.solver.value,
            snr_db=cell.snr_db,
            seed=cell.seed,
            iter=it,
            mse=mse_,
            stop_metric=metric,
            wall_ms=wall_ms if config.record_timing else 0.0,
            diverged=diverged,
        )

    assert problem.x_true is not None
    records = [
        record(r.iter, r.mse, r.stop_metric, r.wall_ms)
        for r in (result.trajectory if result else [])
    ]
    if not records:
        # Nothing finite got recorded; report the starting point.
        x0, _ = prior_start(problem, solver_config)
        records = [record(0, mse(x0, problem.x_true), math.nan, 0.0)]

    seconds = time.perf_counter() - started
    log.info("cell %s: %d iterations in %.2fs%s",
             cell, len(records), seconds, " (diverged)" if diverged else "")
    return CellOutcome(records, diverged, seconds)


def run_experiment(config: ExperimentConfig) -> list[ResultRecord]:
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.reset()

    cells = sorted(
        Cell(solver, snr_db, seed)
        for solver in config.solvers
        for snr_db in config.snr_db_list
        for seed in config.seeds
    )
    log.info("running %d cells of experiment %r on %d threads",
             len(cells), config.name, settings.THREADS)

    outcomes: dict[Cell, CellOutcome] = {}
    with ThreadPoolExecutor(max_workers=settings.THREADS) as e:
        promises = {cell: e.submit(run_cell, config, cell) for cell in cells}

        for cell, promise in promises.items():
            outcomes[cell] = outcome = promise.result()

            (metrics.CELLS_DIVERGED if outcome.diverged else metrics.CELLS_COMPLETED).inc()
            if config.record_timing:
                metrics.CELL_WALL_TIME.labels(
                    cell.solver.value, str(cell.snr_db), str(cell.seed)).set(outcome.seconds)

    records = sorted(r for outcome in outcomes.values() for r in outcome.records)

    for solver, by_snr in final_mse_by_snr(records).items():
        for snr_db, final in by_snr.items():
            metrics.FINAL_MSE.labels(solver, str(snr_db)).set(final)

    write_csv(out / "records.csv", records)
    write_summary(out / "summary.csv", median_curves(records))
    write_avro(out / "records.avro", records, avro_sync_marker(config))
    write_plot_script(out / "plot.gp", config)
    metrics.write_metrics(out)
    return records


def median_curves(
    records: t.Iterable[ResultRecord],
) -> dict[tuple[str, float], list[tuple[int, float]]]:
    """
    Median MSE over seeds at each iteration, per (solver, snr_db).

    Seeds that stopped early keep contributing their last MSE, which is where
    their estimate stayed.
    """
    by_seed: dict[tuple[str, float], dict[int, list[tuple[int, float]]]] = (
        defaultdict(lambda: defaultdict(list)))
    for r in records:
        by_seed[(r.solver, r.snr_db)][r.seed].append((r.iter, r.mse))

    curves = {}
    for key, seeds in sorted(by_seed.items()):
        trajectories = [sorted(traj) for traj in seeds.values()]
        iters = sorted({it for traj in trajectories for it, _ in traj})
        curve = []

        for it in iters:
            values = []
            for traj in trajectories:
                upto = [m for i, m in traj if i <= it]
                values.append(upto[-1] if upto else traj[0][1])
            curve.append((it, float(np.median(values))))

        curves[key] = curve
    return curves


def final_mse_by_snr(records: t.Iterable[ResultRecord]) -> dict[str, dict[float, float]]:
    """Median over seeds of each cell's last recorded MSE."""
    last: dict[tuple[str, float, int], ResultRecord] = {}
    for r in records:
        key = (r.solver, r.snr_db, r.seed)
        if key not in last or r.iter > last[key].iter:
            last[key] = r

    grouped: dict[str, dict[float, list[float]]] = defaultdict(lambda: defaultdict(list))
    for (solver, snr_db, _), r in sorted(last.items()):
        grouped[solver][snr_db].append(r.mse)

    return {
        solver: {snr_db: float(np.median(v)) for snr_db, v in by_snr.items()}
        for solver, by_snr in grouped.items()
    }


def write_csv(path: Path, records: t.Iterable[ResultRecord]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.as_row())


def write_summary(path: Path, curves: dict[tuple[str, float], list[tuple[int, float]]]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for (solver, snr_db), curve in curves.items():
            for it, median in curve:
                w.writerow([solver, repr(snr_db), it, repr(median)])


def avro_sync_marker(config: ExperimentConfig) -> bytes:
    """The 16-byte Avro block separator, fixed per experiment name."""
    return hashlib.md5(config.name.encode()).digest()


def write_avro(
    path: Path,
    records: t.Iterable[ResultRecord],
    sync_marker: bytes | None = None,
) -> None:
    with open(path, "wb") as f:
        fastavro.writer(
            f, records_avro_schema, [r.avro_record() for r in records], sync_marker=sync_marker)


def read_avro(path: Path) -> list[ResultRecord]:
    with open(path, "rb") as f:
        return [ResultRecord(**rec) for rec in fastavro.reader(f)]


PLOT_TEMPLATE = """\
# Generated by glm-mp for experiment {name!r}. Run: gnuplot plot.gp
set datafile separator ','
set terminal pngcairo size 1000,700
set output 'mse.png'
set logscale y
set xlabel 'iteration'
set ylabel 'MSE (median over seeds)'
set key outside right
set title '{title}'
plot \\
{curves}
"""


def write_plot_script(path: Path, config: ExperimentConfig) -> None:
    curves = []
    for solver in config.solvers:
        for snr_db in config.snr_db_list:
            curves.append(
                f"  'summary.csv' skip 1 using 3:(strcol(1) eq '{solver.value}' "
                f"&& $2 == {snr_db!r} ? $4 : NaN) "
                f"with linespoints title '{solver.value} {snr_db:g} dB'"
            )
    title = f"M={config.M}, N={config.N}, lambda={config.lam:g}, theta={config.theta:g}"
    path.write_text(PLOT_TEMPLATE.format(
        name=config.name, title=title, curves=", \\\n".join(curves)))


def _clipped_cs_experiment(theta: float, solvers: list[str], size: int, name: str) -> dict:
    return {
        'M': size,
        'N': size,
        'lam': 0.5,
        'theta': theta,
        'snr_db_list': [10.0, 15.0, 20.0, 25.0, 30.0],
        'solvers': solvers,
        'seeds': list(range(10)),
        'output_dir': f"results/{name}",
        'solver': {
            'epsilon': 1e-6,
            'max_iters': 50,
            'damping': 1.0,
        },
    }


def clipped_cs_preset(full: bool = False) -> dict:
    """
    The clipped compressed sensing comparison, plus its unclipped counterpart where
    AMP applies. The default is scaled to M = N = 2000; `full` runs M = N = 10**4
    and leaves out EP-MPA, whose M x N panels don't fit at that size.
    """
    size = 10_000 if full else 2000
    clipped = ['gamp', 'gamp_simplified'] if full else ['epmpa', 'gamp', 'gamp_simplified']
    unclipped = [*clipped, 'amp']

    return {
        'experiments': {
            'clipped_cs': _clipped_cs_experiment(1.0, clipped, size, 'clipped_cs'),
            'awgn_cs': _clipped_cs_experiment(math.inf, unclipped, size, 'awgn_cs'),
        },
    }


PRESETS: dict[str, t.Callable[[bool], dict]] = {
    'clipped_cs': clipped_cs_preset,
}


def preset_yaml(name: str, full: bool = False) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, choose from {sorted(PRESETS)}")
    return yaml.safe_dump(PRESETS[name](full), sort_keys=False)
