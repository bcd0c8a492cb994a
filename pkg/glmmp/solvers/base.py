"""
What every solver shares: the problem instance, solver configuration, per-iteration
records, the stopping rule and the iteration driver.

A solver is two functions, an initial state and a `step(state, t)` that returns the
next state plus a Snapshot of the quantities the driver records. `iterate()` owns
the loop, so stopping, damping, trajectory recording, observers and error wrapping
behave identically across algorithms.
"""
import math
import time
import logging
import typing as t
from enum import Enum
from functools import cached_property
from dataclasses import dataclass, field, asdict, fields

import numpy as np

from .. import settings
from ..errors import ConfigError, DivergenceError, DomainError, SolverError
from ..priors import PriorSpec, prior_marginal
from ..channels import ChannelSpec
from ..messages import sanitize_variance


log = logging.getLogger(__name__)

StateT = t.TypeVar('StateT')
Observer = t.Callable[[int, t.Any], None]


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """
    y = Q(A x) + noise, with x drawn from `prior` componentwise.

    `x_true` is only used to score iterates; no solver reads it.
    """
    A: np.ndarray
    y: np.ndarray
    prior: PriorSpec
    channel: ChannelSpec
    x_true: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, 'A', _readonly(self.A))
        object.__setattr__(self, 'y', _readonly(self.y))
        if self.x_true is not None:
            object.__setattr__(self, 'x_true', _readonly(self.x_true))

        if self.A.ndim != 2:
            raise DomainError(f"A must be a matrix, got shape {self.A.shape}")
        if self.y.shape != (self.M,):
            raise DomainError(f"y has shape {self.y.shape}, expected ({self.M},)")
        if self.x_true is not None and self.x_true.shape != (self.N,):
            raise DomainError(f"x_true has shape {self.x_true.shape}, expected ({self.N},)")

        self.prior.validate()
        self.channel.validate()

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    @cached_property
    def A_sq(self) -> np.ndarray:
        return _readonly(self.A ** 2)

    @cached_property
    def frobenius_sq(self) -> float:
        return float(self.A_sq.sum())


class StopOn(str, Enum):
    # The aggregate pseudo-observation mean x^v_n.
    x_v = "x_v"
    # The posterior mean estimate.
    x_hat = "x_hat"


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-6
    max_iters: int = 50
    variance_floor: float = field(default_factory=lambda: settings.VARIANCE_FLOOR)
    variance_cap: float = field(default_factory=lambda: settings.VARIANCE_CAP)
    damping: float = 1.0
    record_trajectory: bool = True

    # None picks the solver's own default.
    stop_on: StopOn | None = None

    def __post_init__(self):
        if self.stop_on is not None:
            object.__setattr__(self, 'stop_on', StopOn(self.stop_on))

    def validate(self) -> "SolverConfig":
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be at least 1, got {self.max_iters}")
        if not (0 < self.damping <= 1):
            raise ConfigError(f"damping must lie in (0, 1], got {self.damping}")
        if not (0 < self.variance_floor <= self.variance_cap):
            raise ConfigError(
                f"need 0 < variance_floor <= variance_cap, got "
                f"{self.variance_floor}, {self.variance_cap}")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        if unknown := set(d) - known:
            raise ConfigError(f"unknown solver settings: {sorted(unknown)}")
        try:
            return cls(**d).validate()
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from e

    def asdict(self) -> dict:
        d = asdict(self)
        d['stop_on'] = self.stop_on.value if self.stop_on else None
        return d


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    mse: float | None
    mean_v_x: float
    mean_v_s: float
    mean_v_v: float
    stop_metric: float
    wall_ms: float = 0.0
    extras: dict[str, float] = field(default_factory=dict)


@dataclass
class RunResult:
    x_hat: np.ndarray
    z_hat: np.ndarray
    iterations_run: int
    trajectory: list[IterationRecord]
    converged: bool
    diverged: bool = False

    @property
    def final_mse(self) -> float | None:
        return self.trajectory[-1].mse if self.trajectory else None


@dataclass(frozen=True)
class Snapshot:
    """What a solver step reports back to the driver."""
    x_hat: np.ndarray
    z_hat: np.ndarray
    x_v: np.ndarray
    mean_v_x: float
    mean_v_s: float
    mean_v_v: float
    extras: dict[str, float] = field(default_factory=dict)

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.x_hat))
            and np.all(np.isfinite(self.z_hat))
            and np.all(np.isfinite(self.x_v))
            and math.isfinite(self.mean_v_x)
            and math.isfinite(self.mean_v_s)
            and math.isfinite(self.mean_v_v)
        )


def mse(x_hat: np.ndarray, x_true: np.ndarray) -> float:
    """Per-component mean squared error."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x_hat.shape != x_true.shape:
        raise DomainError(f"length mismatch: {x_hat.shape} vs {x_true.shape}")
    return float(np.mean((x_hat - x_true) ** 2))


def stop_metric(x_now: np.ndarray, x_prev: np.ndarray) -> float:
    """Relative L1 change; zero when x_now is identically zero."""
    total = float(np.sum(np.abs(x_now)))
    delta = float(np.sum(np.abs(np.asarray(x_now) - np.asarray(x_prev))))
    if total == 0:
        return 0.0
    return delta / total


def stop_check(x_now: np.ndarray, x_prev: np.ndarray, epsilon: float) -> bool:
    assert np.shape(x_now) == np.shape(x_prev)
    total = np.sum(np.abs(x_now))
    if total == 0:
        return True
    return bool(np.sum(np.abs(np.asarray(x_now) - np.asarray(x_prev))) <= epsilon * total)


def damp(new: np.ndarray, old: np.ndarray, factor: float) -> np.ndarray:
    if factor == 1:
        return new
    return factor * new + (1 - factor) * old


def prior_start(problem: ProblemInstance, config: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-component E{x|q}, var{x|q}: where every solver starts."""
    m0, v0 = prior_marginal(problem.prior)
    v0 = sanitize_variance(v0, config.variance_floor, config.variance_cap)
    return np.full(problem.N, m0), np.full(problem.N, v0)


def iterate(
    name: str,
    problem: ProblemInstance,
    config: SolverConfig,
    state: StateT,
    step: t.Callable[[StateT, int], tuple[StateT, Snapshot]],
    observer: Observer | None = None,
    default_stop_on: StopOn = StopOn.x_hat,
) -> RunResult:
    config.validate()
    stop_on = config.stop_on or default_stop_on

    x0, _ = prior_start(problem, config)
    prev_stop_vec = x0
    x_hat = x0
    z_hat = problem.A @ x0

    trajectory: list[IterationRecord] = []
    converged = False
    started = time.perf_counter()
    it = 0

    def partial(iterations_run: int) -> RunResult:
        return RunResult(
            x_hat, z_hat, iterations_run, list(trajectory), converged=False, diverged=True)

    for it in range(1, config.max_iters + 1):
        try:
            with np.errstate(all='ignore'):
                state, snap = step(state, it)
        except DivergenceError as e:
            e.result = partial(it - 1)
            raise
        except DomainError as e:
            raise SolverError(f"{name}: {e}", it, partial(it - 1)) from e

        if not snap.is_finite():
            raise DivergenceError(f"{name}: non-finite state", it, partial(it - 1))

        stop_vec = snap.x_v if stop_on == StopOn.x_v else snap.x_hat
        metric = stop_metric(stop_vec, prev_stop_vec)
        x_hat, z_hat = snap.x_hat, snap.z_hat

        if config.record_trajectory:
            trajectory.append(IterationRecord(
                iter=it,
                mse=mse(x_hat, problem.x_true) if problem.x_true is not None else None,
                mean_v_x=snap.mean_v_x,
                mean_v_s=snap.mean_v_s,
                mean_v_v=snap.mean_v_v,
                stop_metric=metric,
                wall_ms=(time.perf_counter() - started) * 1000,
                extras=snap.extras,
            ))

        log.debug(
            "%s iter %d: stop_metric=%.3e mean_v_x=%.3e mean_v_s=%.3e mean_v_v=%.3e",
            name, it, metric, snap.mean_v_x, snap.mean_v_s, snap.mean_v_v)

        if observer:
            observer(it, state)

        if stop_check(stop_vec, prev_stop_vec, config.epsilon):
            converged = True
            break
        prev_stop_vec = stop_vec

    log.info("%s finished after %d iterations (converged=%s)", name, it, converged)
    return RunResult(x_hat, z_hat, it, trajectory, converged)
