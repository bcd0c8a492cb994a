import typing as t
from enum import Enum

from .base import (
    IterationRecord, Observer, ProblemInstance, RunResult, SolverConfig, StopOn,
    mse, stop_check, stop_metric,
)
from .epmpa import EpmpaState, epmpa_run
from .gamp import GampState, SimplifiedGampState, gamp_run, gamp_simplified_run
from .amp import AmpState, amp_run


class SolverName(str, Enum):
    epmpa = "epmpa"
    gamp = "gamp"
    gamp_simplified = "gamp_simplified"
    amp = "amp"


SolverFn = t.Callable[[ProblemInstance, SolverConfig, t.Optional[Observer]], RunResult]

SOLVERS: dict[SolverName, SolverFn] = {
    SolverName.epmpa: epmpa_run,
    SolverName.gamp: gamp_run,
    SolverName.gamp_simplified: gamp_simplified_run,
    SolverName.amp: amp_run,
}


def run_solver(
    name: SolverName | str,
    problem: ProblemInstance,
    config: SolverConfig,
    observer: Observer | None = None,
) -> RunResult:
    return SOLVERS[SolverName(name)](problem, config, observer)


__all__ = [
    'AmpState',
    'EpmpaState',
    'GampState',
    'IterationRecord',
    'ProblemInstance',
    'RunResult',
    'SOLVERS',
    'SimplifiedGampState',
    'SolverConfig',
    'SolverName',
    'StopOn',
    'amp_run',
    'epmpa_run',
    'gamp_run',
    'gamp_simplified_run',
    'mse',
    'run_solver',
    'stop_check',
    'stop_metric',
]
