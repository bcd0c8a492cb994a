"""
AMP for the AWGN channel.

    z_t     = y - A x_hat_t + c_t z_{t-1},    c_t = (N/M) <eta'_{t-1}>
    x_hat   = eta(x_hat_t + A^T z_t; v_v(t))

with scalar variance tracking v_s(t) = (N/M) <v_hat_x(t)>, v_v(t) = noise_var + v_s(t).
Because eta' = var / v_v for any prior, c_t also equals v_s(t) / v_v(t-1); both are
recorded every iteration.
"""
import logging
from dataclasses import dataclass

import numpy as np

from ..channels import ChannelKind, channel_moments
from ..errors import UnsupportedChannelError
from ..priors import prior_moments
from .base import (
    Observer, ProblemInstance, RunResult, Snapshot, SolverConfig,
    damp, iterate, prior_start,
)


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AmpState:
    x_hat: np.ndarray
    z_t: np.ndarray
    v_hat_x: float
    v_v: float
    eta_prime_avg: float
    onsager_coeff: float
    onsager_check: float


def amp_run(
    problem: ProblemInstance,
    config: SolverConfig,
    observer: Observer | None = None,
) -> RunResult:
    if problem.channel.kind != ChannelKind.awgn:
        raise UnsupportedChannelError(
            f"AMP needs an AWGN channel, got {problem.channel.kind.value}")

    A, y = problem.A, problem.y
    noise_var = problem.channel.noise_var
    ratio = problem.N / problem.M

    x0, v0 = prior_start(problem, config)
    start = AmpState(
        x_hat=x0,
        z_t=np.zeros(problem.M),
        v_hat_x=float(np.mean(v0)),
        v_v=0.0,
        eta_prime_avg=0.0,
        onsager_coeff=0.0,
        onsager_check=0.0,
    )

    def step(state: AmpState, t: int) -> tuple[AmpState, Snapshot]:
        v_s = ratio * state.v_hat_x
        v_v = noise_var + v_s

        if t == 1:
            onsager_coeff = onsager_check = 0.0
        else:
            onsager_coeff = ratio * state.eta_prime_avg
            onsager_check = v_s / state.v_v

        z_t = y - A @ state.x_hat + onsager_coeff * state.z_t

        den = prior_moments(problem.prior, state.x_hat + A.T @ z_t, v_v)
        x_hat = damp(den.mean, state.x_hat, config.damping)

        # y - z_t is the output-side pseudo prior mean.
        z_hat = channel_moments(
            problem.channel, y, y - z_t, max(v_s, config.variance_floor)).mean

        new = AmpState(
            x_hat=x_hat,
            z_t=z_t,
            v_hat_x=float(np.mean(den.variance)),
            v_v=v_v,
            eta_prime_avg=float(np.mean(den.derivative)),
            onsager_coeff=onsager_coeff,
            onsager_check=onsager_check,
        )
        snap = Snapshot(
            x_hat=x_hat,
            z_hat=np.asarray(z_hat),
            x_v=state.x_hat + A.T @ z_t,
            mean_v_x=new.v_hat_x,
            mean_v_s=v_s,
            mean_v_v=v_v,
            extras={'onsager_coeff': onsager_coeff, 'onsager_check': onsager_check},
        )
        return new, snap

    return iterate('amp', problem, config, start, step, observer=observer)
