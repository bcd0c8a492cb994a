"""
MMSE GAMP: the node-wise O(MN) form of EP message passing.

Per-edge messages collapse onto per-node quantities. The output side is summarised
by the channel scores

    l_prime  = (E{z|y, z_s; v_s} - z_s) / v_s
    l_dprime = (1 - var{z|y, z_s; v_s} / v_s) / v_s

and the previous iteration's l_prime is the memory term in z_s.

gamp_simplified_run further replaces every per-node variance by its average, which
is the form to use when A has well-balanced rows and columns.
"""
import logging
from dataclasses import dataclass

import numpy as np

from ..channels import channel_moments, l_stats
from ..errors import DivergenceError
from ..messages import sanitize_variance
from ..priors import prior_moments
from .base import (
    Observer, ProblemInstance, RunResult, Snapshot, SolverConfig,
    damp, iterate, prior_start,
)


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GampState:
    x_hat: np.ndarray
    v_hat_x: np.ndarray
    x_v: np.ndarray
    v_v: np.ndarray
    z_s: np.ndarray
    v_s: np.ndarray
    l_prime: np.ndarray
    l_dprime: np.ndarray
    l_prime_prev: np.ndarray


def gamp_run(
    problem: ProblemInstance,
    config: SolverConfig,
    observer: Observer | None = None,
) -> RunResult:
    A, A_sq = problem.A, problem.A_sq
    floor, cap = config.variance_floor, config.variance_cap

    x0, v0 = prior_start(problem, config)
    zeros_m = np.zeros(problem.M)
    start = GampState(
        x_hat=x0, v_hat_x=v0, x_v=x0, v_v=v0,
        z_s=zeros_m, v_s=zeros_m,
        l_prime=zeros_m, l_dprime=zeros_m, l_prime_prev=zeros_m,
    )

    def step(state: GampState, t: int) -> tuple[GampState, Snapshot]:
        v_s = A_sq @ state.v_hat_x
        z_s = A @ state.x_hat - v_s * state.l_prime

        l1, l2 = l_stats(problem.channel, problem.y, z_s, v_s)

        v_v = sanitize_variance(1.0 / (A_sq.T @ l2), floor, cap)
        x_v = state.x_hat + v_v * (A.T @ l1)

        den = prior_moments(problem.prior, x_v, v_v)
        x_hat = damp(den.mean, state.x_hat, config.damping)
        v_hat_x = sanitize_variance(den.variance, floor, cap)

        new = GampState(
            x_hat=x_hat,
            v_hat_x=v_hat_x,
            x_v=x_v,
            v_v=v_v,
            z_s=z_s,
            v_s=v_s,
            l_prime=l1,
            l_dprime=l2,
            l_prime_prev=state.l_prime,
        )
        snap = Snapshot(
            x_hat=x_hat,
            z_hat=z_s + v_s * l1,
            x_v=x_v,
            mean_v_x=float(np.mean(den.variance)),
            mean_v_s=float(np.mean(v_s)),
            mean_v_v=float(np.mean(v_v)),
        )
        return new, snap

    return iterate('gamp', problem, config, start, step, observer=observer)


@dataclass(frozen=True)
class SimplifiedGampState:
    x_hat: np.ndarray
    v_hat_x: float
    v_hat_x_prev: float
    z: np.ndarray
    s: np.ndarray
    v_s: float
    v_v: float
    phi_prime_avg: float


def gamp_simplified_run(
    problem: ProblemInstance,
    config: SolverConfig,
    observer: Observer | None = None,
) -> RunResult:
    A = problem.A
    floor, cap = config.variance_floor, config.variance_cap
    row_norm = problem.frobenius_sq / problem.M
    col_norm = problem.frobenius_sq / problem.N

    x0, v0 = prior_start(problem, config)
    v_start = float(np.mean(v0))
    zeros_m = np.zeros(problem.M)
    start = SimplifiedGampState(
        x_hat=x0,
        # Equal so the memory ratio is 1 on the first pass.
        v_hat_x=v_start,
        v_hat_x_prev=v_start,
        z=zeros_m,
        s=zeros_m,
        v_s=0.0,
        v_v=0.0,
        phi_prime_avg=0.0,
    )

    def step(state: SimplifiedGampState, t: int) -> tuple[SimplifiedGampState, Snapshot]:
        v_s = state.v_hat_x * row_norm
        z = A @ state.x_hat - (state.v_hat_x / state.v_hat_x_prev) * state.s

        post = channel_moments(problem.channel, problem.y, z, v_s)
        s = post.mean - z
        phi_prime_avg = float(np.mean(post.variance)) / v_s

        if not phi_prime_avg < 1:
            raise DivergenceError(
                f"gamp_simplified: <phi'> = {phi_prime_avg:.6g} leaves no gain", t)

        gain = 1.0 / (col_norm * (1 - phi_prime_avg))
        x = state.x_hat + gain * (A.T @ s)
        v_v = float(sanitize_variance(v_s * gain, floor, cap))

        den = prior_moments(problem.prior, x, v_v)
        x_hat = damp(den.mean, state.x_hat, config.damping)
        v_hat_x = float(sanitize_variance(float(np.mean(den.variance)), floor, cap))

        new = SimplifiedGampState(
            x_hat=x_hat,
            v_hat_x=v_hat_x,
            v_hat_x_prev=state.v_hat_x,
            z=z,
            s=s,
            v_s=v_s,
            v_v=v_v,
            phi_prime_avg=phi_prime_avg,
        )
        snap = Snapshot(
            x_hat=x_hat,
            z_hat=np.asarray(post.mean),
            x_v=x,
            mean_v_x=float(np.mean(den.variance)),
            mean_v_s=v_s,
            mean_v_v=v_v,
            extras={'phi_prime_avg': phi_prime_avg},
        )
        return new, snap

    return iterate('gamp_simplified', problem, config, start, step, observer=observer)
