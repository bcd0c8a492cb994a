"""
EP message passing on the full bipartite graph.

Every edge (m, n) carries its own variable-to-sum message (x_v, v_v) and its own
sum-to-variable message. The latter is stored in precision form,

    prec_s[m, n] = a_mn**2 / (v_tilde_z[m] + v_sm[m])
    info_s[m, n] = prec_s[m, n] * x_s[m, n]
                 = a_mn * (z_tilde[m] - z_s[m]) / (v_tilde_z[m] + v_sm[m])
                   + prec_s[m, n] * x_v[m, n]

so that no entry of A is ever divided by. One iteration:

    I    sum nodes collect z_s, v_sm from their incoming edges
    II   output denoiser, then extrinsic (z_tilde, v_tilde_z)
    III  per-edge sum-to-variable messages
    IV   variable nodes combine them into (x_v_n, v_v_n)
    V/VI input denoiser; each edge gets x_hat_n minus its own contribution

Memory is four dense M x N panels.
"""
import logging
from dataclasses import dataclass

import numpy as np

from ..channels import channel_moments
from ..messages import extrinsic_arrays, sanitize_variance
from ..priors import prior_moments
from .base import (
    Observer, ProblemInstance, RunResult, Snapshot, SolverConfig, StopOn,
    damp, iterate, prior_start,
)


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpmpaState:
    x_v: np.ndarray
    v_v: np.ndarray
    prec_s: np.ndarray
    info_s: np.ndarray

    z_s: np.ndarray
    v_sm: np.ndarray
    z_tilde: np.ndarray
    v_tilde_z: np.ndarray

    # Variable-node aggregates and the posterior they produce.
    x_v_n: np.ndarray
    v_v_n: np.ndarray
    x_hat: np.ndarray
    v_hat: np.ndarray

    @property
    def v_s(self) -> np.ndarray:
        with np.errstate(divide='ignore'):
            return 1.0 / self.prec_s

    @property
    def x_s(self) -> np.ndarray:
        with np.errstate(divide='ignore', invalid='ignore'):
            return self.info_s / self.prec_s


def initial_state(problem: ProblemInstance, config: SolverConfig) -> EpmpaState:
    x0, v0 = prior_start(problem, config)
    M, N = problem.M, problem.N
    empty_m = np.zeros(M)

    return EpmpaState(
        x_v=np.broadcast_to(x0, (M, N)).copy(),
        v_v=np.broadcast_to(v0, (M, N)).copy(),
        prec_s=np.zeros((M, N)),
        info_s=np.zeros((M, N)),
        z_s=empty_m,
        v_sm=empty_m,
        z_tilde=empty_m,
        v_tilde_z=empty_m,
        x_v_n=x0,
        v_v_n=v0,
        x_hat=x0,
        v_hat=v0,
    )


def epmpa_run(
    problem: ProblemInstance,
    config: SolverConfig,
    observer: Observer | None = None,
) -> RunResult:
    A, A_sq = problem.A, problem.A_sq
    floor, cap = config.variance_floor, config.variance_cap

    def step(state: EpmpaState, t: int) -> tuple[EpmpaState, Snapshot]:
        # I
        z_s = np.einsum('mn,mn->m', A, state.x_v)
        v_sm = np.einsum('mn,mn->m', A_sq, state.v_v)

        # II
        post = channel_moments(problem.channel, problem.y, z_s, v_sm)
        z_tilde, v_tilde_z, sanitized = extrinsic_arrays(
            post.mean, post.variance, z_s, v_sm, floor, cap)

        # III
        total = (v_tilde_z + v_sm)[:, None]
        prec_s = A_sq / total
        info_s = A * (z_tilde - z_s)[:, None] / total + prec_s * state.x_v

        # IV
        v_v_n = sanitize_variance(1.0 / prec_s.sum(axis=0), floor, cap)
        x_v_n = v_v_n * info_s.sum(axis=0)

        # V and VI
        den = prior_moments(problem.prior, x_v_n, v_v_n)
        x_hat = damp(den.mean, state.x_hat, config.damping)
        v_hat = sanitize_variance(den.variance, floor, cap)

        v_v = np.broadcast_to(v_hat, A.shape).copy()
        x_v = damp(den.mean[None, :] - v_v * info_s, state.x_v, config.damping)

        new = EpmpaState(
            x_v=x_v,
            v_v=v_v,
            prec_s=prec_s,
            info_s=info_s,
            z_s=z_s,
            v_sm=v_sm,
            z_tilde=z_tilde,
            v_tilde_z=v_tilde_z,
            x_v_n=x_v_n,
            v_v_n=v_v_n,
            x_hat=x_hat,
            v_hat=v_hat,
        )
        snap = Snapshot(
            x_hat=x_hat,
            z_hat=np.asarray(post.mean),
            x_v=x_v_n,
            mean_v_x=float(np.mean(den.variance)),
            mean_v_s=float(np.mean(v_sm)),
            mean_v_v=float(np.mean(v_v_n)),
            extras={'sanitized_fraction': float(np.mean(sanitized))},
        )
        return new, snap

    return iterate(
        'epmpa', problem, config, initial_state(problem, config), step,
        observer=observer, default_stop_on=StopOn.x_v,
    )
