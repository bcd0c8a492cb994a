"""
Brute-force posterior moments by adaptive quadrature.

This is the reference the closed-form denoisers are checked against, so it is
deliberately written from densities alone: nothing here imports the moment
formulas in priors.py or channels.py. Point masses are never integrated; they
are added analytically.

Slow; use it in tests and for tiny reference runs only.
"""
import math
import logging
import typing as t
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.stats import norm

from . import messages, settings
from .errors import DegeneratePosteriorError, DomainError
from .priors import PriorKind, PriorSpec, prior_marginal
from .channels import ChannelKind, ChannelSpec

if t.TYPE_CHECKING:
    from .solvers.base import ProblemInstance


log = logging.getLogger(__name__)

WINDOW_SDS = 12.0
DEFAULT_TOL = 1e-10
QUAD_LIMIT = 1000


@dataclass(frozen=True)
class FactorFn:
    """
    A nonnegative factor f(x) = density(x) + sum of weighted point masses.

    `lo`/`hi` bound the support of the continuous part; `breakpoints` tells the
    integrator where the density has kinks or narrow peaks.
    """
    density: t.Callable[[float], float]
    lo: float = -math.inf
    hi: float = math.inf
    atoms: tuple[tuple[float, float], ...] = ()
    breakpoints: tuple[float, ...] = field(default=())


def quad_moments(
    f: FactorFn, gauss_mean: float, gauss_var: float, tol: float = DEFAULT_TOL
) -> tuple[float, float]:
    """
    Mean and variance of the density proportional to f(x) * N(x; gauss_mean, gauss_var).
    """
    if not gauss_var > 0:
        raise DomainError(f"gauss_var must be positive, got {gauss_var}")
    if not (0 < tol <= 1e-4):
        raise DomainError(f"tol must lie in (0, 1e-4], got {tol}")

    sd = math.sqrt(gauss_var)
    lo = max(gauss_mean - WINDOW_SDS * sd, f.lo)
    hi = min(gauss_mean + WINDOW_SDS * sd, f.hi)
    points = sorted({p for p in (*f.breakpoints, gauss_mean) if lo < p < hi})

    def gauss(x):
        return norm.pdf(x, gauss_mean, sd)

    def moment(g: t.Callable[[float], float], epsabs: float = 0.0) -> float:
        if lo >= hi:
            return 0.0
        val, err = integrate.quad(
            lambda x: g(x) * f.density(x) * gauss(x),
            lo, hi,
            points=points or None,
            epsabs=epsabs,
            epsrel=tol,
            limit=QUAD_LIMIT,
        )
        if err > 10 * max(epsabs, tol * abs(val)):
            log.warning("quadrature error estimate %g exceeds tolerance (value %g)", err, val)
        return val

    atoms = [(pos, w * gauss(pos)) for pos, w in f.atoms if w > 0]

    atom_mass = sum(w for _, w in atoms)
    z = moment(lambda x: 1.0, tol * atom_mass) + atom_mass
    if not z > 0:
        raise DegeneratePosteriorError(
            f"factor has no mass under N({gauss_mean}, {gauss_var})")

    shift = (
        moment(lambda x: x - gauss_mean, tol * z * sd)
        + sum(w * (pos - gauss_mean) for pos, w in atoms)
    ) / z
    mean = gauss_mean + shift

    var = (
        moment(lambda x: (x - mean) ** 2, tol * z * gauss_var)
        + sum(w * (pos - mean) ** 2 for pos, w in atoms)
    ) / z
    return mean, var


def prior_factor(spec: PriorSpec) -> FactorFn:
    spec.validate()

    if spec.kind == PriorKind.point_mass:
        return FactorFn(lambda x: 0.0, atoms=((spec.mean0, 1.0),))

    slab_sd = math.sqrt(spec.slab_var)

    if spec.kind == PriorKind.gaussian:
        return FactorFn(lambda x: norm.pdf(x, spec.mean0, slab_sd))

    lam = spec.lam
    return FactorFn(
        lambda x: lam * norm.pdf(x, spec.mean0, slab_sd),
        atoms=((0.0, 1.0 - lam),),
        breakpoints=(0.0,),
    )


def channel_factor(spec: ChannelSpec, y: float) -> FactorFn:
    """The likelihood p(y|z) as a function of z."""
    spec.validate()
    noise_sd = math.sqrt(spec.noise_var)

    if spec.kind == ChannelKind.awgn:
        return FactorFn(lambda z: norm.pdf(y, z, noise_sd), breakpoints=(y,))

    theta = spec.clip_threshold
    return FactorFn(
        lambda z: norm.pdf(y, min(max(z, -theta), theta), noise_sd),
        breakpoints=(-theta, theta, y),
    )


@dataclass(frozen=True)
class ReferenceStep:
    z_s: np.ndarray
    v_s: np.ndarray
    z_tilde: np.ndarray
    v_tilde: np.ndarray
    x_v: np.ndarray
    v_v: np.ndarray
    x_hat: np.ndarray
    v_hat: np.ndarray
    sanitized_fraction: float


def epmpa_reference_step(
    problem: "ProblemInstance",
    variance_floor: float | None = None,
    variance_cap: float | None = None,
    tol: float = 1e-9,
) -> ReferenceStep:
    """
    One EP message-passing iteration computed edge by edge with scalar loops, every
    non-Gaussian posterior coming from quad_moments. Only usable for a handful of
    variables.
    """
    floor = variance_floor or settings.VARIANCE_FLOOR
    cap = variance_cap or settings.VARIANCE_CAP
    A = np.asarray(problem.A)
    M, N = A.shape

    m0, v0 = prior_marginal(problem.prior)
    v0 = messages.sanitize_variance(v0, floor, cap)

    xf = prior_factor(problem.prior)

    z_s = np.zeros(M)
    v_s = np.zeros(M)
    z_tilde = np.zeros(M)
    v_tilde = np.zeros(M)
    sanitized = 0

    for m in range(M):
        z_s[m] = sum(A[m, n] * m0 for n in range(N))
        v_s[m] = sum(A[m, n] ** 2 * v0 for n in range(N))

        zf = channel_factor(problem.channel, float(problem.y[m]))
        post = messages.GaussianMessage(*quad_moments(zf, z_s[m], v_s[m], tol))
        pseudo = messages.GaussianMessage(z_s[m], v_s[m])
        ext = messages.ep_extrinsic(post, pseudo)

        v_tilde[m] = messages.sanitize_variance(ext.variance, floor, cap)
        if messages.precision_gain(post, pseudo) > 0:
            z_tilde[m] = ext.mean
        else:
            z_tilde[m] = post.mean
            sanitized += 1

    x_v = np.zeros(N)
    v_v = np.zeros(N)
    x_hat = np.zeros(N)
    v_hat = np.zeros(N)

    for n in range(N):
        # Combine the M sum-node messages arriving at variable n.
        combined = messages.GaussianMessage.uninformative()
        for m in range(M):
            x_s = (z_tilde[m] - z_s[m]) / A[m, n] + m0
            v_sn = (v_tilde[m] + v_s[m]) / A[m, n] ** 2
            combined = messages.gaussian_product(
                combined, messages.GaussianMessage(x_s, v_sn))

        x_v[n], v_v[n] = combined.mean, combined.variance
        x_hat[n], v_hat[n] = quad_moments(xf, x_v[n], v_v[n], tol)

    return ReferenceStep(
        z_s, v_s, z_tilde, v_tilde, x_v, v_v, x_hat, v_hat, sanitized / M)
