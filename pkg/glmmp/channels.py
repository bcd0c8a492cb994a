"""
Output-side denoisers: the posterior of z given y under a Gaussian pseudo-prior
z ~ N(z_pseudo, v_pseudo).

Two channels are supported, plain AWGN and AWGN after symmetric clipping,

    y = clip(z, theta) + N(0, noise_var).

The clipped posterior splits over the three pieces of the clipping function. On
each saturated piece the likelihood is constant in z, so that piece contributes a
one-sided truncated pseudo-prior; on the linear piece the likelihood is Gaussian
in z and contributes a Gaussian product truncated to (-theta, theta). The three
are mixed with weights computed in the log domain.
"""
import math
import logging
import typing as t
from enum import Enum
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import log_ndtr, logsumexp

from .errors import DomainError


log = logging.getLogger(__name__)

ArrayLike = t.Union[float, np.ndarray]

LOG_2PI = math.log(2 * math.pi)


class ChannelKind(str, Enum):
    awgn = "awgn"
    clipped_awgn = "clipped_awgn"


@dataclass(frozen=True)
class ChannelSpec:
    kind: ChannelKind = ChannelKind.awgn
    noise_var: float = 1.0
    clip_threshold: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, 'kind', ChannelKind(self.kind))

    def validate(self) -> "ChannelSpec":
        if not self.noise_var > 0:
            raise DomainError(f"noise variance must be positive, got {self.noise_var}")
        if self.kind == ChannelKind.clipped_awgn and not (
            0 < self.clip_threshold < math.inf
        ):
            raise DomainError(
                f"clipping threshold must be finite and positive, got {self.clip_threshold}")
        return self

    @classmethod
    def for_snr(cls, snr_db: float, theta: float = math.inf) -> "ChannelSpec":
        """Unit-power signal: the noise variance is the inverse linear SNR."""
        noise_var = 10 ** (-snr_db / 10)
        if math.isinf(theta):
            return cls(ChannelKind.awgn, noise_var).validate()
        return cls(ChannelKind.clipped_awgn, noise_var, theta).validate()

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSpec":
        return cls(**d).validate()

    def asdict(self) -> dict:
        d = asdict(self)
        d['kind'] = self.kind.value
        return d


@dataclass(frozen=True)
class ChannelMoments:
    mean: ArrayLike
    variance: ArrayLike


def clip(z: ArrayLike, theta: float) -> ArrayLike:
    if not theta > 0:
        raise DomainError(f"clipping threshold must be positive, got {theta}")
    out = np.clip(z, -theta, theta)
    return float(out) if np.ndim(z) == 0 else out


def channel_sample(
    spec: ChannelSpec, z: np.ndarray, seed: int | np.random.SeedSequence
) -> np.ndarray:
    spec.validate()
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, math.sqrt(spec.noise_var), np.shape(z))

    if spec.kind == ChannelKind.clipped_awgn:
        return clip(np.asarray(z, dtype=float), spec.clip_threshold) + noise
    return np.asarray(z, dtype=float) + noise


def channel_moments(
    spec: ChannelSpec, y: ArrayLike, z_pseudo: ArrayLike, v_pseudo: ArrayLike
) -> ChannelMoments:
    spec.validate()
    yy = np.asarray(y, dtype=float)
    zs = np.asarray(z_pseudo, dtype=float)
    vs = np.asarray(v_pseudo, dtype=float)

    if np.any(~(vs > 0)):
        raise DomainError("v_pseudo must be positive")

    if spec.kind == ChannelKind.awgn:
        mean, var = _gaussian_product(yy, spec.noise_var, zs, vs)
    else:
        mean, var = _clipped_moments(yy, zs, vs, spec.noise_var, spec.clip_threshold)

    if np.ndim(y) == 0 and np.ndim(z_pseudo) == 0 and np.ndim(v_pseudo) == 0:
        return ChannelMoments(float(mean), float(var))
    return ChannelMoments(mean, var)


def l_stats(
    spec: ChannelSpec, y: ArrayLike, z_pseudo: ArrayLike, v_pseudo: ArrayLike
) -> tuple[ArrayLike, ArrayLike]:
    """
    Score-like quantities of the output channel:

        l_prime       = (E{z|...} - z_pseudo) / v_pseudo
        l_doubleprime = (1 - var{z|...} / v_pseudo) / v_pseudo
    """
    if spec.kind == ChannelKind.awgn:
        # Same quantities, without the cancellation in E{z|...} - z_pseudo.
        spec.validate()
        vs = np.asarray(v_pseudo, dtype=float)
        if np.any(~(vs > 0)):
            raise DomainError("v_pseudo must be positive")
        total = spec.noise_var + vs
        l1 = (np.asarray(y, dtype=float) - np.asarray(z_pseudo, dtype=float)) / total
        l2 = np.broadcast_to(1.0 / total, np.shape(l1)).astype(float)
    else:
        mom = channel_moments(spec, y, z_pseudo, v_pseudo)
        l1 = (np.asarray(mom.mean) - z_pseudo) / v_pseudo
        l2 = (1 - np.asarray(mom.variance) / v_pseudo) / v_pseudo

    if np.ndim(l1) == 0:
        return float(l1), float(l2)
    return l1, l2


def _gaussian_product(y, noise_var, zs, vs):
    var = 1.0 / (1.0 / noise_var + 1.0 / vs)
    return var * (y / noise_var + zs / vs), var


def _log_gauss(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def log_interval_mass(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    log(Phi(b) - Phi(a)) for a < b, accurate in both tails.

    Intervals on the positive side are reflected onto the negative side, where
    log_ndtr keeps full relative precision.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)

    log_hi = log_ndtr(hi)
    log_lo = log_ndtr(lo)
    with np.errstate(divide='ignore'):
        return log_hi + np.log1p(-np.exp(log_lo - log_hi))


def truncated_moments(mu, var, lo, hi):
    """
    Mean, variance and log normalizer of N(mu, var) restricted to [lo, hi].
    Either bound may be infinite.
    """
    sd = np.sqrt(var)
    with np.errstate(invalid='ignore', divide='ignore', over='ignore'):
        a = (lo - mu) / sd
        b = (hi - mu) / sd
        log_z = log_interval_mass(a, b)

        # phi(bound) / Z, and bound * phi(bound) / Z, both zero at infinite bounds.
        ra = np.where(np.isfinite(a), np.exp(-0.5 * (LOG_2PI + a * a) - log_z), 0.0)
        rb = np.where(np.isfinite(b), np.exp(-0.5 * (LOG_2PI + b * b) - log_z), 0.0)
        a_ra = np.where(np.isfinite(a), a * ra, 0.0)
        b_rb = np.where(np.isfinite(b), b * rb, 0.0)

        mean = mu + sd * (ra - rb)
        tvar = var * np.maximum(1 + a_ra - b_rb - (ra - rb) ** 2, 0.0)
    return mean, tvar, log_z


def _clipped_moments(y, zs, vs, noise_var, theta):
    y, zs, vs = np.broadcast_arrays(y, zs, vs)

    # z <= -theta: observation looks like -theta + noise.
    lo_mean, lo_var, lo_logz = truncated_moments(zs, vs, -np.inf, -theta)
    lo_logw = _log_gauss(y, -theta, noise_var) + lo_logz

    # z >= theta
    hi_mean, hi_var, hi_logz = truncated_moments(zs, vs, theta, np.inf)
    hi_logw = _log_gauss(y, theta, noise_var) + hi_logz

    # -theta < z < theta: Gaussian product of likelihood and pseudo-prior.
    in_mu, in_v = _gaussian_product(y, noise_var, zs, vs)
    in_mean, in_var, in_logz = truncated_moments(in_mu, in_v, -theta, theta)
    in_logw = _log_gauss(y, zs, noise_var + vs) + in_logz

    logw = np.stack([lo_logw, in_logw, hi_logw])
    means = np.stack([lo_mean, in_mean, hi_mean])
    variances = np.stack([lo_var, in_var, hi_var])

    weights = np.exp(logw - logsumexp(logw, axis=0))
    live = weights > 0
    means = np.where(live, means, 0.0)
    variances = np.where(live, variances, 0.0)

    mean = np.sum(weights * means, axis=0)
    var = np.sum(weights * (variances + (means - mean) ** 2), axis=0)
    return mean, var
