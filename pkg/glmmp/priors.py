"""
Input-side denoisers.

Given a pseudo-observation r = x + N(0, v), these return the posterior mean and
variance of x under the configured prior, plus d(mean)/dr. The same PriorSpec is
shared by every component of the signal.

All moment functions take scalars or numpy arrays and broadcast like numpy.
"""
import logging
import typing as t
from enum import Enum
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import expit

from .errors import DomainError


log = logging.getLogger(__name__)

ArrayLike = t.Union[float, np.ndarray]

LOG_2PI = float(np.log(2 * np.pi))


class PriorKind(str, Enum):
    bernoulli_gaussian = "bernoulli_gaussian"
    gaussian = "gaussian"
    point_mass = "point_mass"


@dataclass(frozen=True)
class PriorSpec:
    """
    Bernoulli-Gaussian: x is 0 with probability 1 - lam, otherwise drawn from the
    slab N(mean0, var0 / lam). With mean0 = 0 the marginal variance is var0.
    """
    kind: PriorKind = PriorKind.bernoulli_gaussian
    lam: float = 1.0
    mean0: float = 0.0
    var0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', PriorKind(self.kind))

    def validate(self) -> "PriorSpec":
        if not (0 < self.lam <= 1):
            raise DomainError(f"sparsity rate must lie in (0, 1], got {self.lam}")
        if self.kind != PriorKind.point_mass and not self.var0 > 0:
            raise DomainError(f"prior variance must be positive, got {self.var0}")
        return self

    @property
    def slab_var(self) -> float:
        if self.kind == PriorKind.bernoulli_gaussian:
            return self.var0 / self.lam
        return self.var0

    @classmethod
    def bernoulli_gaussian(cls, lam: float) -> "PriorSpec":
        return cls(PriorKind.bernoulli_gaussian, lam=lam).validate()

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        return cls(**d).validate()

    def asdict(self) -> dict:
        d = asdict(self)
        d['kind'] = self.kind.value
        return d


@dataclass(frozen=True)
class DenoiserOutput:
    mean: ArrayLike
    variance: ArrayLike
    # d(mean)/d(pseudo_obs); always variance / pseudo_var for a Gaussian likelihood.
    derivative: ArrayLike


def _log_gauss(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def prior_marginal(spec: PriorSpec) -> tuple[float, float]:
    """E{x|q} and var{x|q}: the moments solvers start from."""
    spec.validate()

    if spec.kind == PriorKind.point_mass:
        return spec.mean0, 0.0
    elif spec.kind == PriorKind.gaussian:
        return spec.mean0, spec.var0

    lam = spec.lam
    mean = lam * spec.mean0
    second = lam * (spec.slab_var + spec.mean0 ** 2)
    return mean, second - mean ** 2


def prior_moments(spec: PriorSpec, pseudo_obs: ArrayLike, pseudo_var: ArrayLike) -> DenoiserOutput:
    spec.validate()
    r = np.asarray(pseudo_obs, dtype=float)
    v = np.asarray(pseudo_var, dtype=float)

    if np.any(~(v > 0)):
        raise DomainError("pseudo_var must be positive")

    if spec.kind == PriorKind.point_mass:
        mean = np.broadcast_to(spec.mean0, np.broadcast(r, v).shape).astype(float)
        var = np.zeros_like(mean)

    elif spec.kind == PriorKind.gaussian:
        s = spec.var0
        var = s * v / (s + v)
        mean = (s * r + v * spec.mean0) / (s + v)

    else:
        mean, var = _bernoulli_gaussian_moments(spec, r, v)

    deriv = var / v
    scalar = np.ndim(pseudo_obs) == 0 and np.ndim(pseudo_var) == 0

    if scalar:
        return DenoiserOutput(float(mean), float(var), float(deriv))
    return DenoiserOutput(mean, var, deriv)


def _bernoulli_gaussian_moments(spec: PriorSpec, r: np.ndarray, v: np.ndarray):
    """
    Spike-and-slab posterior. The slab responsibility is a logistic function of
    the log evidence ratio, which stays finite however large r**2 / v gets.
    """
    s = spec.slab_var
    mu0 = spec.mean0

    with np.errstate(divide='ignore'):
        log_odds_prior = np.log(spec.lam) - np.log1p(-spec.lam)

    log_slab = _log_gauss(r, mu0, s + v)
    log_spike = _log_gauss(r, 0.0, v)
    pi = expit(log_odds_prior + log_slab - log_spike)

    slab_var = s * v / (s + v)
    slab_mean = (s * r + v * mu0) / (s + v)

    mean = pi * slab_mean
    var = pi * slab_var + pi * (1 - pi) * slab_mean ** 2
    return mean, var


def prior_sample(spec: PriorSpec, n: int, seed: int | np.random.SeedSequence) -> np.ndarray:
    spec.validate()
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")

    rng = np.random.default_rng(seed)

    if spec.kind == PriorKind.point_mass:
        return np.full(n, spec.mean0)
    elif spec.kind == PriorKind.gaussian:
        return rng.normal(spec.mean0, np.sqrt(spec.var0), n)

    support = rng.random(n) < spec.lam
    slab = rng.normal(spec.mean0, np.sqrt(spec.slab_var), n)
    return np.where(support, slab, 0.0)
