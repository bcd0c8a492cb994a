"""
Scalar Gaussian message algebra.

A message is a (mean, variance) pair; an infinite variance is an uninformative
message. Two rules cover every node in the solvers:

    gaussian_product  combine two independent Gaussian beliefs (precisions add)
    ep_extrinsic      remove the incoming message from a posterior (precisions subtract)

For a Gaussian constraint the two are exact inverses of each other. For anything
else the extrinsic variance can come out negative, so callers must pass it
through sanitize_variance before reusing it.
"""
import math
import typing as t
from dataclasses import dataclass

import numpy as np

from . import settings
from .errors import InvalidMessageError


ArrayLike = t.Union[float, np.ndarray]


@dataclass(frozen=True)
class GaussianMessage:
    mean: float
    variance: float

    @property
    def precision(self) -> float:
        return 0.0 if math.isinf(self.variance) else 1.0 / self.variance

    @property
    def is_uninformative(self) -> bool:
        return math.isinf(self.variance)

    @classmethod
    def uninformative(cls) -> "GaussianMessage":
        return cls(0.0, math.inf)

    def validate(self) -> "GaussianMessage":
        if not math.isfinite(self.mean):
            raise InvalidMessageError(f"non-finite mean in {self}")
        if math.isnan(self.variance) or self.variance <= 0:
            raise InvalidMessageError(f"variance must be positive in {self}")
        return self


def ep_extrinsic(post: GaussianMessage, input: GaussianMessage) -> GaussianMessage:
    """
    Divide the incoming message out of the posterior.

    The returned variance is raw: it is negative whenever the posterior is wider
    than the input, which can happen for non-log-concave factors.
    """
    post.validate()
    input.validate()

    prec = post.precision - input.precision
    if prec == 0:
        return GaussianMessage.uninformative()

    var_out = 1.0 / prec
    mean_out = var_out * (post.precision * post.mean - input.precision * input.mean)
    return GaussianMessage(mean_out, var_out)


def gaussian_product(a: GaussianMessage, b: GaussianMessage) -> GaussianMessage:
    a.validate()
    b.validate()

    prec = a.precision + b.precision
    if prec == 0:
        return GaussianMessage.uninformative()

    var = 1.0 / prec
    return GaussianMessage(var * (a.precision * a.mean + b.precision * b.mean), var)


def precision_gain(post: GaussianMessage, input: GaussianMessage) -> float:
    """How much precision the posterior adds over the incoming message."""
    return post.validate().precision - input.validate().precision


@t.overload
def sanitize_variance(v: float, floor: float = ..., cap: float = ...) -> float: ...


@t.overload
def sanitize_variance(v: np.ndarray, floor: float = ..., cap: float = ...) -> np.ndarray: ...


def sanitize_variance(v, floor=None, cap=None):
    """
    Clamp a variance into [floor, cap]. Nonpositive or non-finite values mean
    "no information" and map to the cap.
    """
    floor = settings.VARIANCE_FLOOR if floor is None else floor
    cap = settings.VARIANCE_CAP if cap is None else cap
    assert floor > 0 and cap >= floor

    arr = np.asarray(v, dtype=float)
    usable = np.isfinite(arr) & (arr > 0)
    out = np.where(usable, np.clip(np.where(usable, arr, cap), floor, cap), cap)

    if np.ndim(v) == 0:
        return float(out)
    return out


def extrinsic_arrays(
    post_mean: np.ndarray,
    post_var: np.ndarray,
    in_mean: np.ndarray,
    in_var: np.ndarray,
    floor: float,
    cap: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Elementwise ep_extrinsic followed by sanitize_variance.

    Returns (mean, variance, sanitized) where `sanitized` flags the entries whose
    raw extrinsic variance was unusable and got replaced by the cap. Those entries
    take the posterior mean, which keeps them finite; at the capped variance they
    carry almost no weight downstream.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        prec = 1.0 / post_var - 1.0 / in_var
        raw_var = 1.0 / prec
        raw_mean = raw_var * (post_mean / post_var - in_mean / in_var)

    var = sanitize_variance(raw_var, floor, cap)
    sanitized = ~(np.isfinite(raw_var) & (raw_var > 0))
    mean = np.where(sanitized | ~np.isfinite(raw_mean), post_mean, raw_mean)
    return mean, var, sanitized
