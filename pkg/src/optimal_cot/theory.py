"""Accuracy model of an N-step chain of thought and its optimal length.

A task with ``T`` operators is solved in ``N`` steps by a model that can
handle ``M`` operators per step.  With the linear error model

    sub-question error  sigma = T / C
    sub-answer error    E     = T / (N M)

the final accuracy is ``A(N) = alpha * [(1 - sigma)(1 - E)]^N`` with
``alpha = (1 - sigma)^(2T)`` independent of ``N``.  ``A`` rises then falls in
``N``; its continuous maximiser has a closed form through the lower branch
of the Lambert W function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BoundInapplicableError, DomainError, InfeasibleError
from .lambert import lambert_wm1

MAX_SIGMA = 0.9
# e^2 (1 - sigma) must clear 1 by more than rounding noise
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class TheorySetting:
    """Task difficulty, training-regime cap and model capability.

    Attributes:
        difficulty: total operator count ``T`` of the task.
        max_difficulty: hardest task seen in training, ``C``.
        capability: operators the model solves in one step, ``M``.
    """

    difficulty: float
    max_difficulty: float
    capability: float

    def __post_init__(self):
        T, C, M = self.difficulty, self.max_difficulty, self.capability
        if not all(math.isfinite(v) for v in (T, C, M)):
            raise DomainError(f"non-finite setting T={T}, C={C}, M={M}")
        if T <= 0 or M <= 0:
            raise DomainError(f"T and M must be positive, got T={T}, M={M}")
        if C <= T:
            raise DomainError(f"need C > T, got T={T}, C={C}")
        if T / C > MAX_SIGMA:
            raise DomainError(f"sigma = T/C = {T / C:.4g} exceeds {MAX_SIGMA}")

    @property
    def sigma(self) -> float:
        return self.difficulty / self.max_difficulty

    @property
    def log_alpha(self) -> float:
        return 2.0 * self.difficulty * math.log1p(-self.sigma)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.difficulty, self.max_difficulty, self.capability)


@dataclass
class AccuracyCurve:
    """Integer-N accuracy samples of one setting."""

    setting: TheorySetting
    n_steps: np.ndarray
    accuracy: np.ndarray
    shape_accuracy: np.ndarray
    # natural log of shape_accuracy; keeps the ordering when exp() goes subnormal
    log_shape: np.ndarray

    @property
    def alpha(self) -> float:
        return math.exp(self.setting.log_alpha)

    def argmax(self) -> int:
        # np.argmax returns the first maximum: ties go to the smaller N
        return int(self.n_steps[int(np.argmax(self.log_shape))])

    def points(self):
        return list(zip(self.n_steps.tolist(), self.accuracy.tolist(), self.shape_accuracy.tolist()))


@dataclass(frozen=True)
class StochasticErrorParams:
    """Beta shape parameters of the random per-step error model."""

    alpha1: float
    beta1: float
    alpha2: float
    beta2: float

    def __post_init__(self):
        if min(self.alpha1, self.beta1, self.alpha2, self.beta2) <= 0:
            raise InfeasibleError(
                f"Beta parameters must be positive, got {self.alpha1}, {self.beta1}, "
                f"{self.alpha2}, {self.beta2}"
            )

    @classmethod
    def from_setting(cls, setting: TheorySetting, n_steps: int) -> "StochasticErrorParams":
        T, C, M = setting.as_tuple()
        if n_steps * M <= T:
            raise InfeasibleError(f"N*M = {n_steps * M} <= T = {T}")
        return cls(alpha1=T, beta1=C - T, alpha2=T, beta2=n_steps * M - T)


def sub_question_error(setting: TheorySetting) -> float:
    return setting.sigma


def sub_answer_error(setting: TheorySetting, n_steps: float) -> float:
    """Per-step answer error ``T / (N M)``; raises when it would reach 1."""
    T, _, M = setting.as_tuple()
    if n_steps * M <= T:
        raise InfeasibleError(f"N*M = {n_steps * M} <= T = {T}: error rate would be >= 1")
    return T / (n_steps * M)


def subtask_accuracy(ops_per_step: float, sigma: float) -> float:
    """Chance of writing a ``t``-operator sub-question (2t+1 tokens) correctly."""
    if not 0.0 <= sigma < 1.0:
        raise DomainError(f"sigma must lie in [0, 1), got {sigma}")
    return (1.0 - sigma) ** (2 * ops_per_step + 1)


def _log_shape(setting: TheorySetting, n_steps: np.ndarray) -> np.ndarray:
    T, _, M = setting.as_tuple()
    n = np.asarray(n_steps, dtype=float)
    feasible = n * M > T
    safe_n = np.where(feasible, n, 1.0)
    err = np.where(feasible, T / (safe_n * M), 0.0)
    logs = n * (math.log1p(-setting.sigma) + np.log1p(-err))
    return np.where(feasible, logs, -np.inf)


def final_accuracy(setting: TheorySetting, n_steps: float, include_alpha: bool = False) -> float:
    """Accuracy of an ``n_steps`` chain; 0 when ``N M <= T``.

    With ``include_alpha`` off the constant ``(1 - T/C)^(2T)`` is dropped.
    It does not depend on N, so the argmax is unchanged, and it underflows
    for large T.
    """
    log_a = float(_log_shape(setting, np.asarray(n_steps)))
    if include_alpha:
        log_a += setting.log_alpha
    return math.exp(log_a)


def accuracy_curve(setting: TheorySetting, n_steps: Iterable[int]) -> AccuracyCurve:
    n = np.asarray(list(n_steps), dtype=np.int64)
    if n.size and np.any(np.diff(n) <= 0):
        raise ValueError("n_steps must be strictly increasing")
    log_shape = _log_shape(setting, n)
    return AccuracyCurve(
        setting=setting,
        n_steps=n,
        accuracy=np.exp(log_shape + setting.log_alpha),
        shape_accuracy=np.exp(log_shape),
        log_shape=log_shape,
    )


def lambert_argument(setting: TheorySetting) -> float:
    return -(1.0 - setting.sigma) / math.e


def lambert_z(setting: TheorySetting) -> float:
    """``Z = W-1(-(1 - T/C) / e)``, always below -1 for legal settings."""
    return lambert_wm1(lambert_argument(setting))


def optimal_length_closed_form(setting: TheorySetting) -> float:
    """Continuous maximiser ``N* = T Z / (M (Z + 1))``."""
    T, _, M = setting.as_tuple()
    z = lambert_z(setting)
    return T * z / (M * (z + 1.0))


def optimal_length_discrete(setting: TheorySetting, n_min: int, n_max: int) -> int:
    """Brute-force integer argmax of the accuracy over ``[n_min, n_max]``."""
    if n_min < 1 or n_max < n_min:
        raise ValueError(f"empty step range [{n_min}, {n_max}]")
    return accuracy_curve(setting, range(n_min, n_max + 1)).argmax()


def optimal_step_size(setting: TheorySetting) -> float:
    """Operators per step at the optimum, ``t* = M (1 + 1/Z)``."""
    return setting.capability * (1.0 + 1.0 / lambert_z(setting))


def linear_error_inverse(setting: TheorySetting) -> Callable[[float], float]:
    """Inverse in N of ``E = T / (N M)``: ``y -> T / (M y)``."""
    T, _, M = setting.as_tuple()
    return lambda y: T / (M * y)


def general_lower_bound(sigma: float, error_inverse: Callable[[float], float]) -> float:
    """Lower bound on the optimal length for a general decreasing error curve.

    ``error_inverse`` maps an error rate ``y`` in (0, 1) to the step count at
    which the per-step answer error equals ``y``.  The bound is defined only
    when ``e^2 (1 - sigma) > 1``.
    """
    scale = math.e ** 2 * (1.0 - sigma)
    if scale <= 1.0 + _BOUND_SLACK:
        raise BoundInapplicableError(
            f"e^2 (1 - sigma) = {scale:.6g} <= 1; no lower bound for sigma={sigma}"
        )
    return error_inverse(1.0 - 1.0 / scale)


def lower_bound_linear(setting: TheorySetting) -> float:
    return general_lower_bound(setting.sigma, linear_error_inverse(setting))


def test_point_value(setting: TheorySetting) -> float:
    """Stationarity function of log-accuracy evaluated at the test point.

    ``F(x) = ln(1 - T/(Mx)) + T/(Mx (1 - T/(Mx))) + ln(1 - T/C)`` at
    ``x0 = (sqrt(T (C - T)) + T) / M``.
    """
    T, C, M = setting.as_tuple()
    if setting.sigma >= MAX_SIGMA:
        raise DomainError("test point requires T/C < 0.9 strictly")
    x0 = (math.sqrt(T * (C - T)) + T) / M
    ratio = T / (M * x0)
    return math.log1p(-ratio) + ratio / (1.0 - ratio) + math.log1p(-setting.sigma)


def test_point_negative(setting: TheorySetting) -> bool:
    return test_point_value(setting) < 0.0


# keep pytest from collecting the two helpers above as tests
test_point_value.__test__ = False
test_point_negative.__test__ = False


def beta_one_minus_moment_exact(a: float, b: float, n: int) -> float:
    """``E[(1 - X)^n]`` for ``X ~ Beta(a, b)``: prod_{i<n} (b+i)/(a+b+i)."""
    out = 1.0
    for i in range(n):
        out *= (b + i) / (a + b + i)
    return out


def beta_moment_upper_bound(a: float, b: float, n: int) -> float:
    return (1.0 - a / (a + b + n - 1)) ** n


def stochastic_accuracy_upper_bound(setting: TheorySetting, n_steps: int) -> float:
    """Upper bound on expected accuracy when per-step errors are Beta-distributed."""
    T, C, M = setting.as_tuple()
    StochasticErrorParams.from_setting(setting, n_steps)
    n = n_steps
    return ((1.0 - T / (C + 2 * n - 1)) * (1.0 - T / (n * M + 2 * n - 1))) ** n


def _log_one_minus_beta(rng: np.random.Generator, a: float, b: float, size) -> np.ndarray:
    # X = Ga / (Ga + Gb), so log(1 - X) = log Gb - log(Ga + Gb)
    ga = rng.standard_gamma(a, size=size)
    gb = rng.standard_gamma(b, size=size)
    return np.log(gb) - np.log(ga + gb)


def stochastic_accuracy_mc(
    setting: TheorySetting,
    n_steps: int,
    samples: int,
    seed: int,
    chunk: int = 20_000,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``prod (1 - e_i)(1 - sigma_i)``.

    ``sigma_i ~ Beta(T, C - T)`` and ``e_i ~ Beta(T, N M - T)``, all drawn
    independently from a PCG64 generator seeded with ``seed``.
    """
    params = StochasticErrorParams.from_setting(setting, n_steps)
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    values = np.empty(samples)
    for start in range(0, samples, chunk):
        size = (min(chunk, samples - start), n_steps)
        logs = _log_one_minus_beta(rng, params.alpha1, params.beta1, size).sum(axis=1)
        logs += _log_one_minus_beta(rng, params.alpha2, params.beta2, size).sum(axis=1)
        values[start:start + size[0]] = np.exp(logs)
    mean = float(values.mean())
    std_error = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return mean, std_error


@dataclass
class SweepResult:
    """One setting's curve with its closed-form summary columns."""

    curve: AccuracyCurve
    argmax: int
    n_star: float
    t_star: float
    n_lb: float  # nan when the bound is inapplicable

    @property
    def setting(self) -> TheorySetting:
        return self.curve.setting


SWEEP_COLUMNS = (
    "T", "C", "M", "N", "accuracy", "shape_accuracy",
    "is_argmax", "n_star_closed", "t_star", "n_lb",
)


def summarize(setting: TheorySetting, n_steps: Sequence[int]) -> SweepResult:
    curve = accuracy_curve(setting, n_steps)
    try:
        n_lb = lower_bound_linear(setting)
    except BoundInapplicableError:
        n_lb = math.nan
    return SweepResult(
        curve=curve,
        argmax=curve.argmax(),
        n_star=optimal_length_closed_form(setting),
        t_star=optimal_step_size(setting),
        n_lb=n_lb,
    )


def accuracy_sweep(settings: Sequence[TheorySetting], n_steps: Sequence[int]) -> list[SweepResult]:
    if not settings or not len(n_steps):
        raise ValueError("sweep needs at least one setting and one step count")
    n_steps = list(n_steps)
    return [summarize(s, n_steps) for s in settings]


def sweep_rows(results: Iterable[SweepResult]):
    """Flatten sweep results into long-format rows keyed by SWEEP_COLUMNS."""
    for res in results:
        T, C, M = res.setting.as_tuple()
        for n, acc, shape in res.curve.points():
            yield {
                "T": T, "C": C, "M": M, "N": n,
                "accuracy": acc, "shape_accuracy": shape,
                "is_argmax": int(n == res.argmax),
                "n_star_closed": res.n_star, "t_star": res.t_star, "n_lb": res.n_lb,
            }


@dataclass
class EnvelopePoint:
    """Best step size for one setting when ``t`` ranges over integers."""

    setting: TheorySetting
    best_step_size: int
    n_steps: int
    accuracy: float
    shape_accuracy: float
    t_star: float


ENVELOPE_COLUMNS = ("T", "C", "M", "best_t", "N", "accuracy", "shape_accuracy", "t_star")


def step_size_envelope(settings: Sequence[TheorySetting], step_sizes: Sequence[int]) -> list[EnvelopePoint]:
    """For each setting pick the integer step size ``t`` maximising A(ceil(T/t)).

    Ties go to the smaller ``t``.
    """
    out = []
    for setting in settings:
        T = setting.difficulty
        ts = [t for t in step_sizes if 1 <= t <= T] or [1]
        ns = [math.ceil(T / t) for t in ts]
        i = int(np.argmax(_log_shape(setting, np.array(ns))))
        out.append(EnvelopePoint(
            setting=setting,
            best_step_size=ts[i],
            n_steps=ns[i],
            accuracy=final_accuracy(setting, ns[i], include_alpha=True),
            shape_accuracy=final_accuracy(setting, ns[i]),
            t_star=optimal_step_size(setting),
        ))
    return out


def envelope_rows(points: Iterable[EnvelopePoint]):
    for p in points:
        T, C, M = p.setting.as_tuple()
        yield {
            "T": T, "C": C, "M": M, "best_t": p.best_step_size, "N": p.n_steps,
            "accuracy": p.accuracy, "shape_accuracy": p.shape_accuracy, "t_star": p.t_star,
        }


def is_unimodal(values: Sequence[float], slack: float = 1e-12) -> bool:
    """True if the sequence never rises again after it has fallen."""
    falling = False
    for prev, cur in zip(values, values[1:]):
        if cur > prev + slack:
            if falling:
                return False
        elif cur < prev - slack:
            falling = True
    return True


def feasible_range(setting: TheorySetting, n_max: int | None = None) -> range:
    """Step counts with ``N M > T`` up to ``n_max`` (default ``8 max(T, 10)``)."""
    T, _, M = setting.as_tuple()
    n_min = math.floor(T / M) + 1
    if n_max is None:
        n_max = 8 * math.ceil(max(T, 10))
    return range(n_min, n_max + 1)
