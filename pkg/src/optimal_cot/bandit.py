"""Stateless bandit over candidate chain lengths with a softmax policy.

Each arm is a chain length ``N_i`` that earns reward 1 with probability
``A(N_i)``.  Exact gradient ascent on ``J = sum_i pi_i A_i`` follows the
discrete replicator update ``dJ/dtheta_i = pi_i (A_i - J)`` and drives the
policy onto the best arm; ``V = -ln pi_best`` certifies the descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .theory import TheorySetting, final_accuracy

# arms within this of the best accuracy count as maximisers
TIE_TOL = 1e-12
TRAJECTORY_COLUMNS = ("step", "arm_index", "arm_length", "probability", "expected_reward", "lyapunov")


@dataclass(frozen=True, eq=False)
class ArmSet:
    lengths: tuple[int, ...]
    accuracies: np.ndarray

    def __init__(self, lengths: Sequence[int], accuracies: Sequence[float], allow_boundary: bool = False):
        lengths = tuple(int(n) for n in lengths)
        acc = np.asarray(accuracies, dtype=float)
        if len(lengths) != acc.size or acc.ndim != 1:
            raise ValueError(f"{len(lengths)} lengths but {acc.size} accuracies")
        if not lengths:
            raise ValueError("need at least one arm")
        if len(set(lengths)) != len(lengths):
            raise ValueError(f"arm lengths must be distinct: {lengths}")
        # the convergence argument needs 0 < A < 1; degenerate 0/1 arms are opt-in
        if allow_boundary:
            if np.any(acc < 0.0) or np.any(acc > 1.0):
                raise ValueError("arm accuracies must lie in [0, 1]")
        elif np.any(acc <= 0.0) or np.any(acc >= 1.0):
            raise ValueError("arm accuracies must lie strictly inside (0, 1)")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "accuracies", acc)

    @property
    def k(self) -> int:
        return len(self.lengths)

    def best_arms(self) -> np.ndarray:
        """Indices of all arms within TIE_TOL of the best accuracy."""
        return np.flatnonzero(self.accuracies >= self.accuracies.max() - TIE_TOL)

    @classmethod
    def from_theory(cls, setting: TheorySetting, lengths: Sequence[int], peak: float | None = 0.9) -> "ArmSet":
        """Arms whose success rates follow the accuracy model's N-dependence.

        The raw shape accuracies are tiny (order 1e-4 for T=24), which would
        make learning glacial, so by default they are rescaled so the best
        arm succeeds with probability ``peak``.  Ratios and the argmax are
        preserved.  ``peak=None`` keeps the raw values.
        """
        acc = np.array([final_accuracy(setting, n) for n in lengths])
        if peak is not None:
            if not 0.0 < peak < 1.0:
                raise ValueError("peak must lie in (0, 1)")
            acc = peak * acc / acc.max()
        return cls(lengths, acc)


@dataclass
class Policy:
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).copy()
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("policy logits must be finite")

    @classmethod
    def uniform(cls, k: int) -> "Policy":
        return cls(np.zeros(k))


def _softmax(theta: np.ndarray) -> np.ndarray:
    z = np.exp(theta - theta.max())
    return z / z.sum()


def _log_softmax(theta: np.ndarray) -> np.ndarray:
    shifted = theta - theta.max()
    return shifted - math.log(np.exp(shifted).sum())


def softmax_policy(policy: Policy) -> np.ndarray:
    return _softmax(policy.theta)


def _check_dims(arms: ArmSet, policy: Policy):
    if policy.theta.shape != (arms.k,):
        raise ValueError(f"policy has {policy.theta.size} logits for {arms.k} arms")


def expected_reward(arms: ArmSet, policy: Policy) -> float:
    _check_dims(arms, policy)
    return float(softmax_policy(policy) @ arms.accuracies)


def exact_gradient(arms: ArmSet, policy: Policy) -> np.ndarray:
    _check_dims(arms, policy)
    pi = softmax_policy(policy)
    return pi * (arms.accuracies - pi @ arms.accuracies)


def _lyapunov(theta: np.ndarray, best: np.ndarray) -> float:
    # -ln of the probability mass on the optimal face
    log_pi = _log_softmax(theta)
    top = log_pi[best]
    m = top.max()
    return -(m + math.log(np.exp(top - m).sum()))


@dataclass
class Trajectory:
    """Recorded policy states of one bandit run.

    ``probabilities[r]`` is the policy after ``steps[r]`` updates.
    """

    arms: ArmSet
    steps: np.ndarray
    probabilities: np.ndarray
    expected_reward: np.ndarray
    lyapunov: np.ndarray
    final_theta: np.ndarray
    converged: bool
    steps_taken: int

    @property
    def final_probabilities(self) -> np.ndarray:
        return _softmax(self.final_theta)

    @property
    def winner(self) -> int:
        """Index of the arm with the most terminal mass."""
        return int(np.argmax(self.final_probabilities))

    def near_maximal_arms(self) -> list[int]:
        return [int(i) for i in self.arms.best_arms()]

    def records(self) -> Iterator[tuple[int, np.ndarray, float, float]]:
        for r in range(len(self.steps)):
            yield int(self.steps[r]), self.probabilities[r], float(self.expected_reward[r]), float(self.lyapunov[r])

    def rows(self):
        """Long-format rows, one per arm per recorded step."""
        for step, probs, reward, lyap in self.records():
            for i, p in enumerate(probs):
                yield {
                    "step": step,
                    "arm_index": i,
                    "arm_length": self.arms.lengths[i],
                    "probability": float(p),
                    "expected_reward": reward,
                    "lyapunov": lyap,
                }


class _Recorder:
    def __init__(self, arms: ArmSet, stride: int):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.arms = arms
        self.stride = stride
        self.best = arms.best_arms()
        self.steps, self.probs, self.rewards, self.lyap = [], [], [], []

    def record(self, step: int, theta: np.ndarray, force: bool = False):
        if step % self.stride and not force:
            return
        if self.steps and self.steps[-1] == step:
            return
        pi = _softmax(theta)
        self.steps.append(step)
        self.probs.append(pi)
        self.rewards.append(float(pi @ self.arms.accuracies))
        self.lyap.append(_lyapunov(theta, self.best))

    def finish(self, theta: np.ndarray, converged: bool, steps_taken: int) -> Trajectory:
        self.record(steps_taken, theta, force=True)
        return Trajectory(
            arms=self.arms,
            steps=np.array(self.steps, dtype=np.int64),
            probabilities=np.array(self.probs),
            expected_reward=np.array(self.rewards),
            lyapunov=np.array(self.lyap),
            final_theta=theta.copy(),
            converged=converged,
            steps_taken=steps_taken,
        )


def _face_mass(theta: np.ndarray, best: np.ndarray) -> float:
    return float(_softmax(theta)[best].sum())


def gradient_ascent(
    arms: ArmSet,
    policy0: Policy,
    eta: float,
    max_steps: int = 50_000,
    tol: float = 1e-2,
    stride: int = 1,
) -> Trajectory:
    """Exact policy-gradient ascent until the optimal arms hold ``1 - tol`` mass.

    Requires ``eta < 1 / max(A)``.  Running out of steps is reported through
    ``Trajectory.converged`` rather than raised.
    """
    _check_dims(arms, policy0)
    if not 0.0 < eta < 1.0 / arms.accuracies.max():
        raise ValueError(f"step size must satisfy 0 < eta < 1/max(A) = {1.0 / arms.accuracies.max():.4g}")
    rec = _Recorder(arms, stride)
    best = rec.best
    theta = policy0.theta.copy()
    acc = arms.accuracies
    step = 0
    rec.record(0, theta)
    converged = _face_mass(theta, best) >= 1.0 - tol
    while not converged and step < max_steps:
        pi = _softmax(theta)
        theta += eta * pi * (acc - pi @ acc)
        step += 1
        rec.record(step, theta)
        converged = _face_mass(theta, best) >= 1.0 - tol
    return rec.finish(theta, converged, step)


def reinforce_simulate(
    arms: ArmSet,
    policy0: Policy,
    eta: float,
    episodes: int,
    batch: int = 16,
    seed: int = 0,
    stride: int = 100,
    tol: float = 1e-2,
) -> Trajectory:
    """Baseline-free REINFORCE with Bernoulli rewards.

    Each episode samples ``batch`` arms from the current policy, draws a
    reward ``r ~ Bernoulli(A_a)`` for each, and applies the batch-mean
    estimate ``r (e_a - pi)`` scaled by ``eta``.  All episodes run; the
    ``converged`` flag reports whether the optimal arms ended with
    ``1 - tol`` mass.
    """
    _check_dims(arms, policy0)
    if eta <= 0 or episodes < 0 or batch < 1:
        raise ValueError("need eta > 0, episodes >= 0, batch >= 1")
    rng = np.random.default_rng(seed)
    rec = _Recorder(arms, stride)
    theta = policy0.theta.copy()
    acc = arms.accuracies
    k = arms.k
    rec.record(0, theta)
    for ep in range(1, episodes + 1):
        pi = _softmax(theta)
        cdf = np.cumsum(pi)
        picks = np.minimum(np.searchsorted(cdf, rng.random(batch) * cdf[-1], side="right"), k - 1)
        rewards = (rng.random(batch) < acc[picks]).astype(float)
        grad = -pi * rewards.sum()
        grad += np.bincount(picks, weights=rewards, minlength=k)
        theta += eta * grad / batch
        rec.record(ep, theta)
    converged = _face_mass(theta, rec.best) >= 1.0 - tol
    return rec.finish(theta, converged, episodes)
