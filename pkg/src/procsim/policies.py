"""Supplier-selection policies, the oracle, and regret accounting.

All policies share one contract: ``choose`` must not mutate policy state
(stream consumption aside), and learning happens only through ``observe`` /
``end_of_day``. The Thompson-sampling bandit buffers observations within a
day and applies its conjugate updates at the day boundary, so outcomes never
influence same-day choices.

Sign convention: all three outcome components are costs, so "maximize
utility" means "minimize the weighted cost" and every argmax below is an
argmin over weighted predicted cost with smallest-id tie breaking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import HistoryLedger
from .operations import ChoiceContext, OutcomeModel

__all__ = [
    "Policy",
    "FixedPolicy",
    "RandomPolicy",
    "StaticUtilityPolicy",
    "ThompsonBandit",
    "OraclePolicy",
    "RegretAccount",
    "bayes_update",
    "oracle_choice",
    "argmin_arm",
]


def argmin_arm(values: dict[int, float]) -> int:
    """Arm attaining the minimum value; exact ties go to the smallest id."""
    best_arm = None
    best = math.inf
    for arm in sorted(values):
        v = values[arm]
        if v < best:
            best = v
            best_arm = arm
    return best_arm


class Policy:
    """Base supplier-selection policy."""

    name = "policy"

    def choose(self, ctx: ChoiceContext, arms: Sequence[int]) -> int:
        raise NotImplementedError

    def observe(self, ctx: ChoiceContext, arm: int, outcome: np.ndarray) -> None:
        pass

    def end_of_day(self) -> None:
        pass


class FixedPolicy(Policy):
    """Always the configured supplier."""

    def __init__(self, supplier_id: int) -> None:
        self.supplier_id = supplier_id
        self.name = f"fixed-{supplier_id}"

    def choose(self, ctx: ChoiceContext, arms: Sequence[int]) -> int:
        if self.supplier_id not in arms:
            raise ValueError(
                f"fixed supplier {self.supplier_id} not among arms {tuple(arms)}"
            )
        return self.supplier_id


class RandomPolicy(Policy):
    """Uniform choice over the available arms."""

    name = "random"

    def __init__(self, stream: np.random.Generator) -> None:
        self.stream = stream

    def choose(self, ctx: ChoiceContext, arms: Sequence[int]) -> int:
        return arms[int(self.stream.integers(len(arms)))]


class StaticUtilityPolicy(Policy):
    """Utility maximizer with a parameter vector fixed for the whole run.

    Per (product, arm, outcome-dimension) it holds two coefficients, an
    intercept and a seasonal loading, and picks the arm minimizing the
    weighted predicted cost. It never learns: observe/end_of_day leave the
    state untouched.
    """

    name = "static-utility"

    def __init__(
        self,
        theta: dict[tuple[int, int, int], tuple[float, float]],
        weights: np.ndarray,
    ) -> None:
        self.theta = theta
        self.weights = np.asarray(weights, dtype=float)

    @classmethod
    def from_outcome_model(
        cls,
        model: OutcomeModel,
        products: Sequence[int],
        suppliers: Sequence[int],
        weights: np.ndarray,
    ) -> "StaticUtilityPolicy":
        """Informed static parameters: the best intercept+seasonal summary of
        the true outcome law.

        Intercepts are the lag-recursion fixed points of each pair's drift;
        seasonal loadings are the recursion's steady-state gain applied to the
        pair's harmonic loading. Dynamics the summary cannot express (lag
        transients, allocation feedback) stay invisible to this policy.
        """
        theta = {}
        for product in products:
            for arm in suppliers:
                p = model.params(product, arm)
                gain = np.linalg.inv(np.eye(3) - p.ar1 - p.ar2)
                base = gain @ p.intercept
                seasonal = gain @ p.harmonic_loading
                for dim in range(3):
                    theta[(product, arm, dim)] = (float(base[dim]), float(seasonal[dim]))
        return cls(theta, weights)

    @classmethod
    def from_prior_draw(
        cls,
        products: Sequence[int],
        suppliers: Sequence[int],
        weights: np.ndarray,
        prior_variance: float,
        stream: np.random.Generator,
    ) -> "StaticUtilityPolicy":
        """Uninformed static parameters drawn once from the learner's prior."""
        scale = math.sqrt(prior_variance)
        theta = {}
        for product in sorted(products):
            for arm in sorted(suppliers):
                for dim in range(3):
                    draw = scale * stream.standard_normal(2)
                    theta[(product, arm, dim)] = (float(draw[0]), float(draw[1]))
        return cls(theta, weights)

    def predicted_cost(self, ctx: ChoiceContext, arm: int) -> float:
        x0, x1 = ctx.features
        total = 0.0
        for dim in range(3):
            b0, b1 = self.theta[(ctx.product_id, arm, dim)]
            total += self.weights[dim] * (b0 * x0 + b1 * x1)
        return total

    def choose(self, ctx: ChoiceContext, arms: Sequence[int]) -> int:
        return argmin_arm({arm: self.predicted_cost(ctx, arm) for arm in arms})


def bayes_update(
    mean0: np.ndarray,
    cov0: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    noise_variance: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Conjugate normal-normal update with known observation noise.

    cov_n = (cov0^-1 + X'X / s^2)^-1 ; mean_n = cov_n (cov0^-1 mean0 + X'y / s^2).
    """
    mean0 = np.asarray(mean0, dtype=float)
    cov0 = np.asarray(cov0, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    if X.shape[0] == 0:
        return mean0.copy(), cov0.copy()
    prec0 = np.linalg.inv(cov0)
    prec_n = prec0 + (X.T @ X) / noise_variance
    cov_n = np.linalg.inv(prec_n)
    cov_n = 0.5 * (cov_n + cov_n.T)
    mean_n = cov_n @ (prec0 @ mean0 + (X.T @ y) / noise_variance)
    return mean_n, cov_n


@dataclass
class _ArmModel:
    """One scalar-response Bayesian regression over (intercept, seasonal)."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self._refresh()

    def _refresh(self) -> None:
        self.chol = np.linalg.cholesky(self.cov)

    def update(self, X: np.ndarray, y: np.ndarray, noise_variance: float) -> None:
        self.mean, self.cov = bayes_update(self.mean, self.cov, X, y, noise_variance)
        self._refresh()


class ThompsonBandit(Policy):
    """Contextual bandit: independent conjugate regressions per
    (product, arm, outcome-dimension), explored by Thompson sampling.

    Each of the scalar models regresses one outcome component on
    (1, seasonal). A choice draws one parameter sample per relevant model and
    picks the arm minimizing the weighted predicted cost under that sample.
    Observations buffer within the day and post at ``end_of_day``.
    """

    name = "bandit"

    def __init__(
        self,
        products: Sequence[int],
        suppliers: Sequence[int],
        weights: np.ndarray,
        stream: np.random.Generator,
        prior_variance: float = 70.0,
        noise_variances: Sequence[float] = (25.0, 4.0, 4.0),
    ) -> None:
        self.products = tuple(sorted(products))
        self.suppliers = tuple(sorted(suppliers))
        self.weights = np.asarray(weights, dtype=float)
        self.stream = stream
        self.noise_variances = tuple(float(v) for v in noise_variances)
        self.models: dict[tuple[int, int, int], _ArmModel] = {}
        for product in self.products:
            for arm in self.suppliers:
                for dim in range(3):
                    self.models[(product, arm, dim)] = _ArmModel(
                        mean=np.zeros(2), cov=prior_variance * np.eye(2)
                    )
        self._buffer: list[tuple[int, int, tuple[float, float], np.ndarray]] = []

    def sampled_cost(self, ctx: ChoiceContext, arm: int) -> float:
        x = np.asarray(ctx.features, dtype=float)
        total = 0.0
        for dim in range(3):
            m = self.models[(ctx.product_id, arm, dim)]
            draw = m.mean + m.chol @ self.stream.standard_normal(2)
            total += self.weights[dim] * float(draw @ x)
        return total

    def choose(self, ctx: ChoiceContext, arms: Sequence[int]) -> int:
        return argmin_arm({arm: self.sampled_cost(ctx, arm) for arm in sorted(arms)})

    def observe(self, ctx: ChoiceContext, arm: int, outcome: np.ndarray) -> None:
        self._buffer.append((ctx.product_id, arm, tuple(ctx.features), np.asarray(outcome)))

    def end_of_day(self) -> None:
        if not self._buffer:
            return
        grouped: dict[tuple[int, int], list[tuple[tuple[float, float], np.ndarray]]] = {}
        for product, arm, x, y in self._buffer:
            grouped.setdefault((product, arm), []).append((x, y))
        self._buffer.clear()
        for (product, arm), rows in grouped.items():
            X = np.array([x for x, _ in rows])
            Y = np.array([y for _, y in rows])
            for dim in range(3):
                self.models[(product, arm, dim)].update(
                    X, Y[:, dim], self.noise_variances[dim]
                )


def oracle_choice(
    model: OutcomeModel,
    product_id: int,
    day: int,
    ledger: HistoryLedger,
    arms: Sequence[int],
    weights: np.ndarray,
) -> tuple[int, float]:
    """Arm minimizing the true expected weighted cost, and that cost."""
    values = {
        arm: float(weights @ model.mean(product_id, arm, day, ledger)) for arm in arms
    }
    arm = argmin_arm(values)
    return arm, values[arm]


class OraclePolicy(Policy):
    """Reference policy with read access to the true outcome law; zero regret."""

    name = "oracle"

    def __init__(self, model: OutcomeModel, ledger: HistoryLedger, weights: np.ndarray) -> None:
        self.model = model
        self.ledger = ledger
        self.weights = np.asarray(weights, dtype=float)

    def choose(self, ctx: ChoiceContext, arms: Sequence[int]) -> int:
        arm, _ = oracle_choice(
            self.model, ctx.product_id, ctx.day, self.ledger, arms, self.weights
        )
        return arm


class RegretAccount:
    """Per-item regret stream with daily cumulative trajectory.

    Under the default expected-regret definition every recorded value is
    non-negative by construction; the realized-outcome variant (noise minus
    oracle mean) may go negative and skips the guard.
    """

    def __init__(self, allow_negative: bool = False) -> None:
        self.allow_negative = allow_negative
        self.items: list[tuple[int, float]] = []
        self.total = 0.0

    def record(self, day: int, regret: float) -> None:
        if not self.allow_negative and regret < 0:
            raise ValueError(f"negative regret {regret} on day {day}")
        self.items.append((day, regret))
        self.total += regret

    def daily_cumulative(self, horizon: int) -> np.ndarray:
        """Cumulative regret at the end of each day 1..horizon."""
        per_day = np.zeros(horizon)
        for day, regret in self.items:
            if 1 <= day <= horizon:
                per_day[day - 1] += regret
        return np.cumsum(per_day)
