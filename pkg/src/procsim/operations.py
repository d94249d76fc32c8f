"""Daily decision-outcome mechanism: order/defer, supplier selection, outcomes.

Each decision point walks the unresolved queue in arrival order. The
order-or-defer flag is drawn first (from the environment's propensity model);
only ordered items invoke the supplier-selection policy and produce an
outcome. Outcomes append with the current day's stamp and become visible to
features and learners the next day.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    DecisionRecord,
    HistoryLedger,
    OutcomeRecord,
    RequestRef,
    UnresolvedQueue,
)
from .signals import FeatureEnvironment, FeatureSpec, HarmonicSignal, linear_predictor
from .stochastic import cholesky_psd, expit

__all__ = [
    "OrderPropensityModel",
    "SupplierUtilityModel",
    "OutcomePairParams",
    "OutcomeModel",
    "LeadTimeRule",
    "OperationsModels",
    "ChoiceContext",
    "PlacedOrder",
    "DayResult",
    "order_propensity",
    "process_day",
]


@dataclass
class OrderPropensityModel:
    """Probability that an unresolved line item is ordered today.

    ``uniform`` mode draws a fresh propensity per item per day; ``logistic``
    mode maps decision features through the logit link.
    """

    mode: str = "uniform"
    low: float = 0.1
    high: float = 0.9
    features: FeatureSpec = field(default_factory=lambda: FeatureSpec("order"))

    def __post_init__(self) -> None:
        if self.mode not in ("uniform", "logistic"):
            raise ValueError(f"unknown order-propensity mode {self.mode!r}")
        if self.mode == "uniform" and not (0.0 <= self.low < self.high <= 1.0):
            raise ValueError(
                f"uniform bounds must satisfy 0 <= low < high <= 1, got "
                f"[{self.low}, {self.high}]"
            )


def order_propensity(
    model: OrderPropensityModel,
    env: FeatureEnvironment,
    ctx: dict,
    stream: np.random.Generator,
) -> float:
    if model.mode == "uniform":
        return model.low + (model.high - model.low) * stream.random()
    return expit(linear_predictor(model.features, env, ctx))


@dataclass
class SupplierUtilityModel:
    """Linear utility over supplier-specific decision features."""

    features: FeatureSpec = field(default_factory=lambda: FeatureSpec("supplier"))

    def utilities(
        self,
        env: FeatureEnvironment,
        ctx: dict,
        arms: Sequence[int],
    ) -> dict[int, float]:
        out = {}
        for arm in arms:
            arm_ctx = dict(ctx)
            arm_ctx["supplier"] = arm
            out[arm] = linear_predictor(self.features, env, arm_ctx)
        return out


@dataclass
class OutcomePairParams:
    """Outcome-law parameters for one (product, supplier) pair."""

    intercept: np.ndarray  # drift term of the lag recursion, 3-vector
    harmonic_loading: np.ndarray  # 3-vector
    ar1: np.ndarray  # 3x3
    ar2: np.ndarray  # 3x3
    ma1: np.ndarray | None
    ma2: np.ndarray | None
    alloc_short: np.ndarray  # 3-vector on trailing short-window supplier volume
    alloc_long: np.ndarray  # 3-vector on trailing long-window supplier volume
    noise_cov: np.ndarray  # 3x3 SPSD
    noise_chol: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.noise_chol = (
            np.zeros((3, 3)) if not self.noise_cov.any() else cholesky_psd(self.noise_cov)
        )

    def stationary_mean(self, drift_extra: np.ndarray | None = None) -> np.ndarray:
        """Closed-form lag-recursion fixed point for a constant drift."""
        drift = self.intercept if drift_extra is None else self.intercept + drift_extra
        return np.linalg.solve(np.eye(3) - self.ar1 - self.ar2, drift)


class OutcomeModel:
    """Per-pair outcome distribution: lag-2 recursion, allocation terms, seasonality.

    The conditional mean at day l uses the pair's last two recorded outcomes
    (defaulting to the pair's intercept when history is short), trailing
    supplier order volumes over the short/long windows, and a shared annual
    harmonic whose loading can differ per pair.
    """

    def __init__(
        self,
        pairs: dict[tuple[int, int], OutcomePairParams],
        harmonic: HarmonicSignal,
        short_window: float = 90.0,
        long_window: float = 365.0,
    ) -> None:
        self.pairs = pairs
        self.harmonic = harmonic
        self.short_window = short_window
        self.long_window = long_window

    def params(self, product_id: int, supplier_id: int) -> OutcomePairParams:
        return self.pairs[(product_id, supplier_id)]

    def mean(
        self,
        product_id: int,
        supplier_id: int,
        day: int,
        ledger: HistoryLedger,
    ) -> np.ndarray:
        p = self.params(product_id, supplier_id)
        lags = ledger.pair_outcome_lags(product_id, supplier_id, day, k=2)
        lag1 = lags[0] if len(lags) >= 1 else p.intercept
        lag2 = lags[1] if len(lags) >= 2 else p.intercept
        mean = (
            p.intercept
            + p.ar1 @ lag1
            + p.ar2 @ lag2
            + p.alloc_short
            * ledger.supplier_volume_past(supplier_id, day, self.short_window)
            + p.alloc_long
            * ledger.supplier_volume_past(supplier_id, day, self.long_window)
            + p.harmonic_loading * self.harmonic.at(float(day))
        )
        if p.ma1 is not None or p.ma2 is not None:
            noise_lags = ledger.pair_noise_lags(product_id, supplier_id, day, k=2)
            if p.ma1 is not None and len(noise_lags) >= 1:
                mean = mean + p.ma1 @ noise_lags[0]
            if p.ma2 is not None and len(noise_lags) >= 2:
                mean = mean + p.ma2 @ noise_lags[1]
        return mean

    def sample(
        self,
        product_id: int,
        supplier_id: int,
        day: int,
        ledger: HistoryLedger,
        stream: np.random.Generator,
    ) -> tuple[OutcomeRecord, np.ndarray]:
        p = self.params(product_id, supplier_id)
        noise = p.noise_chol @ stream.standard_normal(3)
        y = self.mean(product_id, supplier_id, day, ledger) + noise
        return OutcomeRecord.from_array(y), noise


@dataclass(frozen=True)
class LeadTimeRule:
    """Maps the lead-time cost component to calendar delivery days."""

    usd_per_day: float = 10.0
    floor_days: int = 1

    def __post_init__(self) -> None:
        if self.usd_per_day <= 0:
            raise ValueError("usd_per_day must be positive")

    def days(self, lead_cost: float) -> int:
        return max(self.floor_days, int(round(lead_cost / self.usd_per_day)))


@dataclass(frozen=True)
class ChoiceContext:
    """What a supplier-selection policy sees for one line item."""

    product_id: int
    features: tuple[float, ...]  # (1, seasonal) in the default wiring
    day: int
    site_id: int


@dataclass(frozen=True)
class PlacedOrder:
    ref: RequestRef
    supplier_id: int
    outcome: OutcomeRecord
    delivery_day: int


@dataclass
class DayResult:
    day: int
    decisions: list[DecisionRecord]
    orders: list[PlacedOrder]
    carryover: list[RequestRef]
    queue_size_before: int

    @property
    def n_ordered(self) -> int:
        return len(self.orders)


@dataclass
class OperationsModels:
    """Bundle of the environment-side models consumed by a decision point."""

    order: OrderPropensityModel
    outcome: OutcomeModel
    lead_rule: LeadTimeRule
    suppliers: tuple[int, ...]
    weights: np.ndarray
    context_signal: HarmonicSignal
    realized_regret: bool = False


def _weighted_means(
    outcome: OutcomeModel,
    product_id: int,
    day: int,
    ledger: HistoryLedger,
    arms: Sequence[int],
    weights: np.ndarray,
) -> dict[int, float]:
    return {
        arm: float(weights @ outcome.mean(product_id, arm, day, ledger)) for arm in arms
    }


def process_day(
    day: int,
    queue: UnresolvedQueue,
    ledger: HistoryLedger,
    env: FeatureEnvironment,
    policy,
    models: OperationsModels,
    order_stream: np.random.Generator,
    noise_stream: np.random.Generator,
    regret_account=None,
) -> DayResult:
    """Process every unresolved item once, in chronological order.

    Ordered items are removed from the queue, assigned a supplier by the
    policy, and get a sampled outcome plus a scheduled delivery day; deferred
    items stay queued for the next day in their original positions.
    """
    pending = queue.in_order()
    # arrivals stamped exactly on the day boundary belong to the next batch
    refs = [r for r in pending if r.event_time < float(day)]
    deferred_boundary = [r for r in pending if r.event_time >= float(day)]
    decisions: list[DecisionRecord] = []
    orders: list[PlacedOrder] = []
    carryover: list[RequestRef] = []
    arms = models.suppliers
    seasonal = models.context_signal.at(float(day))

    for ref in refs:
        ctx = {
            "day": day,
            "ref": ref,
            "site": ref.site_id,
            "product": ref.product_id,
            "open_line_items": len(refs),
            "open_requisitions": len({(r.site_id, r.event_time) for r in refs}),
        }
        p_order = order_propensity(models.order, env, ctx, order_stream)
        if order_stream.random() >= p_order:
            decision = DecisionRecord(0, None)
            decisions.append(decision)
            ledger.append_decision(day, ref, decision)
            carryover.append(ref)
            continue

        choice_ctx = ChoiceContext(
            product_id=ref.product_id,
            features=(1.0, seasonal),
            day=day,
            site_id=ref.site_id,
        )
        supplier = policy.choose(choice_ctx, arms)
        if supplier not in arms:
            raise ValueError(
                f"policy {getattr(policy, 'name', policy)!r} returned supplier "
                f"{supplier!r} outside {arms}"
            )

        if regret_account is not None:
            means = _weighted_means(
                models.outcome, ref.product_id, day, ledger, arms, models.weights
            )
            oracle_value = min(means.values())

        outcome, noise = models.outcome.sample(
            ref.product_id, supplier, day, ledger, noise_stream
        )

        if regret_account is not None:
            if models.realized_regret:
                realized = float(models.weights @ outcome.to_array())
                regret_account.record(day, realized - oracle_value)
            else:
                regret_account.record(day, means[supplier] - oracle_value)

        decision = DecisionRecord(1, supplier)
        decisions.append(decision)
        ledger.append_decision(day, ref, decision)
        ledger.append_outcome(
            day, ref.site_id, ref.product_id, supplier, ref.quantity, outcome, noise
        )
        policy.observe(choice_ctx, supplier, outcome.to_array())
        orders.append(
            PlacedOrder(
                ref=ref,
                supplier_id=supplier,
                outcome=outcome,
                delivery_day=day + models.lead_rule.days(outcome.lead_cost),
            )
        )

    queue.replace(carryover + deferred_boundary)
    return DayResult(
        day=day,
        decisions=decisions,
        orders=orders,
        carryover=carryover,
        queue_size_before=len(refs),
    )
