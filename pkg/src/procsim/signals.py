"""Exogenous covariate signals and the feature registry behind every model.

Each model (request intensity, stop, product choice, quantity, order,
supplier, outcome) owns a :class:`FeatureSpec`: an ordered list of bindings
from registry feature names to coefficients. ``build_features`` evaluates the
bound features against the ledger and clock, producing the value vector
aligned with the coefficient order.

No-history defaults: "days since" features fall back to the horizon length,
last-delivery quality to 0, and rolling counts/volumes to 0. Outcome lag
defaults live with the outcome model (its intercept for AR lags, 0 for noise
lags).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .core import DeliveryMode, HistoryLedger, day_of

__all__ = [
    "HarmonicSignal",
    "SincShock",
    "FeatureBinding",
    "FeatureSpec",
    "FeatureEnvironment",
    "FeatureContextError",
    "harmonic_at",
    "sinc_at",
    "build_features",
    "linear_predictor",
    "FEATURES",
    "MODEL_FEATURES",
]


@dataclass(frozen=True)
class HarmonicSignal:
    """Sinusoidal seasonal trend: amplitude * sin(2*pi*t/period + phase)."""

    amplitude: float
    period: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")

    def at(self, t: float) -> float:
        return self.amplitude * math.sin(2.0 * math.pi * t / self.period + self.phase)


@dataclass(frozen=True)
class SincShock:
    """Localized shock: amplitude * sinc((t - center)/scale), normalized sinc."""

    center: float
    scale: float
    amplitude: float

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def at(self, t: float) -> float:
        return self.amplitude * float(np.sinc((t - self.center) / self.scale))


def harmonic_at(signal: HarmonicSignal, t: float) -> float:
    return signal.at(t)


def sinc_at(shock: SincShock, t: float) -> float:
    return shock.at(t)


class FeatureContextError(KeyError):
    """A feature was evaluated without a context key it requires."""


@dataclass(frozen=True)
class FeatureBinding:
    """One coefficient slot: a registry feature name plus fixed options."""

    feature: str
    coefficient: float
    options: tuple[tuple[str, object], ...] = ()

    @classmethod
    def make(cls, feature: str, coefficient: float, **options) -> "FeatureBinding":
        return cls(feature, float(coefficient), tuple(sorted(options.items())))


@dataclass(frozen=True)
class FeatureSpec:
    """Ordered feature bindings for one model; empty spec means no covariates."""

    name: str
    bindings: tuple[FeatureBinding, ...] = ()

    def coefficients(self) -> np.ndarray:
        return np.array([b.coefficient for b in self.bindings])


@dataclass
class FeatureEnvironment:
    """Read-only world every feature evaluation sees."""

    ledger: HistoryLedger
    horizon: float
    signals: Mapping[str, HarmonicSignal | SincShock] = field(default_factory=dict)
    site_baselines: Mapping[int, tuple[float, ...]] = field(default_factory=dict)
    product_baselines: Mapping[int, tuple[float, ...]] = field(default_factory=dict)
    supplier_baselines: Mapping[int, tuple[float, ...]] = field(default_factory=dict)

    def signal(self, name: str):
        try:
            return self.signals[name]
        except KeyError:
            raise FeatureContextError(f"unknown signal {name!r}") from None


def _ctx(ctx: Mapping, key: str):
    try:
        return ctx[key]
    except KeyError:
        raise FeatureContextError(f"feature requires context key {key!r}") from None


def _current_day(ctx: Mapping) -> int:
    if "day" in ctx:
        return int(ctx["day"])
    if "t" in ctx:
        return day_of(float(ctx["t"]))
    raise FeatureContextError("feature requires context key 'day' or 't'")


def _through_time(ctx: Mapping) -> float:
    # decision contexts see deliveries stamped through the day boundary
    return float(ctx["t"]) if "t" in ctx else float(_ctx(ctx, "day"))


def _signal_value(env: FeatureEnvironment, ctx: Mapping, signal: str = "") -> float:
    if not signal:
        raise FeatureContextError("signal features need a 'signal' option")
    t = float(ctx["t"]) if "t" in ctx else float(_ctx(ctx, "day"))
    return env.signal(signal).at(t)


def _baseline(
    env: FeatureEnvironment, ctx: Mapping, entity: str = "site", index: int = 0
) -> float:
    tables = {
        "site": env.site_baselines,
        "product": env.product_baselines,
        "supplier": env.supplier_baselines,
    }
    if entity not in tables:
        raise FeatureContextError(f"unknown baseline entity {entity!r}")
    vec = tables[entity].get(_ctx(ctx, entity), ())
    return float(vec[index]) if index < len(vec) else 0.0


def _site_days_since_delivery(env, ctx) -> float:
    hit = env.ledger.last_delivery(_ctx(ctx, "site"), through_time=_through_time(ctx))
    if hit is None:
        return float(env.horizon)
    return float(_current_day(ctx) - hit[0])


def _site_last_delivery_quality(env, ctx) -> float:
    hit = env.ledger.last_delivery(_ctx(ctx, "site"), through_time=_through_time(ctx))
    return 0.0 if hit is None else hit[1]


def _site_requisitions_past_year(env, ctx, window: float = 365.0) -> float:
    return float(
        env.ledger.requisition_count_past(_ctx(ctx, "site"), float(_ctx(ctx, "t")), window)
    )


def _req_item_count(env, ctx) -> float:
    return float(len(_ctx(ctx, "items")))


def _req_size_sq(env, ctx) -> float:
    # nonlinear transform of the running requisition size
    return float(len(_ctx(ctx, "items"))) ** 2


def _req_cost_estimate(env, ctx) -> float:
    return float(_ctx(ctx, "cost_estimate"))


def _req_cost_saturation(
    env, ctx, threshold: float = 20.0, saturation: float = 500.0
) -> float:
    """0 below the threshold, then sqrt growth clamped to 1 at the saturation cost."""
    cost = float(_ctx(ctx, "cost_estimate"))
    if cost <= threshold:
        return 0.0
    return min(1.0, math.sqrt((cost - threshold) / (saturation - threshold)))


def _product_requests_past_year(env, ctx, window: float = 365.0) -> float:
    return float(
        env.ledger.product_request_count_past(
            _ctx(ctx, "site"), _ctx(ctx, "product"), float(_ctx(ctx, "t")), window
        )
    )


def _product_qty_requested_past_year(env, ctx, window: float = 365.0) -> float:
    return env.ledger.product_quantity_requested_past(
        _ctx(ctx, "site"), _ctx(ctx, "product"), float(_ctx(ctx, "t")), window
    )


def _product_qty_delivered_past_year(env, ctx, window: float = 365.0) -> float:
    return env.ledger.quantity_delivered_past(
        _ctx(ctx, "site"), _ctx(ctx, "product"), _through_time(ctx), window
    )


def _product_days_since_request(env, ctx) -> float:
    t_last = env.ledger.last_request_time(_ctx(ctx, "site"), _ctx(ctx, "product"))
    if t_last is None or t_last >= float(_ctx(ctx, "t")):
        return float(env.horizon)
    return float(_current_day(ctx) - day_of(t_last))


def _product_days_since_delivery(env, ctx) -> float:
    hit = env.ledger.last_delivery(
        _ctx(ctx, "site"), _ctx(ctx, "product"), through_time=_through_time(ctx)
    )
    if hit is None:
        return float(env.horizon)
    return float(_current_day(ctx) - hit[0])


def _product_last_delivery_quality(env, ctx) -> float:
    hit = env.ledger.last_delivery(
        _ctx(ctx, "site"), _ctx(ctx, "product"), through_time=_through_time(ctx)
    )
    return 0.0 if hit is None else hit[1]


def _item_days_waiting(env, ctx) -> float:
    return float(_ctx(ctx, "day") - _ctx(ctx, "ref").origin_day)


def _open_request_count(env, ctx, unit: str = "line_items") -> float:
    if unit == "line_items":
        return float(_ctx(ctx, "open_line_items"))
    if unit == "requisitions":
        return float(_ctx(ctx, "open_requisitions"))
    raise FeatureContextError(f"unknown open-count unit {unit!r}")


def _delivery_mode_local(env, ctx) -> float:
    return 1.0 if _ctx(ctx, "ref").mode_of_delivery == DeliveryMode.LOCAL else 0.0


def _urgency_flag(env, ctx) -> float:
    return 1.0 if _ctx(ctx, "ref").urgency else 0.0


def _pair_last_outcome(env, ctx, dim: int = 0) -> float:
    y = env.ledger.pair_last_outcome(
        _ctx(ctx, "product"), _ctx(ctx, "supplier"), _ctx(ctx, "day")
    )
    return 0.0 if y is None else float(y[dim])


def _pair_outcome_mean(env, ctx, dim: int = 0) -> float:
    y = env.ledger.pair_outcome_mean(
        _ctx(ctx, "product"), _ctx(ctx, "supplier"), _ctx(ctx, "day")
    )
    return 0.0 if y is None else float(y[dim])


def _pair_volume_allocated(env, ctx) -> float:
    return env.ledger.pair_volume_total(
        _ctx(ctx, "product"), _ctx(ctx, "supplier"), _ctx(ctx, "day")
    )


def _supplier_volume_allocated(env, ctx) -> float:
    return env.ledger.supplier_volume_total(_ctx(ctx, "supplier"), _ctx(ctx, "day"))


def _pair_outcome_lag(env, ctx, lag: int = 1, dim: int = 0, default: float = 0.0) -> float:
    lags = env.ledger.pair_outcome_lags(
        _ctx(ctx, "product"), _ctx(ctx, "supplier"), _ctx(ctx, "day"), k=lag
    )
    if len(lags) < lag:
        return default
    return float(lags[lag - 1][dim])


def _pair_noise_lag(env, ctx, lag: int = 1, dim: int = 0) -> float:
    lags = env.ledger.pair_noise_lags(
        _ctx(ctx, "product"), _ctx(ctx, "supplier"), _ctx(ctx, "day"), k=lag
    )
    if len(lags) < lag:
        return 0.0
    return float(lags[lag - 1][dim])


def _supplier_volume_window(env, ctx, window: float = 90.0) -> float:
    return env.ledger.supplier_volume_past(_ctx(ctx, "supplier"), _ctx(ctx, "day"), window)


def _supplier_volume_total(env, ctx) -> float:
    return env.ledger.supplier_volume_total(_ctx(ctx, "supplier"), _ctx(ctx, "day"))


FEATURES: dict[str, Callable] = {
    "seasonal": _signal_value,
    "policy_shock": _signal_value,
    "market_disruption": _signal_value,
    "baseline": _baseline,
    "site_days_since_delivery": _site_days_since_delivery,
    "site_last_delivery_quality": _site_last_delivery_quality,
    "site_requisitions_past_year": _site_requisitions_past_year,
    "requisition_item_count": _req_item_count,
    "requisition_size_sq": _req_size_sq,
    "requisition_cost_estimate": _req_cost_estimate,
    "requisition_cost_saturation": _req_cost_saturation,
    "product_requests_past_year": _product_requests_past_year,
    "product_quantity_requested_past_year": _product_qty_requested_past_year,
    "product_quantity_delivered_past_year": _product_qty_delivered_past_year,
    "product_days_since_request": _product_days_since_request,
    "product_days_since_delivery": _product_days_since_delivery,
    "product_last_delivery_quality": _product_last_delivery_quality,
    "item_days_waiting": _item_days_waiting,
    "open_request_count": _open_request_count,
    "delivery_mode_local": _delivery_mode_local,
    "urgency_flag": _urgency_flag,
    "pair_last_outcome": _pair_last_outcome,
    "pair_outcome_mean": _pair_outcome_mean,
    "pair_volume_allocated": _pair_volume_allocated,
    "supplier_volume_allocated": _supplier_volume_allocated,
    "pair_outcome_lag": _pair_outcome_lag,
    "pair_noise_lag": _pair_noise_lag,
    "supplier_volume_window": _supplier_volume_window,
    "supplier_volume_total": _supplier_volume_total,
}

# Which registry names realize each model's covariate slots. Row-for-row this
# mirrors the documented effect tables (one name per effect; exogenous signal
# and baseline rows reuse the shared feature functions).
MODEL_FEATURES: dict[str, tuple[str, ...]] = {
    "intensity": (
        "site_days_since_delivery",
        "site_last_delivery_quality",
        "site_requisitions_past_year",
        "seasonal",
        "policy_shock",
        "market_disruption",
        "baseline",
    ),
    "stop": (
        "requisition_item_count",
        "requisition_cost_estimate",
        "seasonal",
        "policy_shock",
        "market_disruption",
        "baseline",
    ),
    "product_choice": (
        "product_requests_past_year",
        "product_quantity_delivered_past_year",
        "product_days_since_request",
        "product_days_since_delivery",
        "product_last_delivery_quality",
        "seasonal",
        "policy_shock",
        "market_disruption",
        "baseline",
    ),
    "quantity": (
        "product_quantity_requested_past_year",
        "product_quantity_delivered_past_year",
        "seasonal",
        "policy_shock",
        "market_disruption",
        "baseline",
    ),
    "order": (
        "item_days_waiting",
        "open_request_count",
        "delivery_mode_local",
        "urgency_flag",
        "seasonal",
        "policy_shock",
        "market_disruption",
        "baseline",
    ),
    "supplier": (
        "pair_last_outcome",
        "pair_outcome_mean",
        "pair_volume_allocated",
        "supplier_volume_allocated",
        "seasonal",
        "policy_shock",
        "market_disruption",
        "baseline",
    ),
    "outcome": (
        "pair_outcome_lag",
        "pair_noise_lag",
        "supplier_volume_window",
        "supplier_volume_total",
        "seasonal",
        "policy_shock",
        "market_disruption",
        "baseline",
    ),
}


def build_features(
    spec: FeatureSpec, env: FeatureEnvironment, ctx: Mapping
) -> np.ndarray:
    """Evaluate a spec's features; the result aligns with the coefficient order.

    Pure in (ledger state, clock, context): repeated calls return identical
    vectors.
    """
    values = np.empty(len(spec.bindings))
    for i, binding in enumerate(spec.bindings):
        fn = FEATURES.get(binding.feature)
        if fn is None:
            raise FeatureContextError(f"unknown feature {binding.feature!r}")
        values[i] = fn(env, ctx, **dict(binding.options))
    return values


def linear_predictor(
    spec: FeatureSpec, env: FeatureEnvironment, ctx: Mapping
) -> float:
    """Dot product of the spec's feature values with its coefficients."""
    if not spec.bindings:
        return 0.0
    total = 0.0
    for binding in spec.bindings:
        fn = FEATURES.get(binding.feature)
        if fn is None:
            raise FeatureContextError(f"unknown feature {binding.feature!r}")
        total += binding.coefficient * fn(env, ctx, **dict(binding.options))
    return total
