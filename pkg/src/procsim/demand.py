"""Requisition timing (thinned recurrent events) and requisition content generation.

Timing follows a per-site multiplicative intensity: site frailty times a
baseline rate times the exponential of a feature linear predictor. Event
times come from rejection (thinning) against a dominating bound process.

Content follows a sequential chain per requisition: draw correlated product
intercepts and a quantity frailty once, then repeatedly pick a product from
the remaining candidates by softmax utility, draw its quantity, and draw a
continue/stop flag. The first product is always drawn (a requisition exists
because something is needed), so every requisition has at least one item.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import DeliveryMode, LineItem, Requisition
from .signals import FeatureEnvironment, FeatureSpec, linear_predictor
from .stochastic import (
    expit,
    sample_categorical,
    sample_gamma_mean_one,
    sample_mvnormal,
    sample_truncated_negbin,
)

__all__ = [
    "ConstantRate",
    "PiecewiseRate",
    "WeibullBaseline",
    "IntensityModel",
    "StopModel",
    "ProductChoiceModel",
    "QuantityModel",
    "RequisitionModel",
    "ThinningBoundError",
    "intensity_at",
    "next_request_time",
    "stop_propensity",
    "product_propensities",
    "sample_quantity",
    "generate_requisition",
]


class ThinningBoundError(RuntimeError):
    """The intensity exceeded its stated bound at a candidate time."""


@dataclass(frozen=True)
class ConstantRate:
    rate: float

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError(f"rate must be non-negative, got {self.rate}")

    def at(self, t: float) -> float:
        return self.rate


@dataclass(frozen=True)
class PiecewiseRate:
    """Right-open piecewise-constant rate over [start_0, inf)."""

    starts: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.starts) != len(self.rates) or not self.starts:
            raise ValueError("starts and rates must be non-empty and equal length")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("segment starts must be strictly increasing")
        if any(r < 0 for r in self.rates):
            raise ValueError("rates must be non-negative")

    def at(self, t: float) -> float:
        idx = 0
        for i, start in enumerate(self.starts):
            if t >= start:
                idx = i
            else:
                break
        return self.rates[idx]


@dataclass(frozen=True)
class WeibullBaseline:
    """Weibull hazard form: (shape/scale) * (t/scale)**(shape - 1)."""

    shape: float
    scale: float

    def __post_init__(self) -> None:
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("shape and scale must be positive")

    def at(self, t: float) -> float:
        if t <= 0:
            return 0.0 if self.shape > 1 else (math.inf if self.shape < 1 else 1.0 / self.scale)
        return (self.shape / self.scale) * (t / self.scale) ** (self.shape - 1.0)


@dataclass
class IntensityModel:
    """Per-site request intensity: frailty * baseline(t) * exp(features . beta)."""

    baseline: ConstantRate | PiecewiseRate | WeibullBaseline
    bound: ConstantRate | PiecewiseRate
    features: FeatureSpec = field(default_factory=lambda: FeatureSpec("intensity"))
    frailty_variance: float = 0.0
    site_frailties: dict[int, float] = field(default_factory=dict)

    def frailty(self, site_id: int) -> float:
        return self.site_frailties.get(site_id, 1.0)

    def draw_frailties(self, site_ids: Sequence[int], stream: np.random.Generator) -> None:
        if self.frailty_variance <= 0:
            self.site_frailties = {site: 1.0 for site in site_ids}
            return
        self.site_frailties = {
            site: sample_gamma_mean_one(self.frailty_variance, stream)
            for site in site_ids
        }


def intensity_at(
    model: IntensityModel,
    site_id: int,
    t: float,
    env: FeatureEnvironment,
) -> float:
    """Evaluate the site's request intensity (rate per day) at time t."""
    base = model.baseline.at(t)
    if not model.features.bindings:
        return model.frailty(site_id) * base
    ctx = {"site": site_id, "t": t}
    return model.frailty(site_id) * base * math.exp(
        linear_predictor(model.features, env, ctx)
    )


def _next_bound_candidate(
    bound: ConstantRate | PiecewiseRate,
    scale: float,
    t: float,
    horizon: float,
    stream: np.random.Generator,
) -> float | None:
    """Advance t by an exponential holding time of the scaled bound process.

    Returns None once the candidate leaves (t, horizon].
    """
    e = stream.exponential(1.0)
    if isinstance(bound, ConstantRate):
        rate = scale * bound.rate
        if rate <= 0:
            return None
        t_next = t + e / rate
        return t_next if t_next <= horizon else None
    starts = bound.starts
    for i, rate0 in enumerate(bound.rates):
        seg_lo = starts[i]
        seg_hi = starts[i + 1] if i + 1 < len(starts) else math.inf
        if seg_hi <= t:
            continue
        lo = max(t, seg_lo)
        rate = scale * rate0
        if rate <= 0:
            continue
        capacity = rate * (min(seg_hi, horizon) - lo)
        if e <= capacity:
            t_next = lo + e / rate
            return t_next if t_next <= horizon else None
        e -= max(capacity, 0.0)
        if seg_hi >= horizon:
            return None
    return None


def next_request_time(
    model: IntensityModel,
    site_id: int,
    t_prev: float,
    horizon: float,
    env: FeatureEnvironment,
    stream: np.random.Generator,
) -> float | None:
    """First accepted thinning time in (t_prev, horizon], or None.

    Candidates arrive at the (frailty-scaled) bound rate; each is accepted
    with probability intensity/bound. A candidate where the intensity exceeds
    the bound aborts the run: the configured bound is wrong, and silently
    continuing would bias every downstream result.
    """
    zeta = model.frailty(site_id)
    t = t_prev
    while True:
        t_cand = _next_bound_candidate(model.bound, zeta, t, horizon, stream)
        if t_cand is None:
            return None
        t = t_cand
        lam = intensity_at(model, site_id, t, env)
        lam_star = zeta * model.bound.at(t)
        if lam > lam_star * (1.0 + 1e-9):
            raise ThinningBoundError(
                f"intensity {lam:.6g} exceeds bound {lam_star:.6g} at t={t:.6g} "
                f"(site {site_id})"
            )
        if lam_star > 0 and stream.random() < lam / lam_star:
            return t


@dataclass
class StopModel:
    """Continue/stop chain for requisition filling.

    ``intercept`` is the realized per-run value (drawn by the builder from its
    configured normal law); the propensity returned is the probability of
    CONTINUING with another line item.
    """

    intercept: float = 0.0
    features: FeatureSpec = field(default_factory=lambda: FeatureSpec("stop"))


@dataclass
class ProductChoiceModel:
    """Softmax product selection over the remaining candidates.

    Utilities are a feature linear predictor plus group random intercepts
    (drawn once per requisition) plus optional i.i.d. per-candidate normal
    noise, which realizes a pure random-utility pick when no features are
    configured.
    """

    features: FeatureSpec = field(default_factory=lambda: FeatureSpec("product_choice"))
    group_design: np.ndarray | None = None  # groups x products
    group_cov: np.ndarray | None = None  # groups x groups
    utility_noise_std: float = 0.0
    product_columns: dict[int, int] = field(default_factory=dict)


@dataclass
class QuantityModel:
    """Zero-truncated gamma-mixed-Poisson line-item quantities."""

    base_means: dict[int, float]
    dispersion: float
    features: FeatureSpec = field(default_factory=lambda: FeatureSpec("quantity"))

    def __post_init__(self) -> None:
        if self.dispersion <= 0:
            raise ValueError(f"dispersion must be positive, got {self.dispersion}")


@dataclass
class RequisitionModel:
    """Everything needed to fill a requisition once its event time is drawn."""

    products: tuple[int, ...]
    baseline_costs: dict[int, float]
    stop: StopModel
    choice: ProductChoiceModel
    quantity: QuantityModel
    mode_local_rate: float = 0.5
    urgency_rate: float = 0.1
    cost_mode: str = "baseline"  # or "rolling": trailing average of realized unit costs

    def unit_cost_estimate(
        self, product_id: int, env: FeatureEnvironment, day: int
    ) -> float:
        if self.cost_mode == "rolling":
            rolled = env.ledger.product_unit_cost_mean(product_id, day)
            if rolled is not None:
                return rolled
        return self.baseline_costs[product_id]


def stop_propensity(
    model: RequisitionModel,
    items: Sequence[LineItem],
    env: FeatureEnvironment,
    site_id: int,
    t: float,
) -> float:
    """Probability of adding another line item, given the partial requisition."""
    day = _day_at(t)
    cost = sum(
        model.unit_cost_estimate(item.product_id, env, day) * item.quantity
        for item in items
    )
    ctx = {
        "site": site_id,
        "t": t,
        "items": tuple(items),
        "cost_estimate": cost,
    }
    return expit(model.stop.intercept + linear_predictor(model.stop.features, env, ctx))


def _day_at(t: float) -> int:
    return int(t) + 1


def product_propensities(
    model: RequisitionModel,
    candidates: Sequence[int],
    items: Sequence[LineItem],
    env: FeatureEnvironment,
    site_id: int,
    t: float,
    group_intercepts: np.ndarray | None = None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Softmax selection probabilities over the candidate products."""
    if not candidates:
        raise ValueError("candidate set must be non-empty")
    utilities = np.zeros(len(candidates))
    choice = model.choice
    for i, product in enumerate(candidates):
        u = 0.0
        if choice.features.bindings:
            ctx = {"site": site_id, "t": t, "product": product, "items": tuple(items)}
            u += linear_predictor(choice.features, env, ctx)
        if group_intercepts is not None and choice.group_design is not None:
            col = choice.product_columns[product]
            u += float(choice.group_design[:, col] @ group_intercepts)
        if noise is not None:
            u += float(noise[i])
        utilities[i] = u
    shifted = np.exp(utilities - utilities.max())
    return shifted / shifted.sum()


def sample_quantity(
    model: RequisitionModel,
    product_id: int,
    env: FeatureEnvironment,
    site_id: int,
    t: float,
    zeta: float,
    stream: np.random.Generator,
) -> int:
    """Zero-truncated quantity draw for one line item (always >= 1)."""
    qm = model.quantity
    mean = qm.base_means.get(product_id, 0.0)
    if qm.features.bindings:
        ctx = {"site": site_id, "t": t, "product": product_id}
        mean += linear_predictor(qm.features, env, ctx)
    mean = max(mean, 0.0)
    return int(sample_truncated_negbin(zeta * mean, qm.dispersion, stream))


def generate_requisition(
    model: RequisitionModel,
    site_id: int,
    t: float,
    env: FeatureEnvironment,
    stream: np.random.Generator,
) -> Requisition:
    """Fill a requisition triggered at time t for the given site.

    Chain order per the sequential mechanism: correlated intercepts and the
    quantity frailty are drawn once; then select product, draw quantity, and
    draw continue/stop until a stop or candidate exhaustion.
    """
    choice = model.choice
    group_intercepts = None
    if choice.group_design is not None and choice.group_cov is not None:
        group_intercepts = sample_mvnormal(
            np.zeros(choice.group_cov.shape[0]), choice.group_cov, stream
        )
    zeta = sample_gamma_mean_one(model.quantity.dispersion, stream)

    candidates = sorted(model.products)
    items: list[LineItem] = []
    while candidates:
        noise = None
        if choice.utility_noise_std > 0:
            noise = choice.utility_noise_std * stream.standard_normal(len(candidates))
        probs = product_propensities(
            model, candidates, items, env, site_id, t, group_intercepts, noise
        )
        product = candidates.pop(sample_categorical(probs, stream))
        quantity = sample_quantity(model, product, env, site_id, t, zeta, stream)
        items.append(LineItem(product, quantity))
        if not candidates:
            break
        p_continue = stop_propensity(model, items, env, site_id, t)
        if stream.random() >= p_continue:
            break

    mode = (
        DeliveryMode.LOCAL
        if stream.random() < model.mode_local_rate
        else DeliveryMode.STORES
    )
    urgency = bool(stream.random() < model.urgency_rate)
    return Requisition(
        site_id=site_id,
        event_time=t,
        items=tuple(items),
        mode_of_delivery=mode,
        urgency=urgency,
    )
