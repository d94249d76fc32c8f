"""Domain types, simulation clock, unresolved-request queue, and the history ledger.

Time convention: the canonical unit is the continuous day. Calendar day ``l``
(1-based) covers the half-open interval ``[l - 1, l)``; the end-of-day decision
point for day ``l`` sits at the boundary time ``float(l)``.

Visibility convention: outcome- and order-volume queries made "as of day l"
see records stamped day ``l - 1`` or earlier (outcomes of orders placed on a
day become usable the next day). Delivery records are stamped with the integer
day at whose end the goods arrive and are visible to that day's decision
point. Demand-side request queries cut off strictly before the query time.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DeliveryMode",
    "LineItem",
    "Requisition",
    "RequestRef",
    "DecisionRecord",
    "OutcomeRecord",
    "HistoryLedger",
    "UnresolvedQueue",
    "SimulationClock",
    "LedgerOrderError",
    "day_of",
]


class LedgerOrderError(ValueError):
    """Raised when an event is appended out of timestamp order."""


class DeliveryMode(str, Enum):
    LOCAL = "local"
    STORES = "stores"


def day_of(t: float) -> int:
    """Return the 1-based calendar day index containing continuous time ``t``.

    Day ``l`` covers ``[l - 1, l)``, so ``day_of(0.0) == 1`` and
    ``day_of(364.99) == 365``.
    """
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t!r}")
    return int(t) + 1


@dataclass(frozen=True)
class LineItem:
    """A single (product, quantity) entry within a requisition."""

    product_id: int
    quantity: int

    def __post_init__(self) -> None:
        if self.quantity < 1:
            raise ValueError(f"quantity must be >= 1, got {self.quantity}")


@dataclass(frozen=True)
class Requisition:
    """A site's timestamped request containing one or more line items."""

    site_id: int
    event_time: float
    items: tuple[LineItem, ...]
    mode_of_delivery: DeliveryMode = DeliveryMode.STORES
    urgency: bool = False

    def __post_init__(self) -> None:
        if self.event_time < 0:
            raise ValueError("event_time must be non-negative")
        if not self.items:
            raise ValueError("a requisition must contain at least one line item")
        products = [item.product_id for item in self.items]
        if len(set(products)) != len(products):
            raise ValueError(f"line-item products must be distinct, got {products}")

    @property
    def day(self) -> int:
        return day_of(self.event_time)


@dataclass(frozen=True)
class RequestRef:
    """Handle to one unresolved line item awaiting an order decision.

    ``sequence_key`` (arrival time, within-requisition index) totally orders
    all refs within a run; items deferred on one day keep their key and hence
    precede every later arrival.
    """

    origin_day: int
    line_index: int
    site_id: int
    product_id: int
    quantity: int
    event_time: float
    item_index: int
    mode_of_delivery: DeliveryMode = DeliveryMode.STORES
    urgency: bool = False

    @property
    def sequence_key(self) -> tuple[float, int]:
        return (self.event_time, self.item_index)


@dataclass(frozen=True)
class DecisionRecord:
    """Order-or-defer decision for one line item; supplier present iff ordered."""

    order_flag: int
    supplier: int | None = None

    def __post_init__(self) -> None:
        if self.order_flag not in (0, 1):
            raise ValueError(f"order_flag must be 0 or 1, got {self.order_flag}")
        if (self.order_flag == 1) != (self.supplier is not None):
            raise ValueError("supplier must be present iff order_flag == 1")


@dataclass(frozen=True)
class OutcomeRecord:
    """Realized order outcome: (unit cost, lead-time cost, quality cost), USD."""

    unit_cost: float
    lead_cost: float
    quality_cost: float

    def to_array(self) -> np.ndarray:
        return np.array([self.unit_cost, self.lead_cost, self.quality_cost])

    @classmethod
    def from_array(cls, y: np.ndarray) -> "OutcomeRecord":
        return cls(float(y[0]), float(y[1]), float(y[2]))


class SimulationClock:
    """Monotone simulation clock in continuous days."""

    def __init__(self) -> None:
        self.now = 0.0

    @property
    def day(self) -> int:
        return day_of(self.now)

    def advance(self, t: float) -> None:
        if t < self.now:
            raise ValueError(f"clock cannot move backwards: {self.now} -> {t}")
        self.now = t


class _Series:
    """Timestamped value series with prefix sums for O(log n) window queries."""

    __slots__ = ("_stamps", "_cum")

    def __init__(self) -> None:
        self._stamps: list[float] = []
        self._cum: list[float] = [0.0]

    def append(self, stamp: float, value: float = 1.0) -> None:
        if self._stamps and stamp < self._stamps[-1]:
            raise LedgerOrderError(
                f"out-of-order append: {stamp} after {self._stamps[-1]}"
            )
        self._stamps.append(stamp)
        self._cum.append(self._cum[-1] + value)

    def total_before(self, stamp: float) -> float:
        """Sum of values with timestamp strictly less than ``stamp``."""
        return self._cum[bisect.bisect_left(self._stamps, stamp)]

    def total_through(self, stamp: float) -> float:
        """Sum of values with timestamp less than or equal to ``stamp``."""
        return self._cum[bisect.bisect_right(self._stamps, stamp)]

    def window_sum(self, lo: float, hi: float) -> float:
        """Sum of values with timestamp in the closed interval [lo, hi]."""
        if hi < lo:
            return 0.0
        return self.total_through(hi) - self.total_before(lo)


class _OutcomeSeries:
    """Per-key outcome history with day stamps, prefix sums, and lag access."""

    __slots__ = ("days", "values", "noises", "_cum")

    def __init__(self) -> None:
        self.days: list[int] = []
        self.values: list[np.ndarray] = []
        self.noises: list[np.ndarray] = []
        self._cum: list[np.ndarray] = [np.zeros(3)]

    def append(self, day: int, value: np.ndarray, noise: np.ndarray) -> None:
        if self.days and day < self.days[-1]:
            raise LedgerOrderError(f"out-of-order append: {day} after {self.days[-1]}")
        self.days.append(day)
        self.values.append(np.asarray(value, dtype=float))
        self.noises.append(np.asarray(noise, dtype=float))
        self._cum.append(self._cum[-1] + self.values[-1])

    def _count_through(self, day: int) -> int:
        return bisect.bisect_right(self.days, day)

    def lags(self, as_of_day: int, k: int = 2) -> list[np.ndarray]:
        """Most recent outcome vectors visible at ``as_of_day``, newest first."""
        n = self._count_through(as_of_day - 1)
        return [self.values[i] for i in range(n - 1, max(n - 1 - k, -1), -1)]

    def noise_lags(self, as_of_day: int, k: int = 2) -> list[np.ndarray]:
        n = self._count_through(as_of_day - 1)
        return [self.noises[i] for i in range(n - 1, max(n - 1 - k, -1), -1)]

    def mean(self, as_of_day: int) -> np.ndarray | None:
        n = self._count_through(as_of_day - 1)
        if n == 0:
            return None
        return self._cum[n] / n

    def mean_window(self, lo_day: int, hi_day: int) -> tuple[np.ndarray | None, int]:
        lo = bisect.bisect_left(self.days, lo_day)
        hi = bisect.bisect_right(self.days, hi_day)
        if hi <= lo:
            return None, 0
        return (self._cum[hi] - self._cum[lo]) / (hi - lo), hi - lo


@dataclass(frozen=True)
class OutcomeEvent:
    day: int
    site_id: int
    product_id: int
    supplier_id: int
    quantity: int
    outcome: OutcomeRecord
    noise: tuple[float, float, float]


@dataclass(frozen=True)
class DeliveryEvent:
    day: int
    site_id: int
    product_id: int
    supplier_id: int
    quantity: int
    quality_cost: float


@dataclass(frozen=True)
class DecisionEvent:
    day: int
    site_id: int
    product_id: int
    quantity: int
    decision: DecisionRecord
    ref_key: tuple[float, int]


class HistoryLedger:
    """Append-only record of requests, decisions, outcomes, and deliveries.

    Raw streams are kept verbatim (they are the ground truth that rolling
    aggregates are tested against); derived prefix-sum series answer every
    window query in O(log n).
    """

    def __init__(self) -> None:
        self.requisitions: list[Requisition] = []
        self.decisions: list[DecisionEvent] = []
        self.outcomes: list[OutcomeEvent] = []
        self.deliveries: list[DeliveryEvent] = []

        self._site_requests: dict[int, _Series] = {}
        self._site_product_requests: dict[tuple[int, int], _Series] = {}
        self._site_product_req_qty: dict[tuple[int, int], _Series] = {}
        self._last_request_time: dict[tuple[int, int], float] = {}

        self._site_last_delivery: dict[int, tuple[int, float]] = {}
        self._pair_last_delivery: dict[tuple[int, int], tuple[int, float]] = {}
        self._site_product_delivered_qty: dict[tuple[int, int], _Series] = {}
        self._delivery_guard = _Series()

        self._pair_outcomes: dict[tuple[int, int], _OutcomeSeries] = {}
        self._supplier_outcomes: dict[int, _OutcomeSeries] = {}
        self._product_unit_cost: dict[int, _Series] = {}
        self._product_unit_cost_n: dict[int, _Series] = {}

        self._supplier_volume: dict[int, _Series] = {}
        self._pair_volume: dict[tuple[int, int], _Series] = {}
        self._decision_guard = _Series()

    @staticmethod
    def _get(table: dict, key) -> _Series:
        series = table.get(key)
        if series is None:
            series = table[key] = _Series()
        return series

    # -- appends ------------------------------------------------------------

    def append_requisition(self, requisition: Requisition) -> None:
        t = requisition.event_time
        if self.requisitions and t < self.requisitions[-1].event_time:
            raise LedgerOrderError(
                f"requisition at {t} after {self.requisitions[-1].event_time}"
            )
        self.requisitions.append(requisition)
        site = requisition.site_id
        self._get(self._site_requests, site).append(t)
        for item in requisition.items:
            key = (site, item.product_id)
            self._get(self._site_product_requests, key).append(t)
            self._get(self._site_product_req_qty, key).append(t, item.quantity)
            self._last_request_time[key] = t

    def append_decision(
        self, day: int, ref: RequestRef, decision: DecisionRecord
    ) -> None:
        self._decision_guard.append(day)
        self.decisions.append(
            DecisionEvent(
                day=day,
                site_id=ref.site_id,
                product_id=ref.product_id,
                quantity=ref.quantity,
                decision=decision,
                ref_key=ref.sequence_key,
            )
        )

    def append_outcome(
        self,
        day: int,
        site_id: int,
        product_id: int,
        supplier_id: int,
        quantity: int,
        outcome: OutcomeRecord,
        noise: np.ndarray,
    ) -> None:
        self.outcomes.append(
            OutcomeEvent(
                day=day,
                site_id=site_id,
                product_id=product_id,
                supplier_id=supplier_id,
                quantity=quantity,
                outcome=outcome,
                noise=(float(noise[0]), float(noise[1]), float(noise[2])),
            )
        )
        y = outcome.to_array()
        self._get_outcomes(self._pair_outcomes, (product_id, supplier_id)).append(
            day, y, noise
        )
        self._get_outcomes(self._supplier_outcomes, supplier_id).append(day, y, noise)
        self._get(self._product_unit_cost, product_id).append(day, outcome.unit_cost)
        self._get(self._product_unit_cost_n, product_id).append(day)
        self._get(self._supplier_volume, supplier_id).append(day, quantity)
        self._get(self._pair_volume, (product_id, supplier_id)).append(day, quantity)

    @staticmethod
    def _get_outcomes(table: dict, key) -> _OutcomeSeries:
        series = table.get(key)
        if series is None:
            series = table[key] = _OutcomeSeries()
        return series

    def append_delivery(
        self,
        day: int,
        site_id: int,
        product_id: int,
        supplier_id: int,
        quantity: int,
        quality_cost: float,
    ) -> None:
        self._delivery_guard.append(day)
        self.deliveries.append(
            DeliveryEvent(day, site_id, product_id, supplier_id, quantity, quality_cost)
        )
        self._site_last_delivery[site_id] = (day, quality_cost)
        self._pair_last_delivery[(site_id, product_id)] = (day, quality_cost)
        self._get(self._site_product_delivered_qty, (site_id, product_id)).append(
            day, quantity
        )

    # -- demand-side queries (continuous time, strictly-before semantics) ----

    def requisition_count_past(
        self, site_id: int, before_time: float, window_days: float
    ) -> int:
        series = self._site_requests.get(site_id)
        if series is None:
            return 0
        return int(
            series.total_before(before_time)
            - series.total_before(before_time - window_days)
        )

    def product_request_count_past(
        self, site_id: int, product_id: int, before_time: float, window_days: float
    ) -> int:
        series = self._site_product_requests.get((site_id, product_id))
        if series is None:
            return 0
        return int(
            series.total_before(before_time)
            - series.total_before(before_time - window_days)
        )

    def product_quantity_requested_past(
        self, site_id: int, product_id: int, before_time: float, window_days: float
    ) -> float:
        series = self._site_product_req_qty.get((site_id, product_id))
        if series is None:
            return 0.0
        return series.total_before(before_time) - series.total_before(
            before_time - window_days
        )

    def last_request_time(self, site_id: int, product_id: int) -> float | None:
        return self._last_request_time.get((site_id, product_id))

    # -- delivery queries (day stamps; visible through the given time) -------

    def last_delivery(
        self, site_id: int, product_id: int | None = None, through_time: float = np.inf
    ) -> tuple[int, float] | None:
        """Latest (day, quality_cost) delivery record stamped <= through_time."""
        if product_id is None:
            hit = self._site_last_delivery.get(site_id)
        else:
            hit = self._pair_last_delivery.get((site_id, product_id))
        if hit is not None and hit[0] <= through_time:
            return hit
        # rare path: latest record not yet visible, scan raw stream backwards
        for event in reversed(self.deliveries):
            if event.day > through_time:
                continue
            if event.site_id != site_id:
                continue
            if product_id is not None and event.product_id != product_id:
                continue
            return (event.day, event.quality_cost)
        return None

    def quantity_delivered_past(
        self, site_id: int, product_id: int, through_time: float, window_days: float
    ) -> float:
        series = self._site_product_delivered_qty.get((site_id, product_id))
        if series is None:
            return 0.0
        return series.window_sum(through_time - window_days, through_time)

    # -- outcome/volume queries (as-of-day l: records of day <= l - 1) -------

    def pair_outcome_lags(
        self, product_id: int, supplier_id: int, as_of_day: int, k: int = 2
    ) -> list[np.ndarray]:
        series = self._pair_outcomes.get((product_id, supplier_id))
        return [] if series is None else series.lags(as_of_day, k)

    def pair_noise_lags(
        self, product_id: int, supplier_id: int, as_of_day: int, k: int = 2
    ) -> list[np.ndarray]:
        series = self._pair_outcomes.get((product_id, supplier_id))
        return [] if series is None else series.noise_lags(as_of_day, k)

    def pair_last_outcome(
        self, product_id: int, supplier_id: int, as_of_day: int
    ) -> np.ndarray | None:
        lags = self.pair_outcome_lags(product_id, supplier_id, as_of_day, k=1)
        return lags[0] if lags else None

    def pair_outcome_mean(
        self, product_id: int, supplier_id: int, as_of_day: int
    ) -> np.ndarray | None:
        series = self._pair_outcomes.get((product_id, supplier_id))
        return None if series is None else series.mean(as_of_day)

    def product_unit_cost_mean(
        self, product_id: int, as_of_day: int, window_days: float = 365.0
    ) -> float | None:
        total = self._product_unit_cost.get(product_id)
        count = self._product_unit_cost_n.get(product_id)
        if total is None or count is None:
            return None
        n = count.window_sum(as_of_day - window_days, as_of_day - 1)
        if n == 0:
            return None
        return total.window_sum(as_of_day - window_days, as_of_day - 1) / n

    def supplier_volume_past(
        self, supplier_id: int, as_of_day: int, window_days: float
    ) -> float:
        series = self._supplier_volume.get(supplier_id)
        if series is None:
            return 0.0
        return series.window_sum(as_of_day - window_days, as_of_day - 1)

    def supplier_volume_total(self, supplier_id: int, as_of_day: int) -> float:
        series = self._supplier_volume.get(supplier_id)
        if series is None:
            return 0.0
        return series.total_through(as_of_day - 1)

    def pair_volume_total(
        self, product_id: int, supplier_id: int, as_of_day: int
    ) -> float:
        series = self._pair_volume.get((product_id, supplier_id))
        if series is None:
            return 0.0
        return series.total_through(as_of_day - 1)

    # -- reporting (supplier evaluation; sees completed days through hi) -----

    def supplier_outcome_mean_window(
        self, supplier_id: int, lo_day: int, hi_day: int
    ) -> tuple[np.ndarray | None, int]:
        series = self._supplier_outcomes.get(supplier_id)
        if series is None:
            return None, 0
        return series.mean_window(lo_day, hi_day)


class UnresolvedQueue:
    """The set of line items awaiting an order decision, in arrival order."""

    def __init__(self) -> None:
        self._items: list[RequestRef] = []

    def __len__(self) -> int:
        return len(self._items)

    def push(self, ref: RequestRef) -> None:
        if self._items and ref.sequence_key < self._items[-1].sequence_key:
            raise ValueError(
                f"refs must arrive in sequence order; {ref.sequence_key} after "
                f"{self._items[-1].sequence_key}"
            )
        self._items.append(ref)

    def extend(self, refs: Iterable[RequestRef]) -> None:
        for ref in refs:
            self.push(ref)

    def in_order(self) -> list[RequestRef]:
        """All pending refs sorted ascending by sequence key."""
        return sorted(self._items, key=lambda r: r.sequence_key)

    def replace(self, refs: Sequence[RequestRef]) -> None:
        """Reset contents to ``refs`` (used to install the day's carryover)."""
        self._items = list(refs)
