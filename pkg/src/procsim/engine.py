"""Discrete-event scheduler: five event kinds wired per the procurement event graph.

Kinds and their same-time priority (lower runs first): order delivery,
requisition generation, decision point, supplier evaluation, termination.
Deliveries land on day boundaries and must precede the boundary's decision
point so same-day features see them; evaluation summarizes completed days;
all remaining ties break on insertion order.

At initialization the queue holds one requisition-generation event per site
whose first thinned time lands inside the horizon, the first decision point
at t=1, the first supplier evaluation at t=90, and termination at t=horizon.
Generation, decision, and evaluation events each self-schedule their
successor; decision points are the only scheduler of deliveries.
"""

from __future__ import annotations

import bisect
import hashlib
import heapq
import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator

import numpy as np

from .core import (
    HistoryLedger,
    RequestRef,
    Requisition,
    SimulationClock,
    UnresolvedQueue,
    day_of,
)
from .demand import IntensityModel, RequisitionModel, generate_requisition, next_request_time
from .operations import OperationsModels, process_day
from .policies import Policy, RegretAccount
from .signals import FeatureEnvironment
from .stochastic import RandomSource

__all__ = [
    "EventKind",
    "Event",
    "EventQueue",
    "SimulationEngine",
    "RunResult",
    "DayStat",
    "EvaluationRow",
]

_TIME_COLLISION_EPS = 1e-9
_EVALUATION_PERIOD = 90.0


class EventKind(IntEnum):
    ORDER_DELIVERY = 0
    REQUISITION_GENERATION = 1
    DECISION_POINT = 2
    SUPPLIER_EVALUATION = 3
    TERMINATION = 4


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    seq: int
    payload: tuple = ()


class EventQueue:
    """Min-queue over (time, kind priority, insertion sequence)."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, int, Event]] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: float, kind: EventKind, payload: tuple = ()) -> None:
        event = Event(time, kind, self._seq, payload)
        heapq.heappush(self._heap, (time, int(kind), self._seq, event))
        self._seq += 1

    def pop(self) -> Event:
        return heapq.heappop(self._heap)[-1]


@dataclass(frozen=True)
class DayStat:
    day: int
    queue_size: int
    n_ordered: int
    n_generated: int


@dataclass(frozen=True)
class EvaluationRow:
    time: float
    supplier_id: int
    n_orders: int
    mean_unit_cost: float
    mean_lead_cost: float
    mean_quality_cost: float


@dataclass
class RunResult:
    ledger: HistoryLedger
    regret: RegretAccount
    day_stats: list[DayStat]
    evaluations: list[EvaluationRow]
    requisition_hash: str
    n_requisitions: int
    horizon: int
    event_log: list[str] | None = None

    @property
    def terminal_regret(self) -> float:
        return self.regret.total

    def daily_cumulative_regret(self) -> np.ndarray:
        return self.regret.daily_cumulative(self.horizon)


class SimulationEngine:
    """One replication of the procurement system under one policy."""

    def __init__(
        self,
        horizon: int,
        site_ids: tuple[int, ...],
        intensity: IntensityModel,
        requisition_model: RequisitionModel,
        operations: OperationsModels,
        env: FeatureEnvironment,
        policy: Policy,
        random_source: RandomSource,
        keep_event_log: bool = False,
    ) -> None:
        if horizon < 1:
            raise ValueError("horizon must be at least 1 day")
        self.horizon = int(horizon)
        self.site_ids = site_ids
        self.intensity = intensity
        self.requisition_model = requisition_model
        self.operations = operations
        self.env = env
        self.policy = policy
        self.rs = random_source

        self.clock = SimulationClock()
        self.ledger = env.ledger
        self.queue = UnresolvedQueue()
        self.events = EventQueue()
        self.regret = RegretAccount(allow_negative=operations.realized_regret)
        self.day_stats: list[DayStat] = []
        self.evaluations: list[EvaluationRow] = []
        self.event_log: list[str] | None = [] if keep_event_log else None
        self._halted = False
        self._generated_per_day: dict[int, int] = {}
        self._line_seq_per_day: dict[int, int] = {}
        self._used_times: list[float] = []
        self._req_hash = hashlib.sha256()
        self.n_requisitions = 0

    # -- wiring ---------------------------------------------------------------

    def _timing_stream(self, site_id: int) -> np.random.Generator:
        return self.rs.stream("demand-timing", site_id)

    def _content_stream(self, site_id: int) -> np.random.Generator:
        return self.rs.stream("requisition-content", site_id)

    def initialize(self) -> None:
        for site in self.site_ids:
            t = next_request_time(
                self.intensity, site, 0.0, float(self.horizon), self.env,
                self._timing_stream(site),
            )
            if t is not None:
                self.events.push(t, EventKind.REQUISITION_GENERATION, (site,))
        self.events.push(1.0, EventKind.DECISION_POINT, (1,))
        self.events.push(_EVALUATION_PERIOD, EventKind.SUPPLIER_EVALUATION)
        self.events.push(float(self.horizon), EventKind.TERMINATION)

    # -- event handlers ---------------------------------------------------------

    def _resolve_time_collision(self, t: float) -> float:
        """Keep requisition times distinct by nudging near-coincident arrivals."""
        while True:
            i = bisect.bisect_left(self._used_times, t - _TIME_COLLISION_EPS)
            if i < len(self._used_times) and abs(self._used_times[i] - t) < _TIME_COLLISION_EPS:
                t += _TIME_COLLISION_EPS
                continue
            bisect.insort(self._used_times, t)
            return t

    def _handle_generation(self, event: Event) -> None:
        site = event.payload[0]
        t = self._resolve_time_collision(event.time)
        requisition = generate_requisition(
            self.requisition_model, site, t, self.env, self._content_stream(site)
        )
        self.ledger.append_requisition(requisition)
        self.n_requisitions += 1
        self._hash_requisition(requisition)
        day = requisition.day
        self._generated_per_day[day] = self._generated_per_day.get(day, 0) + len(
            requisition.items
        )
        for idx, item in enumerate(requisition.items):
            seq = self._line_seq_per_day.get(day, 0) + 1
            self._line_seq_per_day[day] = seq
            self.queue.push(
                RequestRef(
                    origin_day=day,
                    line_index=seq,
                    site_id=site,
                    product_id=item.product_id,
                    quantity=item.quantity,
                    event_time=t,
                    item_index=idx,
                    mode_of_delivery=requisition.mode_of_delivery,
                    urgency=requisition.urgency,
                )
            )
        t_next = next_request_time(
            self.intensity, site, t, float(self.horizon), self.env,
            self._timing_stream(site),
        )
        if t_next is not None:
            self.events.push(t_next, EventKind.REQUISITION_GENERATION, (site,))

    def _handle_decision_point(self, event: Event) -> None:
        day = event.payload[0]
        result = process_day(
            day,
            self.queue,
            self.ledger,
            self.env,
            self.policy,
            self.operations,
            self.rs.stream("order-propensity"),
            self.rs.stream("outcome-noise"),
            self.regret,
        )
        self.policy.end_of_day()
        self.day_stats.append(
            DayStat(
                day=day,
                queue_size=result.queue_size_before,
                n_ordered=result.n_ordered,
                n_generated=self._generated_per_day.get(day, 0),
            )
        )
        for order in result.orders:
            if order.delivery_day <= self.horizon:
                self.events.push(
                    float(order.delivery_day),
                    EventKind.ORDER_DELIVERY,
                    (order.ref, order.supplier_id, order.outcome),
                )
        if day < self.horizon:
            self.events.push(float(day + 1), EventKind.DECISION_POINT, (day + 1,))

    def _handle_delivery(self, event: Event) -> None:
        ref, supplier_id, outcome = event.payload
        day = int(event.time)
        self.ledger.append_delivery(
            day, ref.site_id, ref.product_id, supplier_id, ref.quantity,
            outcome.quality_cost,
        )

    def _handle_evaluation(self, event: Event) -> None:
        t = event.time
        hi_day = int(t)
        lo_day = hi_day - int(_EVALUATION_PERIOD) + 1
        for supplier in self.operations.suppliers:
            mean, n = self.ledger.supplier_outcome_mean_window(supplier, lo_day, hi_day)
            self.evaluations.append(
                EvaluationRow(
                    time=t,
                    supplier_id=supplier,
                    n_orders=n,
                    mean_unit_cost=float(mean[0]) if mean is not None else float("nan"),
                    mean_lead_cost=float(mean[1]) if mean is not None else float("nan"),
                    mean_quality_cost=float(mean[2]) if mean is not None else float("nan"),
                )
            )
        t_next = t + _EVALUATION_PERIOD
        if t_next <= self.horizon:
            self.events.push(t_next, EventKind.SUPPLIER_EVALUATION)

    # -- loop -------------------------------------------------------------------

    def step(self) -> Event:
        """Pop and dispatch the minimal event; returns the popped event."""
        event = self.events.pop()
        if event.time < self.clock.now:
            raise RuntimeError(
                f"event at {event.time} is earlier than clock {self.clock.now}"
            )
        self.clock.advance(event.time)
        if self.event_log is not None:
            self.event_log.append(self._log_line(event))
        if event.kind == EventKind.REQUISITION_GENERATION:
            self._handle_generation(event)
        elif event.kind == EventKind.DECISION_POINT:
            self._handle_decision_point(event)
        elif event.kind == EventKind.ORDER_DELIVERY:
            self._handle_delivery(event)
        elif event.kind == EventKind.SUPPLIER_EVALUATION:
            self._handle_evaluation(event)
        elif event.kind == EventKind.TERMINATION:
            self._halted = True
        return event

    def run(self) -> RunResult:
        self.initialize()
        while not self._halted and len(self.events):
            self.step()
        return RunResult(
            ledger=self.ledger,
            regret=self.regret,
            day_stats=self.day_stats,
            evaluations=self.evaluations,
            requisition_hash=self._req_hash.hexdigest(),
            n_requisitions=self.n_requisitions,
            horizon=self.horizon,
            event_log=self.event_log,
        )

    # -- bookkeeping --------------------------------------------------------------

    def _hash_requisition(self, requisition: Requisition) -> None:
        record = (
            requisition.site_id,
            repr(requisition.event_time),
            tuple((i.product_id, i.quantity) for i in requisition.items),
            requisition.mode_of_delivery.value,
            requisition.urgency,
        )
        self._req_hash.update(repr(record).encode("utf-8"))

    def _log_line(self, event: Event) -> str:
        payload: dict = {}
        if event.kind == EventKind.REQUISITION_GENERATION:
            payload = {"site": event.payload[0]}
        elif event.kind == EventKind.DECISION_POINT:
            payload = {"day": event.payload[0]}
        elif event.kind == EventKind.ORDER_DELIVERY:
            ref = event.payload[0]
            payload = {
                "site": ref.site_id,
                "product": ref.product_id,
                "supplier": event.payload[1],
            }
        return json.dumps(
            {"time": event.time, "kind": event.kind.name.lower(), **payload},
            separators=(",", ":"),
        )
