"""Configuration, per-replication wiring, the Monte Carlo runner, and reports.

Every policy in a replication runs against a fresh random source derived from
(master seed, replication), so the demand substreams realize identically
across policies (common random numbers); only policy-internal streams differ.
Replications are independent and may run in parallel worker processes; report
rows key on (policy, replication), so assembly order never matters.
"""

from __future__ import annotations

import csv
import importlib.resources
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .core import HistoryLedger
from .demand import ConstantRate, IntensityModel, ProductChoiceModel, QuantityModel, RequisitionModel, StopModel
from .engine import RunResult, SimulationEngine
from .operations import (
    LeadTimeRule,
    OperationsModels,
    OrderPropensityModel,
    OutcomeModel,
    OutcomePairParams,
)
from .policies import (
    FixedPolicy,
    OraclePolicy,
    Policy,
    RandomPolicy,
    StaticUtilityPolicy,
    ThompsonBandit,
)
from .signals import FeatureBinding, FeatureEnvironment, FeatureSpec, HarmonicSignal
from .stochastic import RandomSource, cholesky_psd

__all__ = [
    "ExperimentConfig",
    "ConfigParseError",
    "ConfigValidationError",
    "ReportBundle",
    "load_config",
    "parse_seed",
    "run_single",
    "run_experiment",
    "write_reports",
    "summarize_terminal_rows",
    "KNOWN_POLICIES",
]

KNOWN_POLICIES = ("fixed-1", "fixed-2", "random", "static-utility", "bandit", "oracle")


class ConfigParseError(ValueError):
    """The config file could not be read or parsed."""


class ConfigValidationError(ValueError):
    """The parsed config violates one or more invariants."""

    def __init__(self, violations: Sequence[str]) -> None:
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(f"- {v}" for v in violations))


def parse_seed(value) -> int:
    """Accept decimal or hex (0x-prefixed) seeds from CLI or config."""
    if isinstance(value, int):
        return value
    return int(str(value).strip(), 0)


@dataclass
class ProductConfig:
    id: int
    baseline_cost: float
    quantity_mean: float


@dataclass
class StopConfig:
    intercept_mean: float = 5.0
    intercept_std: float = 1.0
    size_coefficient: float = -0.1
    cost_coefficient: float = -120.0
    cost_threshold: float = 20.0
    cost_saturation: float = 500.0
    cost_mode: str = "baseline"


@dataclass
class DemandConfig:
    mean_interarrival_days: float | None = 90.0
    rate_per_day: float | None = None
    frailty_variance: float = 0.0
    stop: StopConfig = field(default_factory=StopConfig)
    product_utility_noise_std: float = 1.0
    quantity_dispersion: float = 1e-9
    mode_local_rate: float = 0.5
    urgency_rate: float = 0.1

    @property
    def rate(self) -> float:
        if self.rate_per_day is not None:
            return self.rate_per_day
        return 1.0 / self.mean_interarrival_days


@dataclass
class OrderConfig:
    mode: str = "uniform"
    low: float = 0.1
    high: float = 0.9


@dataclass
class LeadConfig:
    usd_per_day: float = 10.0
    floor_days: int = 1


@dataclass
class OutcomeConfig:
    ar1_coefficient: float = 0.2
    ar2_coefficient: float = 0.1
    noise_covariance: list = field(
        default_factory=lambda: [[25.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 4.0]]
    )
    harmonic_period: float = 365.0
    harmonic_phase: float = math.pi / 6.0
    harmonic_loading: list = field(default_factory=lambda: [8.0, 2.0, -2.0])
    supplier_harmonic_sign: dict = field(default_factory=lambda: {1: 1.0, 2: -1.0})
    allocation_short: list = field(default_factory=lambda: [0.15, 0.0, 0.0])
    allocation_long: list = field(default_factory=lambda: [0.01, 0.0, 0.0])
    short_window: float = 90.0
    long_window: float = 365.0
    base_means: dict = field(default_factory=dict)  # product -> supplier -> 3-vector

    def ar1(self) -> np.ndarray:
        return self.ar1_coefficient * np.eye(3)

    def ar2(self) -> np.ndarray:
        return self.ar2_coefficient * np.eye(3)


@dataclass
class BanditConfig:
    prior_variance: float = 70.0
    noise_variances: list = field(default_factory=lambda: [25.0, 4.0, 4.0])


@dataclass
class UtilityConfig:
    theta_mode: str = "informed"  # or "prior-draw"


@dataclass
class RegretConfig:
    mode: str = "pseudo"  # or "realized"


@dataclass
class ExperimentConfig:
    horizon_days: int = 365
    sites: int = 50
    seed: int = 0
    replications: int = 100
    output_dir: str = "out"
    products: list = field(default_factory=list)
    suppliers: list = field(default_factory=lambda: [1, 2])
    demand: DemandConfig = field(default_factory=DemandConfig)
    order: OrderConfig = field(default_factory=OrderConfig)
    lead: LeadConfig = field(default_factory=LeadConfig)
    outcome: OutcomeConfig = field(default_factory=OutcomeConfig)
    weights: list = field(default_factory=lambda: [0.5, 0.25, 0.25])
    policies: list = field(default_factory=lambda: list(KNOWN_POLICIES))
    bandit: BanditConfig = field(default_factory=BanditConfig)
    utility: UtilityConfig = field(default_factory=UtilityConfig)
    regret: RegretConfig = field(default_factory=RegretConfig)
    raw: dict = field(default_factory=dict, repr=False)

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        data = dict(data)
        cfg = cls(raw=dict(data))
        cfg.horizon_days = int(data.get("horizon_days", cfg.horizon_days))
        cfg.sites = int(data.get("sites", cfg.sites))
        cfg.seed = parse_seed(data.get("seed", cfg.seed))
        cfg.replications = int(data.get("replications", cfg.replications))
        cfg.output_dir = str(data.get("output_dir", cfg.output_dir))
        cfg.products = [
            ProductConfig(
                id=int(p["id"]),
                baseline_cost=float(p["baseline_cost"]),
                quantity_mean=float(p["quantity_mean"]),
            )
            for p in data.get("products", [])
        ]
        cfg.suppliers = [int(s) for s in data.get("suppliers", cfg.suppliers)]

        dem = dict(data.get("demand", {}))
        stop = dict(dem.pop("stop", {}))
        cfg.demand = DemandConfig(
            mean_interarrival_days=(
                float(dem["mean_interarrival_days"])
                if "mean_interarrival_days" in dem
                else (None if "rate_per_day" in dem else 90.0)
            ),
            rate_per_day=float(dem["rate_per_day"]) if "rate_per_day" in dem else None,
            frailty_variance=float(dem.get("frailty_variance", 0.0)),
            stop=StopConfig(**{k: (str(v) if k == "cost_mode" else float(v)) for k, v in stop.items()}),
            product_utility_noise_std=float(dem.get("product_utility_noise_std", 1.0)),
            quantity_dispersion=float(dem.get("quantity_dispersion", 1e-9)),
            mode_local_rate=float(dem.get("mode_local_rate", 0.5)),
            urgency_rate=float(dem.get("urgency_rate", 0.1)),
        )

        ops = dict(data.get("operations", {}))
        order = dict(ops.get("order", {}))
        cfg.order = OrderConfig(
            mode=str(order.get("mode", "uniform")),
            low=float(order.get("low", 0.1)),
            high=float(order.get("high", 0.9)),
        )
        lead = dict(ops.get("lead_time", {}))
        cfg.lead = LeadConfig(
            usd_per_day=float(lead.get("usd_per_day", 10.0)),
            floor_days=int(lead.get("floor_days", 1)),
        )

        out = dict(data.get("outcome", {}))
        harmonic = dict(out.get("harmonic", {}))
        cfg.outcome = OutcomeConfig(
            ar1_coefficient=float(out.get("ar1_coefficient", 0.2)),
            ar2_coefficient=float(out.get("ar2_coefficient", 0.1)),
            noise_covariance=out.get(
                "noise_covariance", [[25.0, 0, 0], [0, 4.0, 0], [0, 0, 4.0]]
            ),
            harmonic_period=float(harmonic.get("period_days", 365.0)),
            harmonic_phase=float(harmonic.get("phase", math.pi / 6.0)),
            harmonic_loading=out.get("harmonic_loading", [8.0, 2.0, -2.0]),
            supplier_harmonic_sign={
                int(k): float(v)
                for k, v in dict(out.get("supplier_harmonic_sign", {1: 1.0, 2: -1.0})).items()
            },
            allocation_short=out.get("allocation_short", [0.15, 0.0, 0.0]),
            allocation_long=out.get("allocation_long", [0.01, 0.0, 0.0]),
            short_window=float(out.get("short_window", 90.0)),
            long_window=float(out.get("long_window", 365.0)),
            base_means={
                int(p): {int(s): [float(x) for x in v] for s, v in sup.items()}
                for p, sup in dict(out.get("base_means", {})).items()
            },
        )

        cfg.weights = [float(w) for w in data.get("weights", cfg.weights)]
        cfg.policies = [str(p) for p in data.get("policies", cfg.policies)]

        bandit = dict(data.get("bandit", {}))
        cfg.bandit = BanditConfig(
            prior_variance=float(bandit.get("prior_variance", 70.0)),
            noise_variances=[float(v) for v in bandit.get("noise_variances", [25.0, 4.0, 4.0])],
        )
        cfg.utility = UtilityConfig(
            theta_mode=str(dict(data.get("utility", {})).get("theta_mode", "informed"))
        )
        cfg.regret = RegretConfig(
            mode=str(dict(data.get("regret", {})).get("mode", "pseudo"))
        )
        return cfg

    # -- validation -------------------------------------------------------------

    def validate(self) -> list[str]:
        """Collect every violated invariant (empty list means valid)."""
        v: list[str] = []
        if self.horizon_days < 1:
            v.append(f"horizon_days must be >= 1, got {self.horizon_days}")
        if self.sites < 1:
            v.append(f"sites must be >= 1, got {self.sites}")
        if self.replications < 1:
            v.append(f"replications must be >= 1, got {self.replications}")
        if not self.products:
            v.append("at least one product is required")
        ids = [p.id for p in self.products]
        if len(set(ids)) != len(ids):
            v.append(f"product ids must be distinct, got {ids}")
        for p in self.products:
            if p.baseline_cost <= 0:
                v.append(f"product {p.id}: baseline_cost must be positive")
            if p.quantity_mean < 0:
                v.append(f"product {p.id}: quantity_mean must be non-negative")
        if not self.suppliers:
            v.append("at least one supplier is required")
        if len(set(self.suppliers)) != len(self.suppliers):
            v.append(f"supplier ids must be distinct, got {self.suppliers}")

        d = self.demand
        if d.rate_per_day is None and (
            d.mean_interarrival_days is None or d.mean_interarrival_days <= 0
        ):
            v.append("demand: mean_interarrival_days must be positive")
        if d.rate_per_day is not None and d.rate_per_day <= 0:
            v.append("demand: rate_per_day must be positive")
        if d.frailty_variance < 0:
            v.append("demand: frailty_variance must be non-negative")
        if d.quantity_dispersion <= 0:
            v.append("demand: quantity_dispersion must be positive")
        if d.stop.intercept_std < 0:
            v.append("demand: stop intercept_std must be non-negative")
        if not d.stop.cost_threshold < d.stop.cost_saturation:
            v.append("demand: stop cost_threshold must be below cost_saturation")
        if d.stop.cost_mode not in ("baseline", "rolling"):
            v.append(f"demand: unknown stop cost_mode {d.stop.cost_mode!r}")
        if not 0.0 <= d.mode_local_rate <= 1.0:
            v.append("demand: mode_local_rate must lie in [0, 1]")
        if not 0.0 <= d.urgency_rate <= 1.0:
            v.append("demand: urgency_rate must lie in [0, 1]")
        if d.product_utility_noise_std < 0:
            v.append("demand: product_utility_noise_std must be non-negative")

        if self.order.mode not in ("uniform", "logistic"):
            v.append(f"order: unknown mode {self.order.mode!r}")
        elif self.order.mode == "uniform" and not (
            0.0 <= self.order.low < self.order.high <= 1.0
        ):
            v.append(
                f"order: uniform bounds must satisfy 0 <= low < high <= 1, got "
                f"[{self.order.low}, {self.order.high}]"
            )
        if self.lead.usd_per_day <= 0:
            v.append("lead_time: usd_per_day must be positive")
        if self.lead.floor_days < 1:
            v.append("lead_time: floor_days must be >= 1")

        if len(self.weights) != 3:
            v.append(f"weights must have 3 entries, got {len(self.weights)}")
        else:
            if any(w < 0 for w in self.weights):
                v.append(f"weights must be non-negative, got {self.weights}")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                v.append(f"weights must sum to 1, got sum {sum(self.weights)!r}")

        o = self.outcome
        try:
            cov = np.asarray(o.noise_covariance, dtype=float)
            if cov.shape != (3, 3):
                v.append(f"outcome: noise_covariance must be 3x3, got {cov.shape}")
            else:
                cholesky_psd(cov)
        except ValueError as exc:
            v.append(f"outcome: noise_covariance invalid ({exc})")
        radius = _companion_spectral_radius(o.ar1(), o.ar2())
        if radius >= 1.0:
            v.append(
                f"outcome: lag-recursion companion spectral radius must be < 1, got {radius:.4f}"
            )
        if len(o.harmonic_loading) != 3:
            v.append("outcome: harmonic_loading must have 3 entries")
        for name, vec in (("allocation_short", o.allocation_short), ("allocation_long", o.allocation_long)):
            if len(vec) != 3:
                v.append(f"outcome: {name} must have 3 entries")
        for p in self.products:
            for s in self.suppliers:
                try:
                    vec = o.base_means[p.id][s]
                    if len(vec) != 3:
                        raise KeyError
                except KeyError:
                    v.append(f"outcome: base_means missing 3-vector for product {p.id}, supplier {s}")

        for name in self.policies:
            if not _policy_known(name, self.suppliers):
                v.append(f"unknown policy {name!r}")
        if self.bandit.prior_variance <= 0:
            v.append("bandit: prior_variance must be positive")
        if len(self.bandit.noise_variances) != 3 or any(
            x <= 0 for x in self.bandit.noise_variances
        ):
            v.append("bandit: noise_variances must be 3 positive values")
        if self.utility.theta_mode not in ("informed", "prior-draw"):
            v.append(f"utility: unknown theta_mode {self.utility.theta_mode!r}")
        if self.regret.mode not in ("pseudo", "realized"):
            v.append(f"regret: unknown mode {self.regret.mode!r}")
        return v


def _policy_known(name: str, suppliers: Sequence[int]) -> bool:
    if name in ("random", "static-utility", "bandit", "oracle"):
        return True
    if name.startswith("fixed-"):
        try:
            return int(name.split("-", 1)[1]) in suppliers
        except ValueError:
            return False
    return False


def _companion_spectral_radius(ar1: np.ndarray, ar2: np.ndarray) -> float:
    top = np.hstack([ar1, ar2])
    bottom = np.hstack([np.eye(3), np.zeros((3, 3))])
    return float(np.abs(np.linalg.eigvals(np.vstack([top, bottom]))).max())


def load_config(path: str | Path) -> ExperimentConfig:
    """Load, default, and validate a config file (or the packaged preset name)."""
    text = _read_config_text(path)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigParseError(f"config root must be a mapping, got {type(data).__name__}")
    try:
        config = ExperimentConfig.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"malformed config {path}: {exc}") from exc
    violations = config.validate()
    if violations:
        raise ConfigValidationError(violations)
    return config


def _read_config_text(path: str | Path) -> str:
    name = str(path)
    if name in ("paper-s5", "paper_s5"):
        resource = importlib.resources.files("procsim.presets").joinpath("paper_s5.yaml")
        return resource.read_text(encoding="utf-8")
    p = Path(path)
    if not p.exists():
        raise ConfigParseError(f"config file not found: {path}")
    return p.read_text(encoding="utf-8")


# -- per-run construction --------------------------------------------------------


def _build_outcome_model(config: ExperimentConfig) -> OutcomeModel:
    o = config.outcome
    ar1, ar2 = o.ar1(), o.ar2()
    transfer = np.eye(3) - ar1 - ar2
    cov = np.asarray(o.noise_covariance, dtype=float)
    loading = np.asarray(o.harmonic_loading, dtype=float)
    alloc_short = np.asarray(o.allocation_short, dtype=float)
    alloc_long = np.asarray(o.allocation_long, dtype=float)
    pairs: dict[tuple[int, int], OutcomePairParams] = {}
    for p in config.products:
        for s in config.suppliers:
            base = np.asarray(o.base_means[p.id][s], dtype=float)
            sign = o.supplier_harmonic_sign.get(s, 1.0)
            pairs[(p.id, s)] = OutcomePairParams(
                intercept=transfer @ base,
                harmonic_loading=sign * loading,
                ar1=ar1,
                ar2=ar2,
                ma1=None,
                ma2=None,
                alloc_short=alloc_short,
                alloc_long=alloc_long,
                noise_cov=cov,
            )
    return OutcomeModel(
        pairs,
        harmonic=HarmonicSignal(1.0, o.harmonic_period, o.harmonic_phase),
        short_window=o.short_window,
        long_window=o.long_window,
    )


def _build_requisition_model(
    config: ExperimentConfig, stop_intercept: float
) -> RequisitionModel:
    d = config.demand
    stop_spec = FeatureSpec(
        "stop",
        (
            FeatureBinding.make("requisition_size_sq", d.stop.size_coefficient),
            FeatureBinding.make(
                "requisition_cost_saturation",
                d.stop.cost_coefficient,
                threshold=d.stop.cost_threshold,
                saturation=d.stop.cost_saturation,
            ),
        ),
    )
    return RequisitionModel(
        products=tuple(p.id for p in config.products),
        baseline_costs={p.id: p.baseline_cost for p in config.products},
        stop=StopModel(intercept=stop_intercept, features=stop_spec),
        choice=ProductChoiceModel(utility_noise_std=d.product_utility_noise_std),
        quantity=QuantityModel(
            base_means={p.id: p.quantity_mean for p in config.products},
            dispersion=d.quantity_dispersion,
        ),
        mode_local_rate=d.mode_local_rate,
        urgency_rate=d.urgency_rate,
        cost_mode=d.stop.cost_mode,
    )


def _build_policy(
    name: str,
    config: ExperimentConfig,
    rs: RandomSource,
    outcome_model: OutcomeModel,
    ledger: HistoryLedger,
) -> Policy:
    weights = np.asarray(config.weights, dtype=float)
    products = [p.id for p in config.products]
    if name.startswith("fixed-"):
        return FixedPolicy(int(name.split("-", 1)[1]))
    if name == "random":
        return RandomPolicy(rs.stream("policy:random"))
    if name == "static-utility":
        if config.utility.theta_mode == "prior-draw":
            return StaticUtilityPolicy.from_prior_draw(
                products,
                config.suppliers,
                weights,
                config.bandit.prior_variance,
                rs.stream("policy:static-utility"),
            )
        return StaticUtilityPolicy.from_outcome_model(
            outcome_model, products, config.suppliers, weights
        )
    if name == "bandit":
        return ThompsonBandit(
            products,
            config.suppliers,
            weights,
            rs.stream("policy:bandit"),
            prior_variance=config.bandit.prior_variance,
            noise_variances=tuple(config.bandit.noise_variances),
        )
    if name == "oracle":
        return OraclePolicy(outcome_model, ledger, weights)
    raise ValueError(f"unknown policy {name!r}")


def build_engine(
    config: ExperimentConfig,
    rs: RandomSource,
    policy_name: str,
    keep_event_log: bool = False,
) -> SimulationEngine:
    """Wire one replication run: ledger, models, policy, engine.

    The demand-setup stream is consumed in a fixed order (site frailties,
    then the stop intercept) so every policy sees the same realization.
    """
    ledger = HistoryLedger()
    env = FeatureEnvironment(ledger=ledger, horizon=float(config.horizon_days))
    site_ids = tuple(range(1, config.sites + 1))

    setup = rs.stream("demand-setup")
    rate = config.demand.rate
    intensity = IntensityModel(
        baseline=ConstantRate(rate),
        bound=ConstantRate(rate),
        frailty_variance=config.demand.frailty_variance,
    )
    intensity.draw_frailties(site_ids, setup)
    stop_intercept = config.demand.stop.intercept_mean + (
        config.demand.stop.intercept_std * float(setup.standard_normal())
    )

    requisition_model = _build_requisition_model(config, stop_intercept)
    outcome_model = _build_outcome_model(config)
    operations = OperationsModels(
        order=OrderPropensityModel(
            mode=config.order.mode, low=config.order.low, high=config.order.high
        ),
        outcome=outcome_model,
        lead_rule=LeadTimeRule(config.lead.usd_per_day, config.lead.floor_days),
        suppliers=tuple(config.suppliers),
        weights=np.asarray(config.weights, dtype=float),
        context_signal=HarmonicSignal(
            1.0, config.outcome.harmonic_period, config.outcome.harmonic_phase
        ),
        realized_regret=(config.regret.mode == "realized"),
    )
    policy = _build_policy(policy_name, config, rs, outcome_model, ledger)
    return SimulationEngine(
        horizon=config.horizon_days,
        site_ids=site_ids,
        intensity=intensity,
        requisition_model=requisition_model,
        operations=operations,
        env=env,
        policy=policy,
        random_source=rs,
        keep_event_log=keep_event_log,
    )


def run_single(
    config: ExperimentConfig,
    replication: int,
    policy_name: str,
    keep_event_log: bool = False,
) -> RunResult:
    """Run one (replication, policy) simulation and return its full artifacts."""
    rs = RandomSource(config.seed, replication)
    return build_engine(config, rs, policy_name, keep_event_log).run()


# -- experiment runner -----------------------------------------------------------


@dataclass
class _RunRow:
    terminal: float
    daily: np.ndarray
    requisition_hash: str
    n_requisitions: int
    event_log: list[str] | None = None


@dataclass
class ReportBundle:
    policies: list[str]
    replications: int
    horizon: int
    master_seed: int
    terminal: dict[tuple[str, int], float]
    daily: dict[tuple[str, int], np.ndarray]
    requisition_hashes: dict[int, str]
    n_requisitions: dict[int, int]
    config_echo: dict
    event_logs: dict[tuple[str, int], list[str]] = field(default_factory=dict)

    def seeds(self) -> list[list[int]]:
        return [[self.master_seed, r] for r in range(self.replications)]

    def terminal_by_policy(self, policy: str) -> np.ndarray:
        return np.array([self.terminal[(policy, r)] for r in range(self.replications)])

    def statistics(self) -> dict[str, dict[str, float]]:
        stats = {}
        for policy in self.policies:
            values = self.terminal_by_policy(policy)
            q1, q3 = np.percentile(values, [25.0, 75.0])
            stats[policy] = {
                "mean": float(values.mean()),
                "median": float(np.median(values)),
                "q1": float(q1),
                "q3": float(q3),
                "iqr": float(q3 - q1),
            }
        return stats


def _run_replication(
    config: ExperimentConfig,
    replication: int,
    policy_names: Sequence[str],
    keep_event_log: bool = False,
) -> tuple[int, dict[str, _RunRow]]:
    rows: dict[str, _RunRow] = {}
    first_hash: str | None = None
    for name in policy_names:
        try:
            result = run_single(config, replication, name, keep_event_log)
        except Exception as exc:
            raise RuntimeError(
                f"replication {replication} failed under policy {name!r} "
                f"(master seed {config.seed}); replay with run_single("
                f"config, {replication}, {name!r})"
            ) from exc
        if first_hash is None:
            first_hash = result.requisition_hash
        elif result.requisition_hash != first_hash:
            raise RuntimeError(
                f"replication {replication}: requisition stream diverged across "
                f"policies (common-random-numbers breach under {name!r})"
            )
        rows[name] = _RunRow(
            terminal=result.terminal_regret,
            daily=result.daily_cumulative_regret(),
            requisition_hash=result.requisition_hash,
            n_requisitions=result.n_requisitions,
            event_log=result.event_log,
        )
    return replication, rows


def run_experiment(
    config: ExperimentConfig,
    policies: Sequence[str] | None = None,
    replications: int | None = None,
    jobs: int = 1,
    event_log: bool = False,
) -> ReportBundle:
    """Simulate every policy on common demand streams for each replication."""
    policy_names = list(policies) if policies is not None else list(config.policies)
    for name in policy_names:
        if not _policy_known(name, config.suppliers):
            raise ConfigValidationError([f"unknown policy {name!r}"])
    m = int(replications) if replications is not None else config.replications
    if m < 1:
        raise ConfigValidationError([f"replications must be >= 1, got {m}"])

    results: dict[int, dict[str, _RunRow]] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_replication, config, r, policy_names, event_log)
                for r in range(m)
            ]
            for future in futures:
                replication, rows = future.result()
                results[replication] = rows
    else:
        for r in range(m):
            replication, rows = _run_replication(config, r, policy_names, event_log)
            results[replication] = rows

    bundle = ReportBundle(
        policies=policy_names,
        replications=m,
        horizon=config.horizon_days,
        master_seed=config.seed,
        terminal={},
        daily={},
        requisition_hashes={},
        n_requisitions={},
        config_echo=dict(config.raw),
    )
    for r in sorted(results):
        rows = results[r]
        bundle.requisition_hashes[r] = rows[policy_names[0]].requisition_hash
        bundle.n_requisitions[r] = rows[policy_names[0]].n_requisitions
        for name in policy_names:
            row = rows[name]
            bundle.terminal[(name, r)] = row.terminal
            bundle.daily[(name, r)] = row.daily
            if row.event_log is not None:
                bundle.event_logs[(name, r)] = row.event_log
    return bundle


# -- report writing ----------------------------------------------------------------


def write_reports(bundle: ReportBundle, out_dir: str | Path) -> list[Path]:
    """Write terminal.csv, daily.csv, and summary.json (LF, '.' decimals)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    terminal_path = out / "terminal.csv"
    with terminal_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["policy", "replication", "regret"])
        for policy in bundle.policies:
            for r in range(bundle.replications):
                writer.writerow([policy, r, repr(bundle.terminal[(policy, r)])])
    written.append(terminal_path)

    daily_path = out / "daily.csv"
    with daily_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["policy", "replication", "day", "cumulative_regret"])
        for policy in bundle.policies:
            for r in range(bundle.replications):
                daily = bundle.daily[(policy, r)]
                for day in range(1, bundle.horizon + 1):
                    writer.writerow([policy, r, day, repr(float(daily[day - 1]))])
    written.append(daily_path)

    summary_path = out / "summary.json"
    summary = {
        "master_seed": bundle.master_seed,
        "replications": bundle.replications,
        "horizon_days": bundle.horizon,
        "policies": bundle.policies,
        "seeds": bundle.seeds(),
        "requisition_hashes": {str(r): h for r, h in bundle.requisition_hashes.items()},
        "n_requisitions": {str(r): n for r, n in bundle.n_requisitions.items()},
        "statistics": bundle.statistics(),
        "config": bundle.config_echo,
    }
    with summary_path.open("w", encoding="utf-8", newline="") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    written.append(summary_path)

    for (policy, r), lines in sorted(bundle.event_logs.items()):
        log_dir = out / "events"
        log_dir.mkdir(exist_ok=True)
        log_path = log_dir / f"{policy}-r{r}.jsonl"
        with log_path.open("w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines))
            if lines:
                fh.write("\n")
        written.append(log_path)
    return written


def summarize_terminal_rows(path: str | Path) -> dict[str, dict[str, float]]:
    """Recompute per-policy statistics from a terminal.csv file."""
    by_policy: dict[str, list[float]] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            by_policy.setdefault(row["policy"], []).append(float(row["regret"]))
    stats = {}
    for policy, values_list in by_policy.items():
        values = np.array(values_list)
        q1, q3 = np.percentile(values, [25.0, 75.0])
        stats[policy] = {
            "mean": float(values.mean()),
            "median": float(np.median(values)),
            "q1": float(q1),
            "q3": float(q3),
            "iqr": float(q3 - q1),
        }
    return stats
