"""Method composition, seeded sweeps and CSV output."""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import centralized_allocate, hraim_allocate, no_relay_allocate, raa_allocate
from .channel import ChannelGains
from .errors import ConfigError, PlatoonShareError
from .linkmodel import Allocation, LinkBudgetParams, validate_allocation, STRUCTURAL_CODES
from .metrics import MetricsReport, compute_metrics
from .rspu import run_rspu
from .scenario import ScenarioConfig, build_scenario
from .tmpg import run_tmpg

FORMAT_VERSION = 1

# method -> (groupcast allocator, unicast allocator or None)
METHODS = {
    "proposed": ("tmpg", "rspu"),
    "cen-raa": ("centralized", "raa"),
    "cen-hraim": ("centralized", "hraim"),
    "norelay-raa": ("norelay", "raa"),
    "norelay-hraim": ("norelay", "hraim"),
    "tmpg": ("tmpg", None),
    "centralized": ("centralized", None),
    "norelay": ("norelay", None),
}
DEFAULT_METHODS = ("proposed", "cen-raa", "cen-hraim", "norelay-raa", "norelay-hraim")
DEFAULT_SWEEP = tuple(range(15, 56, 5))


@dataclass
class RunOutcome:
    method: str
    allocation: Allocation | None
    report: MetricsReport | None
    status: str = "ok"
    violations: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _groupcast(kind, scenario, gains, params, trace):
    if kind == "tmpg":
        res = run_tmpg(scenario, gains, params, trace=trace)
        return res, res.allocation, res.trace
    if kind == "centralized":
        alloc, _ = centralized_allocate(scenario, gains, params)
        return alloc, alloc, []
    return None, no_relay_allocate(scenario, gains, params), []


def _unicast(kind, scenario, gains, params, rng, gc_result, gc_alloc, trace):
    if kind is None:
        return Allocation(), []
    if kind == "rspu":
        res = run_rspu(scenario, gains, gc_result, params, rng, trace=trace)
        return res.allocation, res.trace
    if kind == "hraim":
        return hraim_allocate(scenario, gains, gc_alloc, params), []
    return raa_allocate(scenario, gains, gc_alloc, params, rng), []


def run_method(method: str, scenario, params: LinkBudgetParams | None = None, rng=None,
               gains: ChannelGains | None = None, trace=False) -> RunOutcome:
    """Compose the groupcast and unicast allocators of ``method``, validate and measure.

    Allocator errors come back as a failed outcome rather than an exception.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
    params = params or LinkBudgetParams()
    rng = np.random.default_rng(0) if rng is None else rng
    gains = gains or ChannelGains.from_scenario(scenario)
    g_kind, u_kind = METHODS[method]
    try:
        gc_result, gc_alloc, g_trace = _groupcast(g_kind, scenario, gains, params, trace)
        uc_alloc, u_trace = _unicast(u_kind, scenario, gains, params, rng, gc_result, gc_alloc, trace)
    except PlatoonShareError as exc:
        return RunOutcome(method, None, None, status=f"failed:{type(exc).__name__}", trace=[str(exc)])
    alloc = gc_alloc.merge(uc_alloc)
    violations = validate_allocation(alloc, scenario, gains, params)
    report = compute_metrics(alloc, scenario, gains, params)
    return RunOutcome(method, alloc, report, violations=violations, trace=g_trace + u_trace)


def method_rng(seed: int, pv_count: int, method: str) -> np.random.Generator:
    return np.random.default_rng([seed, pv_count, zlib.crc32(method.encode())])


@dataclass
class ExperimentPlan:
    methods: tuple = DEFAULT_METHODS
    sweep: tuple = DEFAULT_SWEEP
    seeds: tuple = tuple(range(20))
    params: LinkBudgetParams = field(default_factory=LinkBudgetParams)
    scenario_template: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.sweep = tuple(int(v) for v in self.sweep)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.validate()

    def validate(self):
        if not self.seeds:
            raise ConfigError("a plan needs at least one seed")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        M = self.scenario_template.num_platoons
        for pv in self.sweep:
            if pv % M or pv // M < 2:
                raise ConfigError(f"{pv} vehicles do not split into {M} equal platoons of at least 2")

    def scenario_config(self, pv_count: int, seed: int) -> ScenarioConfig:
        M = self.scenario_template.num_platoons
        return replace(self.scenario_template, platoon_sizes=(pv_count // M,) * M, rng_seed=seed)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "methods": list(self.methods),
            "sweep": list(self.sweep),
            "seeds": list(self.seeds),
            "params": self.params.to_dict(),
            "scenario": self.scenario_template.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise ConfigError(f"unsupported plan format_version {version!r} (expected {FORMAT_VERSION})")
        known = {"format_version", "methods", "sweep", "seeds", "params", "scenario"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown plan keys: {sorted(unknown)}")
        kw = {}
        for key in ("methods", "sweep", "seeds"):
            if key in data:
                kw[key] = tuple(data[key])
        try:
            if "params" in data:
                kw["params"] = LinkBudgetParams(**data["params"])
            if "scenario" in data:
                kw["scenario_template"] = ScenarioConfig.from_dict(data["scenario"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read plan {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)


@dataclass
class SweepRow:
    method: str
    pv_count: int
    seed: int
    status: str
    report: MetricsReport | None
    structural_violations: int = 0
    qos_violations: int = 0


@dataclass
class SweepResult:
    rows: list

    def aggregate(self) -> list[dict]:
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r.method, r.pv_count), []).append(r)
        out = []
        for (method, pv), rows in sorted(groups.items()):
            ok = [r for r in rows if r.report is not None]
            rec = {"method": method, "pv_count": pv, "n_ok": len(ok), "n_failed": len(rows) - len(ok)}
            for col in MetricsReport.columns():
                vals = np.array([getattr(r.report, col) for r in ok], dtype=float)
                if len(vals):
                    rec[f"{col}_mean"] = float(np.mean(vals))
                    rec[f"{col}_std"] = float(np.std(vals))
                else:
                    rec[f"{col}_mean"] = rec[f"{col}_std"] = math.nan
            out.append(rec)
        return out

    def select(self, method=None, pv_count=None):
        return [r for r in self.rows if (method is None or r.method == method)
                and (pv_count is None or r.pv_count == pv_count)]


def run_sweep(plan: ExperimentPlan, progress=None) -> SweepResult:
    rows = []
    for pv in plan.sweep:
        for seed in plan.seeds:
            scenario = build_scenario(plan.scenario_config(pv, seed))
            gains = ChannelGains.from_scenario(scenario)
            for method in plan.methods:
                out = run_method(method, scenario, plan.params, method_rng(seed, pv, method), gains)
                structural = sum(v.code in STRUCTURAL_CODES for v in out.violations)
                rows.append(SweepRow(method, pv, seed, out.status, out.report, structural,
                                     len(out.violations) - structural))
            if progress:
                progress(pv, seed)
    rows.sort(key=lambda r: (r.method, r.pv_count, r.seed))
    return SweepResult(rows)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.6g" % v


RAW_COLUMNS = ["method", "pv_count", "seed", "status", "structural_violations", "qos_violations"] + MetricsReport.columns()
AGG_COLUMNS = ["method", "pv_count", "seed", "n_ok", "n_failed"] + [
    f"{c}_{s}" for c in MetricsReport.columns() for s in ("mean", "std")
]


def raw_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_COLUMNS)
    for r in result.rows:
        metrics = [_fmt(v) for v in r.report.row()] if r.report else [""] * len(MetricsReport.columns())
        w.writerow([r.method, r.pv_count, r.seed, r.status, r.structural_violations, r.qos_violations] + metrics)
    return buf.getvalue()


def aggregate_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_COLUMNS)
    for rec in result.aggregate():
        w.writerow([rec["method"], rec["pv_count"], "AGG", rec["n_ok"], rec["n_failed"]]
                   + [_fmt(rec[c]) for c in AGG_COLUMNS[5:]])
    return buf.getvalue()


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_csv(result: SweepResult, path) -> tuple[Path, Path]:
    """Write the aggregate CSV at ``path`` and the per-seed rows next to it (``*_raw.csv``)."""
    path = Path(path)
    raw_path = path.with_name(path.stem + "_raw" + path.suffix)
    return _write(path, aggregate_csv(result)), _write(raw_path, raw_csv(result))


def emit_trace(outcome: RunOutcome, path) -> Path:
    return _write(path, "\n".join(outcome.trace) + ("\n" if outcome.trace else ""))


def read_aggregate_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
