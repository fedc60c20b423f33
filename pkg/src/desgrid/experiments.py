"""Monte Carlo scenario sampling, batch execution and aggregation.

Scenario streams come from numpy's PCG64 generator seeded by the config, so
a (case, config) pair fixes every exported byte.  Results are merged in
scenario-id order, which keeps the output independent of the worker count
and of execution order.
"""
from __future__ import annotations

import concurrent.futures
import json
import statistics
from bisect import bisect_left
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cascade import MODES, ScenarioConfig, run_cascade
from .grid import GridCase, load_case, repair_ratings
from .modular import ConjunctionController, build_node_supervisors


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class MonteCarloConfig:
    """Batch description: which case, how many draws, which control modes.

    ``load_scale`` is a uniform stress factor applied to the case before any
    sampling; ``rating_alpha`` repairs missing branch ratings (required for
    case data shipped without them).  Both are configuration, not part of
    the sampled randomness.
    """

    case: str | GridCase
    n_scenarios: int
    seed: int
    sigma: float = 0.15
    modes: tuple[str, ...] = ("none", "modular", "central")
    delay_ticks: int = 0
    max_ticks: int = 60
    trip_mode: str = "all"
    threat_threshold: float = 1.0
    load_scale: float = 1.0
    rating_alpha: float | None = None
    rating_floor: float = 10.0
    workers: int = 1

    @property
    def case_name(self) -> str:
        return self.case if isinstance(self.case, str) else self.case.name

    def validate(self) -> None:
        if self.n_scenarios < 1:
            raise ExperimentError("n_scenarios must be >= 1")
        if self.sigma < 0:
            raise ExperimentError("sigma must be >= 0")
        if self.seed < 0:
            raise ExperimentError("seed must be a non-negative integer")
        if not self.modes:
            raise ExperimentError("modes must be non-empty")
        for m in self.modes:
            if m not in MODES:
                raise ExperimentError(f"unknown mode {m!r}; expected one of {MODES}")
        if len(set(self.modes)) != len(self.modes):
            raise ExperimentError("modes must be distinct")
        if self.load_scale <= 0:
            raise ExperimentError("load_scale must be positive")
        if self.workers < 1:
            raise ExperimentError("workers must be >= 1")


def prepare_case(config: MonteCarloConfig) -> GridCase:
    """Load, repair ratings if requested, and apply the uniform load scale."""
    case = load_case(config.case) if isinstance(config.case, str) else config.case
    if config.rating_alpha is not None:
        case = repair_ratings(case, alpha=config.rating_alpha, floor_mw=config.rating_floor)
    unrated = [
        k + 1 for k in range(case.n_branch) if case.br_status[k] and case.br_rating[k] <= 0
    ]
    if unrated:
        raise ExperimentError(
            f"case {case.name}: branches {unrated[:5]} have no rating; set rating_alpha"
        )
    if config.load_scale != 1.0:
        case = case.with_loads(case.loads * config.load_scale)
    return case


def sample_scenarios(config: MonteCarloConfig, case: GridCase) -> list[ScenarioConfig]:
    """Draw the deterministic scenario stream for a prepared case.

    Each draw is an unordered distinct pair of in-service branches, uniform
    over all such pairs, plus per-bus load multipliers max(0, 1 + N(0, sigma)).
    The control mode is left at "none"; callers substitute the mode per run.
    """
    config.validate()
    in_service = [k + 1 for k in range(case.n_branch) if case.br_status[k]]
    if len(in_service) < 2:
        raise ExperimentError("scenario sampling needs at least 2 in-service branches")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    out: list[ScenarioConfig] = []
    for _ in range(config.n_scenarios):
        i, j = rng.choice(len(in_service), size=2, replace=False)
        pair = tuple(sorted((in_service[int(i)], in_service[int(j)])))
        mult = np.maximum(0.0, 1.0 + rng.normal(0.0, config.sigma, case.n_bus))
        out.append(
            ScenarioConfig(
                initial_outage=pair,
                load_multipliers=mult,
                control_mode="none",
                delay_ticks=config.delay_ticks,
                max_ticks=config.max_ticks,
                trip_mode=config.trip_mode,
                threat_threshold=config.threat_threshold,
            )
        )
    return out


@dataclass(frozen=True)
class ScenarioResult:
    scenario_id: int
    mode: str
    pair: tuple[int, int]
    mw_lost_total: float
    mw_lost_rebalance: float
    mw_lost_control: float
    line_trips: int
    terminated: str
    failed: bool = False
    error: str = ""


@dataclass(frozen=True)
class AggregateResults:
    case_name: str
    seed: int
    n_scenarios: int
    modes: tuple[str, ...]
    results: dict[str, tuple[ScenarioResult, ...]]
    medians: dict[str, float | None]
    ccd_blackout: dict[str, tuple[tuple[float, float], ...]]
    ccd_trips: dict[str, tuple[tuple[float, float], ...]]

    def losses(self, mode: str) -> list[float]:
        return [r.mw_lost_total for r in self.results[mode] if not r.failed]

    def trip_counts(self, mode: str) -> list[int]:
        return [r.line_trips for r in self.results[mode] if not r.failed]


def compute_ccd(samples: Sequence[float]) -> list[tuple[float, float]]:
    """Complementary cumulative distribution at the sorted distinct samples."""
    vals = sorted(float(s) for s in samples)
    if not vals:
        raise ExperimentError("compute_ccd needs at least one sample")
    n = len(vals)
    return [(x, (n - bisect_left(vals, x)) / n) for x in sorted(set(vals))]


def _aggregate(
    case_name: str,
    seed: int,
    n_scenarios: int,
    modes: tuple[str, ...],
    rows: Iterable[ScenarioResult],
) -> AggregateResults:
    by_mode: dict[str, list[ScenarioResult]] = {m: [] for m in modes}
    for r in rows:
        by_mode[r.mode].append(r)
    results = {m: tuple(sorted(v, key=lambda r: r.scenario_id)) for m, v in by_mode.items()}
    medians: dict[str, float | None] = {}
    ccd_b: dict[str, tuple[tuple[float, float], ...]] = {}
    ccd_t: dict[str, tuple[tuple[float, float], ...]] = {}
    for m in modes:
        ok = [r for r in results[m] if not r.failed]
        medians[m] = statistics.median(r.mw_lost_total for r in ok) if ok else None
        ccd_b[m] = tuple(compute_ccd([r.mw_lost_total for r in ok])) if ok else ()
        ccd_t[m] = tuple(compute_ccd([r.line_trips for r in ok])) if ok else ()
    return AggregateResults(
        case_name=case_name,
        seed=seed,
        n_scenarios=n_scenarios,
        modes=modes,
        results=results,
        medians=medians,
        ccd_blackout=ccd_b,
        ccd_trips=ccd_t,
    )


def _run_one(
    case: GridCase,
    config: MonteCarloConfig,
    sample: ScenarioConfig,
    sid: int,
    controllers: ConjunctionController | None,
) -> list[ScenarioResult]:
    out: list[ScenarioResult] = []
    pair = tuple(int(b) for b in sample.initial_outage)
    for mode in config.modes:
        scn = replace(sample, control_mode=mode)
        try:
            tr = run_cascade(case, scn, controllers=controllers if mode == "modular" else None)
            out.append(
                ScenarioResult(
                    scenario_id=sid,
                    mode=mode,
                    pair=pair,
                    mw_lost_total=tr.mw_lost_total,
                    mw_lost_rebalance=tr.mw_lost_rebalance,
                    mw_lost_control=tr.mw_lost_control,
                    line_trips=tr.line_trip_count,
                    terminated=tr.terminated,
                )
            )
        except Exception as exc:  # per-scenario failures are recorded, not fatal
            out.append(
                ScenarioResult(
                    scenario_id=sid,
                    mode=mode,
                    pair=pair,
                    mw_lost_total=0.0,
                    mw_lost_rebalance=0.0,
                    mw_lost_control=0.0,
                    line_trips=0,
                    terminated="failed",
                    failed=True,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return out


_WORKER: dict = {}


def _worker_init(config: MonteCarloConfig) -> None:
    case = prepare_case(config)
    _WORKER["config"] = config
    _WORKER["case"] = case
    _WORKER["samples"] = sample_scenarios(config, case)
    _WORKER["controllers"] = (
        build_node_supervisors(case) if "modular" in config.modes else None
    )


def _worker_run(sid: int) -> list[ScenarioResult]:
    return _run_one(
        _WORKER["case"], _WORKER["config"], _WORKER["samples"][sid], sid, _WORKER["controllers"]
    )


def run_monte_carlo(
    config: MonteCarloConfig, scenario_ids: Sequence[int] | None = None
) -> AggregateResults:
    """Run every sampled scenario under every requested mode.

    ``scenario_ids`` restricts the batch to a subset of the stream (resume or
    split a long run); ids refer to positions in the full sampled stream so
    partial batches are merge-compatible via merge_results.
    """
    config.validate()
    case = prepare_case(config)
    samples = sample_scenarios(config, case)
    if scenario_ids is None:
        ids = list(range(config.n_scenarios))
    else:
        ids = sorted(set(int(i) for i in scenario_ids))
        if ids and (ids[0] < 0 or ids[-1] >= config.n_scenarios):
            raise ExperimentError(f"scenario ids out of range 0..{config.n_scenarios - 1}")
    rows: list[ScenarioResult] = []
    if config.workers == 1 or len(ids) <= 1:
        controllers = build_node_supervisors(case) if "modular" in config.modes else None
        for sid in ids:
            rows.extend(_run_one(case, config, samples[sid], sid, controllers))
    else:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=config.workers, initializer=_worker_init, initargs=(config,)
        ) as ex:
            for part in ex.map(_worker_run, ids):
                rows.extend(part)
    return _aggregate(config.case_name, config.seed, config.n_scenarios, config.modes, rows)


def merge_results(parts: Sequence[AggregateResults]) -> AggregateResults:
    """Re-aggregate partial batches produced with disjoint scenario_ids."""
    if not parts:
        raise ExperimentError("nothing to merge")
    head = parts[0]
    rows: list[ScenarioResult] = []
    seen: set[tuple[int, str]] = set()
    for p in parts:
        if (p.case_name, p.seed, p.n_scenarios, p.modes) != (
            head.case_name, head.seed, head.n_scenarios, head.modes,
        ):
            raise ExperimentError("merge parts disagree on case, seed, size or modes")
        for m in p.modes:
            for r in p.results[m]:
                key = (r.scenario_id, r.mode)
                if key in seen:
                    raise ExperimentError(f"duplicate scenario {key} across merge parts")
                seen.add(key)
                rows.append(r)
    return _aggregate(head.case_name, head.seed, head.n_scenarios, head.modes, rows)


def export_results(agg: AggregateResults, out_dir) -> list[Path]:
    """Write summary.json, scenarios.csv and per-mode CCD tables.

    Rerunning with identical inputs reproduces every file byte for byte.
    """
    if not agg.modes:
        raise ExperimentError("no modes to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []

    summary = {
        "case": agg.case_name,
        "seed": agg.seed,
        "n_scenarios": agg.n_scenarios,
        "modes": {
            m: {
                "median_mw_lost": None if agg.medians[m] is None else round(agg.medians[m], 6),
                "scenarios": len(agg.results[m]),
                "failed": sum(1 for r in agg.results[m] if r.failed),
            }
            for m in agg.modes
        },
    }
    p = out / "summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    files.append(p)

    p = out / "scenarios.csv"
    lines = ["scenario_id,mode,pair_a,pair_b,mw_lost_total,mw_lost_rebalance,"
             "mw_lost_control,line_trips,terminated,failed"]
    by_id: dict[int, dict[str, ScenarioResult]] = {}
    for m in agg.modes:
        for r in agg.results[m]:
            by_id.setdefault(r.scenario_id, {})[m] = r
    for sid in sorted(by_id):
        for m in agg.modes:
            r = by_id[sid].get(m)
            if r is None:
                continue
            lines.append(
                f"{r.scenario_id},{r.mode},{r.pair[0]},{r.pair[1]},"
                f"{r.mw_lost_total:.6f},{r.mw_lost_rebalance:.6f},"
                f"{r.mw_lost_control:.6f},{r.line_trips},{r.terminated},"
                f"{1 if r.failed else 0}"
            )
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    files.append(p)

    for m in agg.modes:
        p = out / f"ccd_blackout_{m}.csv"
        lines = ["mw_lost,fraction_ge"]
        lines += [f"{x:.6f},{f:.6f}" for x, f in agg.ccd_blackout[m]]
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        files.append(p)
        p = out / f"ccd_trips_{m}.csv"
        lines = ["line_trips,fraction_ge"]
        lines += [f"{x:.6f},{f:.6f}" for x, f in agg.ccd_trips[m]]
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        files.append(p)
    return files
