"""Acceptance battery: ten numbered criteria, one test and one result line each.

Structural checks are exact integer comparisons; numeric checks carry their
stated tolerance; the statistical checks are directional (orderings and CCD
dominance), not point reproductions.  Criterion 4 is expected to fail: the
attribute-rewrite synthesis pipeline and direct forcible-escape synthesis
produce different realizations on the two-node system (see the strict xfail
below for the observed divergence).
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from batteries import run_lp_lattice_battery, run_modular_battery, run_oracle_battery
from conftest import triangle_case
from oracles import bounded_language_equal

from desgrid.automata import ComponentKind, build_component, parallel_compose
from desgrid.cascade import ScenarioConfig, export_trace_csv, export_trace_summary, run_cascade
from desgrid.experiments import MonteCarloConfig, export_results, run_monte_carlo
from desgrid.grid import balance_case, compute_ptdf, dc_power_flow, load_case, repair_ratings
from desgrid.modular import (
    ComponentRegistry,
    all_tripped,
    build_node_supervisors,
    build_specification,
    build_subsystem,
    demo_two_node_case,
    synthesize_modular,
)


@pytest.fixture(scope="module")
def heavy30():
    case = load_case("case30")
    return case.with_loads(case.loads * 1.4)


@pytest.fixture(scope="module")
def heavy30_ctrl(heavy30):
    return build_node_supervisors(heavy30)


@pytest.fixture(scope="module")
def big300():
    return repair_ratings(load_case("case300"), alpha=1.2)


@pytest.fixture(scope="module")
def big300_ctrl(big300):
    return build_node_supervisors(big300)


def test_criterion_01_two_node_worked_example():
    t0 = time.monotonic()
    case = demo_two_node_case()
    reg = ComponentRegistry.from_case(case)
    comps = reg.all_components()
    assert len(comps) == 5  # one generator, one load, three lines
    for comp in comps:
        a = build_component(comp)
        assert a.n_states == 2
        assert len(a.alphabet) == 3
    table = reg.full_table()
    gen = build_component(ComponentKind("generator", 1), table)
    load = build_component(ComponentKind("load", 1), table)
    assert parallel_compose(gen, load).n_states == 4
    sub, plant = build_subsystem(case, 1)
    assert len(sub.members) == 5
    assert plant.n_states == 32
    sa = build_specification(plant)
    assert sa.spec.n_states == 31
    missing = set(plant.state_labels) - set(sa.spec.state_labels)
    assert len(missing) == 1 and all_tripped(next(iter(missing)))
    sup = synthesize_modular(plant, sa, node=1, subsystem=sub, method="pipeline")
    assert sup.realization.realization.n_states == 31
    assert sup.realization.removed_states == ()
    dt = time.monotonic() - t0
    assert dt < 1.0
    print(f"PASS criterion 1: components 2x3, product 4, sub-system 32 -> spec 31 "
          f"-> synthesis 31 ({dt:.2f}s)")


def test_criterion_02_synthesis_vs_brute_force():
    t0 = time.monotonic()
    n = run_oracle_battery(500, seed=501)
    dt = time.monotonic() - t0
    assert n == 500
    assert dt < 120.0
    print(f"PASS criterion 2: {n} random plants, synthesis equals subset search ({dt:.1f}s)")


def test_criterion_03_conjunction_equals_composed_realizations():
    t0 = time.monotonic()
    checked, skipped = run_modular_battery(100, seed=73)
    dt = time.monotonic() - t0
    assert checked == 100
    assert dt < 300.0
    print(f"PASS criterion 3: {checked} modular systems, closed loop equals "
          f"composed form and stays in spec ({skipped} degenerate draws skipped, {dt:.1f}s)")


@pytest.mark.xfail(
    strict=True,
    reason="attribute-rewrite synthesis keeps all 31 two-node spec states while direct "
    "forcible-escape synthesis prunes to 24: rewriting load-wipe and line-trip events as "
    "controllable assumes every threatened state has a shed or redispatch answer, but the "
    "line-only-normal states have none, so the two routes realize different languages "
    "(e.g. a1 e1 k1 k2 is pipeline-admissible only)",
)
def test_criterion_04_pipeline_equals_forcible_synthesis():
    case = demo_two_node_case()
    sub, plant = build_subsystem(case, 1)
    sa = build_specification(plant)
    pipe = synthesize_modular(plant, sa, node=1, subsystem=sub, method="pipeline")
    strict = synthesize_modular(plant, sa, node=1, subsystem=sub, method="forcible")
    a = pipe.realization.realization
    b = strict.realization.realization
    assert a.n_states == b.n_states, f"pipeline {a.n_states} vs forcible {b.n_states}"
    assert bounded_language_equal(a, b, 8)
    # the same comparison over every 30-bus node sub-system small enough to
    # materialize; unreachable while the two-node counts above disagree
    c30 = load_case("case30")
    reg = ComponentRegistry.from_case(c30)
    for node in c30.bus_ids:
        try:
            sub_j, plant_j = build_subsystem(c30, int(node), reg, max_states=2**12)
        except Exception:
            continue
        sa_j = build_specification(plant_j)
        p = synthesize_modular(plant_j, sa_j, node=int(node), subsystem=sub_j, method="pipeline")
        f = synthesize_modular(plant_j, sa_j, node=int(node), subsystem=sub_j, method="forcible")
        assert p.realization.realization.n_states == f.realization.realization.n_states


def test_criterion_05_power_flow_numerics():
    t0 = time.monotonic()
    tri = triangle_case()
    sol = dc_power_flow(tri)
    assert np.max(np.abs(sol.flows_mw - np.array([30.0, 60.0, 30.0]))) <= 1e-9

    worst_resid = 0.0
    for name in ("case30", "case118", "case300"):
        case, _ = balance_case(load_case(name))
        s = dc_power_flow(case)
        idx = case.bus_index
        net = s.injections_mw.copy()
        for k in range(case.n_branch):
            if case.br_status[k]:
                net[idx[int(case.br_from[k])]] -= s.flows_mw[k]
                net[idx[int(case.br_to[k])]] += s.flows_mw[k]
        worst_resid = max(worst_resid, float(np.max(np.abs(net))))
    assert worst_resid <= 1e-9

    worst_fd = 0.0
    for name, buses in (("case30", (7, 19, 30)), ("case118", (12, 60, 117))):
        case, _ = balance_case(load_case(name))
        base = dc_power_flow(case)
        ptdf = compute_ptdf(case)
        for b in buses:
            inj = base.injections_mw.copy()
            inj[case.bus_index[b]] += 1.0
            inj[case.bus_index[ptdf.slack_bus]] -= 1.0
            diff = dc_power_flow(case, inj).flows_mw - base.flows_mw
            worst_fd = max(worst_fd, float(np.max(np.abs(diff - ptdf.column(b)))))
    assert worst_fd <= 1e-6
    dt = time.monotonic() - t0
    print(f"PASS criterion 5: triangle exact, conservation {worst_resid:.1e} <= 1e-9, "
          f"PTDF vs finite difference {worst_fd:.1e} <= 1e-6 ({dt:.1f}s)")


def test_criterion_06_lp_vs_grid_search():
    t0 = time.monotonic()
    checked, worst = run_lp_lattice_battery(50, seed=99)
    dt = time.monotonic() - t0
    assert checked >= 50
    assert worst <= 1.0 + 1e-6
    assert dt < 60.0
    print(f"PASS criterion 6: {checked} neighborhoods, worst lattice gap "
          f"{worst:.3f} MW <= 1 MW ({dt:.1f}s)")


def test_criterion_07_directional_scenarios(heavy30, heavy30_ctrl, big300, big300_ctrl):
    lines = []
    for tag, case, ctrl, pair in (
        ("case30 x1.4", heavy30, heavy30_ctrl, (34, 37)),
        ("case300 a1.2", big300, big300_ctrl, (23, 39)),
    ):
        row = {}
        for mode in ("none", "modular"):
            t0 = time.monotonic()
            tr = run_cascade(
                case,
                ScenarioConfig(initial_outage=pair, control_mode=mode),
                controllers=ctrl if mode == "modular" else None,
            )
            dt = time.monotonic() - t0
            assert dt < 10.0, f"{tag} {mode} scenario took {dt:.1f}s"
            s = tr.summary()
            row[mode] = (s["mw_lost_total"], s["line_trip_count"])
        assert row["modular"][0] < row["none"][0], (tag, row)
        assert row["modular"][1] < row["none"][1], (tag, row)
        lines.append(f"{tag} {pair}: none {row['none']} -> modular {row['modular']}")
    print("PASS criterion 7: " + "; ".join(lines))


def test_criterion_08_monte_carlo_ordering():
    t0 = time.monotonic()
    qs = np.linspace(0.5, 1.0, 11)
    lines = []
    for cfg in (
        MonteCarloConfig(case="case30", n_scenarios=200, seed=2026, load_scale=1.35),
        MonteCarloConfig(case="case118", n_scenarios=200, seed=2026, rating_alpha=1.4),
    ):
        agg = run_monte_carlo(cfg)
        med = {m: agg.medians[m] for m in agg.modes}
        assert med["none"] >= med["modular"] >= med["central"], (cfg.case_name, med)
        ln = np.asarray(agg.losses("none"))
        lm = np.asarray(agg.losses("modular"))
        gaps = np.quantile(ln, qs) - np.quantile(lm, qs)
        assert np.all(gaps >= -1e-9), (cfg.case_name, list(zip(qs, gaps)))
        lines.append(
            f"{cfg.case_name} medians {med['none']:.1f}/{med['modular']:.1f}/"
            f"{med['central']:.1f}, min CCD margin {gaps.min():.1f} MW"
        )
    dt = time.monotonic() - t0
    assert dt < 900.0
    print(f"PASS criterion 8: {'; '.join(lines)} ({dt:.0f}s)")


def test_criterion_09_delay_degradation(heavy30, heavy30_ctrl):
    losses = []
    for d in (0, 1, 2):
        tr = run_cascade(
            heavy30,
            ScenarioConfig(initial_outage=(34, 37), control_mode="modular", delay_ticks=d),
            controllers=heavy30_ctrl,
        )
        losses.append(tr.summary()["mw_lost_total"])
    assert losses == sorted(losses), losses
    print(f"PASS criterion 9: delay 0/1/2 -> {losses} MW, non-decreasing")


def test_criterion_10_deterministic_exports(tmp_path, heavy30, heavy30_ctrl):
    cfg = MonteCarloConfig(
        case="case30", n_scenarios=5, seed=2026, load_scale=1.35, modes=("none", "modular"),
    )
    first = export_results(run_monte_carlo(cfg), tmp_path / "a")
    second = export_results(run_monte_carlo(cfg), tmp_path / "b")
    assert [p.name for p in first] == [p.name for p in second]
    for pa, pb in zip(first, second):
        assert pa.read_bytes() == pb.read_bytes(), pa.name

    scn = ScenarioConfig(initial_outage=(34, 37), control_mode="modular")
    for sub in ("t1", "t2"):
        d = tmp_path / sub
        d.mkdir()
        tr = run_cascade(heavy30, scn, controllers=heavy30_ctrl)
        export_trace_csv(tr, d / "trace.csv")
        export_trace_summary(tr, d / "trace_summary.json")
    for fname in ("trace.csv", "trace_summary.json"):
        assert (tmp_path / "t1" / fname).read_bytes() == (tmp_path / "t2" / fname).read_bytes()
    print(f"PASS criterion 10: {len(first)} batch files and both trace exports byte-identical")
