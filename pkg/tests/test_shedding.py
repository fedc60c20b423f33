"""Load-shed LP formulation, solver, oracle battery, and the central baseline."""
from __future__ import annotations

import numpy as np
import pytest

from desgrid.grid import (
    balance_case,
    build_adjacency,
    compute_ptdf,
    dc_power_flow,
    load_case,
)
from desgrid.shedding import (
    ShedError,
    ShedLP,
    ShedSolution,
    apply_control,
    central_emergency_control,
    export_redispatch_csv,
    export_sheds_csv,
    formulate_local_lp,
    neighborhood_branches,
    neighborhood_load_buses,
    select_critical_line,
    solve_lp,
)


from batteries import island_ptdf as _island_ptdf
from batteries import overloaded_snapshots as _snapshots
from batteries import run_lp_lattice_battery


# ------------------------------------------------------------ neighborhoods
def test_neighborhood_scope(two_node, case30):
    assert neighborhood_branches(two_node, 1) == (1, 2, 3)
    assert neighborhood_load_buses(two_node, 1) == (2,)  # bus 1 has no demand
    assert neighborhood_load_buses(two_node, 2) == (2,)
    with pytest.raises(ShedError, match="unknown node"):
        neighborhood_branches(case30, 999)
    # one hop only: neighborhood branches all touch the node or a neighbor
    adj_buses = {5} | {b for _, b in build_adjacency(case30)[5]}
    for bid in neighborhood_branches(case30, 5):
        k = bid - 1
        assert int(case30.br_from[k]) in adj_buses or int(case30.br_to[k]) in adj_buses


def test_select_critical_line_breaks_ties_low(two_node):
    sol = dc_power_flow(two_node)
    # three identical parallel lines: equal loading, least id wins
    assert select_critical_line(two_node, sol, (1, 2, 3)) == 1
    cut = two_node.with_branch_out([1])
    sol2 = dc_power_flow(cut)
    assert select_critical_line(cut, sol2, (1, 2, 3)) == 2
    with pytest.raises(ShedError, match="no in-service branch"):
        select_critical_line(cut, sol2, (1,))


# ------------------------------------------------------------ pinned LPs
def test_single_row_lp_exact():
    lp = ShedLP(
        node=2,
        buses=(2,),
        branch_ids=(1,),
        flow_rows=np.array([[-1.0]]),
        rhs=np.array([-20.0]),
        critical_row=0,
        bounds=np.array([60.0]),
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(20.0, abs=1e-9)
    assert sol.x[0] == pytest.approx(20.0, abs=1e-9)


def test_non_binding_margins_cost_nothing():
    lp = ShedLP(
        node=1,
        buses=(1, 2),
        branch_ids=(4,),
        flow_rows=np.array([[-1.0, -0.5]]),
        rhs=np.array([3.0]),
        critical_row=0,
        bounds=np.array([10.0, 10.0]),
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal" and sol.objective == 0.0
    assert np.all(sol.x == 0.0)


def test_unreachable_margin_is_infeasible():
    lp = ShedLP(
        node=1,
        buses=(1,),
        branch_ids=(1,),
        flow_rows=np.array([[-1.0]]),
        rhs=np.array([-50.0]),
        critical_row=0,
        bounds=np.array([10.0]),  # can never buy 50 MW of relief
    )
    sol = solve_lp(lp)
    assert sol.status == "infeasible"
    with pytest.raises(ShedError, match="status"):
        apply_control(load_case("case30"), sol)


def test_objective_must_match_shed_vector():
    with pytest.raises(ShedError, match="objective"):
        ShedSolution(buses=(1,), x=np.array([5.0]), objective=9.0, status="optimal")


def test_two_node_overload_shed_lands_on_rating(two_node):
    # lines 2 and 3 out: 60 MW through a 40 MW line, cheapest fix sheds 20
    case = two_node.with_branch_out([2, 3])
    sol0 = dc_power_flow(case)
    assert sol0.flows_mw[0] == pytest.approx(60.0)
    ptdf = compute_ptdf(case, slack=1)
    lp = formulate_local_lp(case, sol0, ptdf, 1, 1)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(20.0, abs=1e-6)
    after, shed = apply_control(case, sol)
    assert shed == pytest.approx(20.0, abs=1e-6)
    flow = dc_power_flow(after).flows_mw[0]
    assert flow == pytest.approx(after.br_rating[0], abs=1e-6)  # exactly at rating
    assert sol.redispatch is not None
    assert sol.redispatch.sum() == pytest.approx(-20.0, abs=1e-6)


def test_critical_line_outside_neighborhood_rejected(case30):
    case, _ = balance_case(case30)
    sol = dc_power_flow(case)
    ptdf = compute_ptdf(case)
    nb = neighborhood_branches(case, 30)
    outside = next(bid for bid in case.branch_ids if bid not in nb)
    with pytest.raises(ShedError, match="outside"):
        formulate_local_lp(case, sol, ptdf, 30, outside)


# ------------------------------------------------------------ oracle battery
def test_lp_matches_grid_search_on_small_neighborhoods():
    checked, worst = run_lp_lattice_battery(50, seed=99)
    assert checked >= 50
    assert worst <= 1.0 + 1e-6


def test_enlarging_margins_never_costs_more():
    import dataclasses

    seen = 0
    for case, sol, over in _snapshots(seed=31):
        k = over[0]
        node = int(case.br_from[k - 1])
        cache = {}
        ptdf = _island_ptdf(case, node, cache)
        if ptdf is None:
            continue
        lc = select_critical_line(case, sol, neighborhood_branches(case, node))
        lp = formulate_local_lp(case, sol, ptdf, node, lc)
        base = solve_lp(lp)
        if base.status != "optimal" or base.objective == 0.0:
            continue
        relaxed = solve_lp(dataclasses.replace(lp, rhs=lp.rhs + 5.0))
        assert relaxed.status == "optimal"
        assert relaxed.objective <= base.objective + 1e-6
        seen += 1
        if seen >= 15:
            break
    assert seen >= 15


# ------------------------------------------------------------ apply semantics
def test_apply_clips_to_available_demand(two_node):
    sol = ShedSolution(buses=(2,), x=np.array([75.0]), objective=75.0, status="optimal")
    after, shed = apply_control(two_node, sol)
    assert shed == pytest.approx(60.0)  # only 60 MW of demand exists
    assert after.loads[after.bus_index[2]] == 0.0
    assert after.gen_p[0] == pytest.approx(0.0)  # full headroom absorbed


def test_apply_stops_redispatch_at_pmin(two_node):
    import dataclasses

    stiff = dataclasses.replace(two_node, gen_pmin=np.array([55.0]))
    sol = ShedSolution(buses=(2,), x=np.array([20.0]), objective=20.0, status="optimal")
    after, shed = apply_control(stiff, sol)
    assert shed == pytest.approx(20.0)
    assert after.gen_p[0] == pytest.approx(55.0)  # 5 MW of headroom, no more
    assert sol.redispatch.sum() == pytest.approx(-5.0)
    # the 15 MW residual is deliberately left for the next rebalance pass
    assert after.injections().sum() == pytest.approx(15.0)


# ------------------------------------------------------------ central baseline
def test_central_quiet_grid_sheds_nothing(case30):
    case, _ = balance_case(case30)
    sol = central_emergency_control(case, dc_power_flow(case))
    assert sol.status == "optimal"
    assert sol.objective == 0.0


def test_central_equals_local_when_scopes_coincide(two_node):
    # one overloaded line, one load bus: both problems see the same variables
    case = two_node.with_branch_out([2, 3])
    flows = dc_power_flow(case)
    central = central_emergency_control(case, flows)
    ptdf = compute_ptdf(case, slack=1)
    local = solve_lp(formulate_local_lp(case, flows, ptdf, 1, 1))
    assert central.status == local.status == "optimal"
    assert central.objective == pytest.approx(local.objective, abs=1e-6)
    assert central.buses == (2,)


def test_central_never_beats_local_sum():
    """Coordinated global shedding is numerically cheaper than per-node fixes.

    Checked per snapshot rather than assumed: the relaxation argument needs
    every overload covered by a reacting neighborhood and all LPs feasible.
    """
    checked = 0
    for case, sol, over in _snapshots(seed=77):
        central = central_emergency_control(case, sol)
        if central.status != "optimal":
            continue
        nodes = sorted(
            {int(case.br_from[k - 1]) for k in over} | {int(case.br_to[k - 1]) for k in over}
        )
        cache = {}
        local_sum = 0.0
        feasible = True
        for n in nodes:
            ptdf = _island_ptdf(case, n, cache)
            if ptdf is None:
                continue
            lc = select_critical_line(case, sol, neighborhood_branches(case, n))
            s = solve_lp(formulate_local_lp(case, sol, ptdf, n, lc))
            if s.status != "optimal":
                feasible = False
                break
            local_sum += s.objective
        if not feasible:
            continue
        assert central.objective <= local_sum + 1e-6
        checked += 1
        if checked >= 40:
            break
    assert checked >= 40


# ------------------------------------------------------------ exports
def test_export_shed_and_redispatch(tmp_path, two_node):
    case = two_node.with_branch_out([2, 3])
    flows = dc_power_flow(case)
    ptdf = compute_ptdf(case, slack=1)
    sol = solve_lp(formulate_local_lp(case, flows, ptdf, 1, 1))
    sheds = tmp_path / "sheds.csv"
    export_sheds_csv(sheds, 1, sol)
    assert sheds.read_text(encoding="utf-8").splitlines() == [
        "node,bus,shed_mw",
        "1,2,20.000000",
    ]
    redis = tmp_path / "redispatch.csv"
    with pytest.raises(ShedError, match="not been applied"):
        export_redispatch_csv(redis, 1, case, sol)
    apply_control(case, sol)
    export_redispatch_csv(redis, 1, case, sol)
    assert redis.read_text(encoding="utf-8").splitlines() == [
        "node,gen,redispatch_mw",
        "1,1,-20.000000",
    ]
