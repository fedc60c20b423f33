"""Load-shed linear programs: the continuous half of each control action.

The DES supervisor decides *whether* shedding and redispatch may happen; the
LP here decides *how much*, minimizing total shed subject to post-shed flow
limits linearized through PTDF superposition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .grid import (
    FlowSolution,
    GridCase,
    PTDFMatrix,
    build_adjacency,
    compute_ptdf,
    find_islands,
)


class ShedError(ValueError):
    """Malformed shed problem (empty neighborhood, bad status, unknown node)."""


_EPS = 1e-9


def neighborhood_branches(case: GridCase, node: int) -> tuple[int, ...]:
    """In-service branches incident to the node or one of its direct neighbors."""
    adj = build_adjacency(case)
    if node not in adj:
        raise ShedError(f"unknown node {node}")
    buses = {node} | {b for _, b in adj[node]}
    return tuple(sorted({bid for b in buses for bid, _ in adj[b]}))


def neighborhood_load_buses(case: GridCase, node: int) -> tuple[int, ...]:
    """Load buses at the node and its direct neighbors (current demand > 0)."""
    adj = build_adjacency(case)
    if node not in adj:
        raise ShedError(f"unknown node {node}")
    buses = [node] + sorted({b for _, b in adj[node]})
    idx = case.bus_index
    return tuple(b for b in buses if case.loads[idx[b]] > _EPS)


def select_critical_line(
    case: GridCase, flows: FlowSolution, neighborhood: Iterable[int]
) -> int:
    """Most loaded in-service branch of the neighborhood; ties to the least id."""
    loading = flows.loading(case)
    best: tuple[float, int] | None = None
    for bid in neighborhood:
        k = bid - 1
        if not case.br_status[k]:
            continue
        score = float(loading[k])
        if best is None or score > best[0] + _EPS or (abs(score - best[0]) <= _EPS and bid < best[1]):
            best = (score, bid)
    if best is None:
        raise ShedError("neighborhood has no in-service branch")
    return best[1]


@dataclass(frozen=True)
class ShedLP:
    """min sum(x) s.t. flow_rows @ x <= rhs, 0 <= x <= bounds.

    One row per monitored branch, sign-oriented on the loaded direction so a
    positive slack means margin; the critical line's row index is kept for
    post-checks.
    """

    node: int
    buses: tuple[int, ...]
    branch_ids: tuple[int, ...]
    flow_rows: np.ndarray  # (n_rows, n_vars)
    rhs: np.ndarray  # rating - |flow| per row
    critical_row: int
    bounds: np.ndarray  # current load per variable bus


@dataclass
class ShedSolution:
    buses: tuple[int, ...]
    x: np.ndarray  # MW shed per bus
    objective: float
    status: str  # optimal | infeasible
    redispatch: np.ndarray | None = None  # per-generator MW delta, set on apply

    def __post_init__(self) -> None:
        if self.status == "optimal" and abs(float(self.x.sum()) - self.objective) > 1e-6:
            raise ShedError("objective out of step with shed vector")


def _redispatch_weights(case: GridCase, island_buses: frozenset[int]) -> np.ndarray:
    """Headroom-proportional absorption of a load reduction, per generator row."""
    w = np.zeros(case.n_gen)
    for g in range(case.n_gen):
        if case.gen_status[g] and int(case.gen_bus[g]) in island_buses:
            w[g] = max(0.0, float(case.gen_p[g] - case.gen_pmin[g]))
    total = w.sum()
    return w / total if total > _EPS else w


def _build_rows(
    case: GridCase,
    flows: FlowSolution,
    ptdf: PTDFMatrix,
    monitored: Sequence[int],
    buses: Sequence[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Sign-oriented constraint rows: shedding x at a bus moves the monitored
    flow by PTDF(branch, bus) minus the flow shift of the generators that
    absorb the reduction, so the LP and the later redispatch agree exactly."""
    col = {b: i for i, b in enumerate(ptdf.bus_ids)}
    w = _redispatch_weights(case, ptdf.island_buses)
    gen_shift = np.zeros(case.n_branch)
    for g in range(case.n_gen):
        if w[g] > 0:
            gen_shift += w[g] * ptdf.matrix[:, col[int(case.gen_bus[g])]]
    rows = np.zeros((len(monitored), len(buses)))
    rhs = np.zeros(len(monitored))
    for r, bid in enumerate(monitored):
        k = bid - 1
        sign = 1.0 if flows.flows_mw[k] >= 0 else -1.0
        for j, b in enumerate(buses):
            if b in ptdf.island_buses:  # sheds elsewhere cannot move this flow
                rows[r, j] = sign * (ptdf.matrix[k, col[b]] - gen_shift[k])
        rhs[r] = float(case.br_rating[k]) - abs(float(flows.flows_mw[k]))
    return rows, rhs


def formulate_local_lp(
    case: GridCase,
    flows: FlowSolution,
    ptdf: PTDFMatrix,
    node: int,
    l_c: int,
    only_critical: bool = False,
) -> ShedLP:
    """Shed variables at the node's and neighbors' load buses; one flow row per
    monitored neighborhood branch (or just the critical line's row)."""
    nb = neighborhood_branches(case, node)
    if l_c not in nb:
        raise ShedError(f"critical line {l_c} outside the neighborhood of node {node}")
    monitored = (l_c,) if only_critical else tuple(
        bid for bid in nb if case.br_rating[bid - 1] > 0
    )
    if l_c not in monitored:
        monitored = (l_c,) + monitored
    buses = neighborhood_load_buses(case, node)
    rows, rhs = _build_rows(case, flows, ptdf, monitored, buses)
    idx = case.bus_index
    return ShedLP(
        node=node,
        buses=buses,
        branch_ids=monitored,
        flow_rows=rows,
        rhs=rhs,
        critical_row=monitored.index(l_c),
        bounds=np.array([float(case.loads[idx[b]]) for b in buses]),
    )


def solve_lp(lp: ShedLP) -> ShedSolution:
    """Exact optimum of the small dense LP; infeasible is a status, not an error."""
    n = len(lp.buses)
    if np.all(lp.rhs >= -_EPS):
        return ShedSolution(lp.buses, np.zeros(n), 0.0, "optimal")
    if n == 0:
        return ShedSolution(lp.buses, np.zeros(0), 0.0, "infeasible")
    res = linprog(
        c=np.ones(n),
        A_ub=lp.flow_rows,
        b_ub=lp.rhs,
        bounds=[(0.0, float(cap)) for cap in lp.bounds],
        method="highs",
    )
    if not res.success:
        return ShedSolution(lp.buses, np.zeros(n), 0.0, "infeasible")
    x = np.clip(res.x, 0.0, lp.bounds)
    x[x < _EPS] = 0.0
    return ShedSolution(lp.buses, x, float(x.sum()), "optimal")


def apply_control(case: GridCase, sol: ShedSolution) -> tuple[GridCase, float]:
    """Commit the sheds and absorb them with headroom-proportional redispatch.

    Sheds are clipped to the demand still present.  When an island's headroom
    cannot absorb its shed total, generation stops at p_min and the residual
    imbalance is left to the next rebalance (the involuntary fallback path).
    Returns the new snapshot and the MW actually shed by control.
    """
    if sol.status != "optimal":
        raise ShedError(f"cannot apply a solution with status {sol.status!r}")
    idx = case.bus_index
    loads = case.loads.astype(float).copy()
    shed = np.zeros(len(sol.buses))
    for j, b in enumerate(sol.buses):
        shed[j] = min(float(sol.x[j]), float(loads[idx[b]]))
        loads[idx[b]] -= shed[j]
    total = float(shed.sum())
    gen_p = case.gen_p.astype(float).copy()
    deltas = np.zeros(case.n_gen)
    if total > _EPS:
        bus_island: dict[int, int] = {}
        island_buses: dict[int, frozenset[int]] = {}
        for i, isl in enumerate(find_islands(case)):
            island_buses[i] = frozenset(isl.buses)
            for b in isl.buses:
                bus_island[b] = i
        per_island: dict[int, float] = {}
        for j, b in enumerate(sol.buses):
            if shed[j] > _EPS:
                i = bus_island[b]
                per_island[i] = per_island.get(i, 0.0) + shed[j]
        for i, amount in sorted(per_island.items()):
            w = _redispatch_weights(case, island_buses[i])
            headroom = np.array(
                [max(0.0, float(case.gen_p[g] - case.gen_pmin[g])) for g in range(case.n_gen)]
            ) * (w > 0)
            absorb = min(amount, float(headroom.sum()))
            deltas -= w * absorb
    gen_p += deltas
    sol.redispatch = deltas
    new_case = case.with_loads(loads).with_dispatch(gen_p)
    return new_case, total


def central_emergency_control(case: GridCase, flows: FlowSolution) -> ShedSolution:
    """Global baseline: one LP per generating island over all its load buses,
    every rated in-service branch constrained; solutions merged in island order."""
    idx = case.bus_index
    all_buses: list[int] = []
    all_x: list[float] = []
    status = "optimal"
    for isl in find_islands(case):
        if not isl.has_generation:
            continue
        buses = tuple(b for b in isl.buses if case.loads[idx[b]] > _EPS)
        monitored = tuple(bid for bid in isl.branch_ids if case.br_rating[bid - 1] > 0)
        if not monitored:
            continue
        ptdf = compute_ptdf(case, slack=isl.slack_bus)
        rows, rhs = _build_rows(case, flows, ptdf, monitored, buses)
        lp = ShedLP(
            node=isl.slack_bus,
            buses=buses,
            branch_ids=monitored,
            flow_rows=rows,
            rhs=rhs,
            critical_row=0,
            bounds=np.array([float(case.loads[idx[b]]) for b in buses]),
        )
        sol = solve_lp(lp)
        if sol.status != "optimal":
            status = "infeasible"
            continue
        all_buses.extend(buses)
        all_x.extend(sol.x.tolist())
    x = np.array(all_x)
    return ShedSolution(tuple(all_buses), x, float(x.sum()), status)


def export_sheds_csv(path, node: int, sol: ShedSolution) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "bus", "shed_mw"])
        for b, xj in zip(sol.buses, sol.x):
            w.writerow([node, b, f"{float(xj):.6f}"])


def export_redispatch_csv(path, node: int, case: GridCase, sol: ShedSolution) -> None:
    if sol.redispatch is None:
        raise ShedError("solution has not been applied yet")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "gen", "redispatch_mw"])
        for g in range(case.n_gen):
            if abs(sol.redispatch[g]) > _EPS:
                w.writerow([node, g + 1, f"{float(sol.redispatch[g]):.6f}"])
