"""Quasi-static cascading loop coupling the node supervisors to the DC grid.

Tick structure (one tick ~ one second for delay interpretation):
  1. apply control actions whose due tick has passed (sheds + redispatch);
  2. rebalance every island (involuntary load/generation adjustment);
  3. solve DC flows and trip every branch loaded beyond its rating;
  4. converged when nothing tripped, nothing was applied, and the queue is
     empty; give up at the tick cap;
  5. after a trip, the controllers at the tripped line's endpoints inspect an
     uncommitted post-trip preview: if the most loaded neighborhood line
     predicts another trip, they solve the local shed LP and enqueue the
     action with the configured delay.  The central baseline solves one
     global LP instead, with zero delay.

Component events are recorded as the cascade's event string: shed/redispatch
at application, trip/wipe at rebalance, line trips at detection.  Restores
never fire; cascades only degrade.  Partial involuntary sheds move no
component out of Normal, so they carry no event.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .grid import (
    FlowSolution,
    GridCase,
    GridModelError,
    balance_case,
    compute_ptdf,
    dc_power_flow,
    find_islands,
    rebalance_island,
)
from .modular import (
    ComponentRegistry,
    ConjunctionController,
    ModularError,
    ModularSupervisor,
    NodeSupervisor,
    build_node_supervisors,
)
from .shedding import (
    ShedError,
    ShedSolution,
    apply_control,
    central_emergency_control,
    formulate_local_lp,
    neighborhood_branches,
    select_critical_line,
    solve_lp,
)
from .supervisory import is_admissible

_EPS = 1e-9

MODES = ("none", "modular", "central")


class CascadeError(ValueError):
    """Scenario inconsistent with the case (bad pair, negative knobs, ...)."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One N-2 run: the initiating pair, the demand profile, and the control mode."""

    initial_outage: tuple[int, int] | tuple[()] = ()
    load_multipliers: np.ndarray | None = None  # per bus, aligned with bus order
    control_mode: str = "none"
    delay_ticks: int = 0
    max_ticks: int = 60
    trip_mode: str = "all"  # all violators per tick, or single 'worst'
    threat_threshold: float = 1.0  # predicted-loading fraction that triggers control

    def validate(self, case: GridCase) -> None:
        if self.control_mode not in MODES:
            raise CascadeError(f"unknown control mode {self.control_mode!r}")
        if self.delay_ticks < 0 or self.max_ticks < 1:
            raise CascadeError("delay_ticks must be >= 0 and max_ticks >= 1")
        if self.trip_mode not in ("all", "worst"):
            raise CascadeError(f"unknown trip mode {self.trip_mode!r}")
        if self.initial_outage:
            if len(self.initial_outage) != 2 or self.initial_outage[0] == self.initial_outage[1]:
                raise CascadeError("initial outage must be two distinct branches")
            for bid in self.initial_outage:
                if not 1 <= bid <= case.n_branch:
                    raise CascadeError(f"branch id {bid} out of range")
                if not case.br_status[bid - 1]:
                    raise CascadeError(f"branch {bid} is already out of service")
        if self.load_multipliers is not None:
            m = np.asarray(self.load_multipliers, dtype=float)
            if m.shape != (case.n_bus,):
                raise CascadeError("load multipliers must align with the bus list")
            if np.any(m < 0):
                raise CascadeError("load multipliers must be >= 0")


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    kind: str  # line_trip | load_shed | redispatch | rebalance | gen_trip
    subject: str
    mw: float


@dataclass(frozen=True)
class PendingAction:
    """A solved shed bundle waiting out its communication delay."""

    node: int
    buses: tuple[int, ...]
    x: tuple[float, ...]
    issued_tick: int
    due_tick: int


@dataclass(frozen=True)
class CascadeTrace:
    case_name: str
    mode: str
    events: tuple[TraceEvent, ...]
    des_string: tuple[str, ...]
    mw_lost_rebalance: float
    mw_lost_control: float
    line_trip_count: int
    ticks: int
    terminated: str  # converged | tick_cap
    violations: tuple[tuple[int, int, str], ...] = ()  # (tick, node, detail)

    @property
    def mw_lost_total(self) -> float:
        return self.mw_lost_rebalance + self.mw_lost_control

    def summary(self) -> dict:
        return {
            "mw_lost_total": round(self.mw_lost_total, 6),
            "mw_lost_rebalance": round(self.mw_lost_rebalance, 6),
            "mw_lost_control": round(self.mw_lost_control, 6),
            "line_trip_count": self.line_trip_count,
            "terminated": self.terminated,
        }


def trip_overloaded_lines(case: GridCase, flows: FlowSolution) -> tuple[int, ...]:
    """In-service branches with |flow| strictly above rating, ascending ids."""
    return tuple(
        k + 1
        for k in range(case.n_branch)
        if case.br_status[k] and abs(float(flows.flows_mw[k])) > float(case.br_rating[k]) + _EPS
    )


def worst_overloaded_line(case: GridCase, flows: FlowSolution) -> tuple[int, ...]:
    """At most one trip per tick: the highest loading fraction, least id on ties."""
    over = trip_overloaded_lines(case, flows)
    if not over:
        return ()
    loading = flows.loading(case)
    best = min(over, key=lambda bid: (-float(loading[bid - 1]), bid))
    return (best,)


def schedule_with_delay(
    queue: Sequence[PendingAction], action: PendingAction, now: int, delay_ticks: int
) -> list[PendingAction]:
    """Append with due = now + delay; list order is the FIFO tie-break."""
    if delay_ticks < 0:
        raise CascadeError("delay_ticks must be >= 0")
    return list(queue) + [replace(action, issued_tick=now, due_tick=now + delay_ticks)]


class _DesMirror:
    """Normal/Tripped bookkeeping for every component, for event emission."""

    def __init__(self, registry: ComponentRegistry) -> None:
        self.reg = registry
        self.tripped: set[str] = set()

    def line_trip(self, branch_id: int) -> str:
        c = self.reg.line_component(branch_id)
        self.tripped.add(c.tag)
        return c.trip_event

    def load_wipe(self, bus: int) -> str | None:
        c = self.reg.load_component(bus)
        if c is None or c.tag in self.tripped:
            return None
        self.tripped.add(c.tag)
        return c.trip_event

    def gen_trip(self, row: int) -> str | None:
        c = self.reg.gens[row][0]
        if c.tag in self.tripped:
            return None
        self.tripped.add(c.tag)
        return c.trip_event

    def load_shed_event(self, bus: int) -> str | None:
        c = self.reg.load_component(bus)
        if c is None or c.tag in self.tripped:
            return None
        return c.change_event

    def gen_change_event(self, row: int) -> str | None:
        c = self.reg.gens[row][0]
        if c.tag in self.tripped:
            return None
        return c.change_event


def _member_snapshot(m: NodeSupervisor):
    return m.current if isinstance(m, ModularSupervisor) else frozenset(m.tripped)


def _conjunction_enabled(controllers: ConjunctionController, broken: set[int]) -> frozenset[str]:
    """Conjunction enablement with lost-track members abstaining."""
    enabled = set(controllers.global_alphabet)
    for m in controllers.members:
        if m.node in broken:
            continue
        p = m.pattern_from(_member_snapshot(m))
        enabled -= m.alphabet - p.enabled
    return frozenset(enabled)


def run_cascade(
    case: GridCase,
    scenario: ScenarioConfig,
    controllers: ConjunctionController | None = None,
    registry: ComponentRegistry | None = None,
) -> CascadeTrace:
    """Run one scenario to convergence or the tick cap.

    ``controllers`` is required for modular mode (built on demand otherwise)
    and ignored by the other modes.  Every in-service branch must carry a
    positive rating; repair_ratings covers unrated data first.
    """
    scenario.validate(case)
    for k in range(case.n_branch):
        if case.br_status[k] and case.br_rating[k] <= 0:
            raise CascadeError(
                f"branch {k + 1} has no rating; run repair_ratings before simulating"
            )
    mode = scenario.control_mode
    reg = registry or ComponentRegistry.from_case(case)
    if mode == "modular" and controllers is None:
        controllers = build_node_supervisors(case)
    if controllers is not None:
        controllers.reset()
    mirror = _DesMirror(reg)
    broken: set[int] = set()
    violations: list[tuple[int, int, str]] = []
    des: list[str] = []
    events: list[TraceEvent] = []

    def notify(tick: int, labels: Sequence[str]) -> None:
        des.extend(labels)
        if mode != "modular" or controllers is None:
            return
        for e in labels:
            for m in controllers.members:
                if m.node in broken or e not in m.alphabet:
                    continue
                try:
                    m.observe(e)
                except ModularError as exc:
                    violations.append((tick, m.node, str(exc)))
                    broken.add(m.node)

    working = case
    if scenario.load_multipliers is not None:
        working = working.with_loads(working.loads * np.asarray(scenario.load_multipliers))
    working, _setup = balance_case(working)  # scenario setup, not cascade loss

    lost_rebalance = 0.0
    lost_control = 0.0
    trip_count = 0
    queue: list[PendingAction] = []

    if scenario.initial_outage:
        before = dc_power_flow(working)
        working = working.with_branch_out(scenario.initial_outage)
        labels = []
        for bid in sorted(scenario.initial_outage):
            events.append(
                TraceEvent(1, "line_trip", f"line{bid}", abs(float(before.flows_mw[bid - 1])))
            )
            labels.append(mirror.line_trip(bid))
            trip_count += 1
        notify(1, labels)

    terminated = "tick_cap"
    tick = 0
    pending_initial = bool(scenario.initial_outage)
    for tick in range(1, scenario.max_ticks + 1):
        acted = False

        # 1. apply due actions (issue tick + delay has passed)
        due = [a for a in queue if a.due_tick < tick]
        queue = [a for a in queue if a.due_tick >= tick]
        for action in due:
            idx = working.bus_index
            actual = [
                min(x, float(working.loads[idx[b]])) for b, x in zip(action.buses, action.x)
            ]
            sol = ShedSolution(
                buses=action.buses,
                x=np.array(actual),
                objective=float(sum(actual)),
                status="optimal",
            )
            working, shed_total = apply_control(working, sol)
            if shed_total <= _EPS:
                continue
            acted = True
            lost_control += shed_total
            labels = []
            for b, xj in zip(action.buses, actual):
                if xj <= _EPS:
                    continue
                events.append(TraceEvent(tick, "load_shed", f"bus{b}", xj))
                lab = mirror.load_shed_event(b)
                if lab is not None:
                    labels.append(lab)
            if sol.redispatch is not None:
                for g in range(working.n_gen):
                    if abs(float(sol.redispatch[g])) > _EPS:
                        events.append(
                            TraceEvent(tick, "redispatch", f"gen{g + 1}", float(sol.redispatch[g]))
                        )
                        lab = mirror.gen_change_event(g)
                        if lab is not None:
                            labels.append(lab)
            notify(tick, sorted(set(labels)))

        # 2. island rebalance (involuntary)
        loads_before = working.loads.copy()
        status_before = working.gen_status.copy()
        p_before = working.gen_p.copy()
        for isl in find_islands(working):
            working, lost = rebalance_island(isl, working)
            if lost > _EPS:
                lost_rebalance += lost
                events.append(TraceEvent(tick, "rebalance", f"island{isl.slack_bus}", lost))
        labels = []
        bidx = working.bus_index
        for b in (int(x) for x in working.bus_ids):
            if loads_before[bidx[b]] > _EPS and working.loads[bidx[b]] <= _EPS:
                lab = mirror.load_wipe(b)
                if lab is not None:
                    labels.append(lab)
        for g in range(working.n_gen):
            if status_before[g] and not working.gen_status[g]:
                events.append(TraceEvent(tick, "gen_trip", f"gen{g + 1}", float(p_before[g])))
                lab = mirror.gen_trip(g)
                if lab is not None:
                    labels.append(lab)
        notify(tick, sorted(labels))

        # 3. flows and overload trips
        flows = dc_power_flow(working)
        if scenario.trip_mode == "worst":
            trips = worst_overloaded_line(working, flows)
        else:
            trips = trip_overloaded_lines(working, flows)
        if trips:
            working = working.with_branch_out(trips)
            labels = []
            for bid in trips:
                events.append(
                    TraceEvent(tick, "line_trip", f"line{bid}", abs(float(flows.flows_mw[bid - 1])))
                )
                labels.append(mirror.line_trip(bid))
                trip_count += 1
            notify(tick, labels)

        # 4. convergence
        fresh = list(trips)
        if pending_initial:
            fresh.extend(scenario.initial_outage)
            pending_initial = False
        if not fresh and not acted and not queue:
            terminated = "converged"
            break

        # 5. controller reactions to this tick's trips
        if not fresh or mode == "none":
            continue
        preview, _ = balance_case(working)
        try:
            pflows = dc_power_flow(preview)
        except GridModelError:
            continue
        if mode == "central":
            sol = central_emergency_control(preview, pflows)
            if sol.status == "optimal" and sol.objective > _EPS:
                act = PendingAction(
                    node=0, buses=sol.buses, x=tuple(float(v) for v in sol.x),
                    issued_tick=tick, due_tick=tick,
                )
                queue = schedule_with_delay(queue, act, tick, 0)
            continue
        # modular: the endpoints of every freshly tripped line react
        reacting = sorted(
            {int(case.br_from[bid - 1]) for bid in fresh}
            | {int(case.br_to[bid - 1]) for bid in fresh}
        )
        conj_enabled = _conjunction_enabled(controllers, broken) if controllers else frozenset()
        loading = pflows.loading(preview)
        ptdf_cache: dict[int, object] = {}
        for node in reacting:
            try:
                nb = neighborhood_branches(preview, node)
                l_c = select_critical_line(preview, pflows, nb)
            except ShedError:
                continue
            if float(loading[l_c - 1]) <= scenario.threat_threshold:
                continue
            member: NodeSupervisor | None = None
            if controllers is not None:
                try:
                    member = controllers.by_node(node)
                except ModularError:
                    member = None
            if member is not None and member.node not in broken:
                snap = _member_snapshot(member)
                pat = member.pattern_from(snap)
                if not is_admissible(pat, member.plant_active_from(snap), member.table):
                    violations.append((tick, node, "inadmissible pattern at threat"))
            isl = next((i for i in pflows.islands if node in i.buses), None)
            if isl is None or not isl.has_generation:
                continue
            if isl.slack_bus not in ptdf_cache:
                ptdf_cache[isl.slack_bus] = compute_ptdf(preview, slack=isl.slack_bus)
            try:
                lp = formulate_local_lp(preview, pflows, ptdf_cache[isl.slack_bus], node, l_c)
            except ShedError:
                continue
            sol = solve_lp(lp)
            if sol.status != "optimal" or sol.objective <= _EPS:
                continue
            buses: list[int] = []
            xs: list[float] = []
            for b, xj in zip(sol.buses, sol.x):
                if float(xj) <= _EPS:
                    continue
                lab = mirror.load_shed_event(b)
                if lab is None:
                    continue
                if controllers is not None and lab not in conj_enabled:
                    continue  # the conjunction vetoes this shed
                buses.append(b)
                xs.append(float(xj))
            if buses:
                act = PendingAction(
                    node=node, buses=tuple(buses), x=tuple(xs),
                    issued_tick=tick, due_tick=tick,
                )
                queue = schedule_with_delay(queue, act, tick, scenario.delay_ticks)

    return CascadeTrace(
        case_name=case.name,
        mode=mode,
        events=tuple(events),
        des_string=tuple(des),
        mw_lost_rebalance=lost_rebalance,
        mw_lost_control=lost_control,
        line_trip_count=trip_count,
        ticks=tick,
        terminated=terminated,
        violations=tuple(violations),
    )


def export_trace_csv(trace: CascadeTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "kind", "subject", "mw"])
        for ev in trace.events:
            w.writerow([ev.tick, ev.kind, ev.subject, f"{ev.mw:.6f}"])


def export_trace_summary(trace: CascadeTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trace.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
