"""Quasi-static DC grid model.

Parses the standard matrix case text format (baseMVA/bus/gen/branch blocks),
solves per-island DC power flow with a susceptance-weighted Laplacian, builds
injection-shift (PTDF) sensitivities, detects islands over the in-service
topology, and rebalances island generation against load.  Case snapshots are
immutable values; every mutation produces a new snapshot.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GridCase",
    "FlowSolution",
    "PTDFMatrix",
    "Island",
    "GridModelError",
    "CaseFormatError",
    "parse_case",
    "load_case",
    "bundled_case_names",
    "find_islands",
    "dc_power_flow",
    "compute_ptdf",
    "rebalance_island",
    "balance_case",
    "repair_ratings",
    "build_adjacency",
    "export_flows_csv",
]

# Injections are MW throughout; angles are radians; reactances are per-unit on
# the case base.  Branch ids are 1-based row order of the case file.

_BALANCE_TOL_MW = 1e-6


class GridModelError(ValueError):
    pass


class CaseFormatError(ValueError):
    def __init__(self, lineno: int, message: str) -> None:
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class GridCase:
    """One topological/dispatch snapshot of a grid case."""

    name: str
    base_mva: float
    bus_ids: np.ndarray  # int, unique, file order
    loads: np.ndarray  # MW demand per bus (aligned with bus_ids)
    gen_bus: np.ndarray  # int, bus id per generator row
    gen_p: np.ndarray  # MW dispatch
    gen_pmax: np.ndarray  # MW
    gen_pmin: np.ndarray  # MW
    gen_status: np.ndarray  # bool, in service
    br_from: np.ndarray  # int bus ids
    br_to: np.ndarray
    br_x: np.ndarray  # p.u. reactance
    br_rating: np.ndarray  # MW, 0 = unlimited in the source format
    br_status: np.ndarray  # bool, in service

    def __post_init__(self) -> None:
        if len(set(self.bus_ids.tolist())) != len(self.bus_ids):
            raise GridModelError("duplicate bus ids")
        known = set(self.bus_ids.tolist())
        for b in np.concatenate([self.gen_bus, self.br_from, self.br_to]).tolist():
            if b not in known:
                raise GridModelError(f"reference to unknown bus {b}")
        if np.any(self.br_x == 0):
            raise GridModelError("zero branch reactance")

    @property
    def n_bus(self) -> int:
        return len(self.bus_ids)

    @property
    def n_gen(self) -> int:
        return len(self.gen_bus)

    @property
    def n_branch(self) -> int:
        return len(self.br_from)

    @property
    def bus_index(self) -> dict[int, int]:
        return {int(b): i for i, b in enumerate(self.bus_ids)}

    @property
    def branch_ids(self) -> tuple[int, ...]:
        return tuple(range(1, self.n_branch + 1))

    def injections(self) -> np.ndarray:
        """Net MW injection per bus: on-line generation minus load."""
        inj = -self.loads.astype(float).copy()
        idx = self.bus_index
        for g in range(self.n_gen):
            if self.gen_status[g]:
                inj[idx[int(self.gen_bus[g])]] += self.gen_p[g]
        return inj

    def total_load(self) -> float:
        return float(self.loads.sum())

    # -- copy-on-write helpers ------------------------------------------

    def _replace(self, **kw) -> "GridCase":
        data = {
            "name": self.name,
            "base_mva": self.base_mva,
            "bus_ids": self.bus_ids,
            "loads": self.loads,
            "gen_bus": self.gen_bus,
            "gen_p": self.gen_p,
            "gen_pmax": self.gen_pmax,
            "gen_pmin": self.gen_pmin,
            "gen_status": self.gen_status,
            "br_from": self.br_from,
            "br_to": self.br_to,
            "br_x": self.br_x,
            "br_rating": self.br_rating,
            "br_status": self.br_status,
        }
        data.update(kw)
        return GridCase(**data)

    def with_loads(self, loads: np.ndarray) -> "GridCase":
        if np.any(loads < -1e-12):
            raise GridModelError("negative load")
        return self._replace(loads=np.maximum(loads.astype(float), 0.0))

    def with_dispatch(self, gen_p: np.ndarray, gen_status: np.ndarray | None = None) -> "GridCase":
        kw = {"gen_p": gen_p.astype(float)}
        if gen_status is not None:
            kw["gen_status"] = gen_status.astype(bool)
        return self._replace(**kw)

    def with_branch_out(self, branch_ids: Iterable[int]) -> "GridCase":
        status = self.br_status.copy()
        for bid in branch_ids:
            if not 1 <= bid <= self.n_branch:
                raise GridModelError(f"branch id {bid} out of range")
            status[bid - 1] = False
        return self._replace(br_status=status)

    def with_ratings(self, ratings: np.ndarray) -> "GridCase":
        return self._replace(br_rating=ratings.astype(float))


@dataclass(frozen=True)
class Island:
    """Connected component of the in-service grid graph."""

    buses: tuple[int, ...]  # sorted bus ids
    branch_ids: tuple[int, ...]  # sorted, in-service, both endpoints inside
    has_generation: bool
    slack_bus: int  # least-id on-line generator bus, else least bus id


@dataclass(frozen=True)
class FlowSolution:
    angles: np.ndarray  # radians per bus, slack of each island at 0
    flows_mw: np.ndarray  # per branch, 0.0 for out-of-service rows
    injections_mw: np.ndarray  # echo of the solved injections
    islands: tuple[Island, ...]

    def loading(self, case: GridCase) -> np.ndarray:
        """|flow|/rating per branch; inf where rating is 0, 0 when out of service."""
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.abs(self.flows_mw) / case.br_rating
        frac = np.where(case.br_rating <= 0, np.inf, frac)
        return np.where(case.br_status, frac, 0.0)


@dataclass(frozen=True)
class PTDFMatrix:
    """Branch-flow sensitivity to +1 MW bus injection compensated at the slack.

    Rows follow branch file order; the slack column is zero; rows and columns
    outside the slack's island are zero.
    """

    slack_bus: int
    matrix: np.ndarray  # (n_branch, n_bus)
    bus_ids: tuple[int, ...]
    island_buses: frozenset[int]

    def column(self, bus: int) -> np.ndarray:
        return self.matrix[:, self.bus_ids.index(bus)]


# ---- case file parsing -----------------------------------------------------

_ASSIGN_RE = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")


def parse_case(text: str, name: str = "case") -> GridCase:
    """Parse baseMVA/bus/gen/branch blocks of the matrix case format.

    Comments (%) are stripped; matrix rows are whitespace-separated numbers
    with an optional trailing semicolon.  Raises CaseFormatError with a line
    number on malformed content and GridModelError on dangling references.
    """
    base_mva: float | None = None
    blocks: dict[str, list[list[float]]] = {}
    current: str | None = None
    rows: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        if current is None:
            m = _ASSIGN_RE.match(line)
            if not m:
                continue  # function header, version string, etc.
            field, rest = m.group(1), m.group(2).strip()
            if field == "baseMVA":
                try:
                    base_mva = float(rest.rstrip(";"))
                except ValueError:
                    raise CaseFormatError(lineno, f"bad baseMVA value {rest!r}")
                continue
            if field in ("bus", "gen", "branch") and rest.startswith("["):
                current = field
                rows = []
                rest = rest[1:].strip()
                if rest:
                    line = rest
                else:
                    continue
            else:
                continue
        closing = line.endswith("];")
        if closing:
            line = line[:-2].strip()
        if line:
            for chunk in line.split(";"):
                chunk = chunk.strip()
                if not chunk:
                    continue
                try:
                    rows.append([float(tok) for tok in chunk.split()])
                except ValueError:
                    raise CaseFormatError(lineno, f"bad number in row {chunk!r}")
        if closing:
            blocks[current] = rows
            current = None
    if current is not None:
        raise CaseFormatError(lineno, f"unterminated mpc.{current} block")
    if base_mva is None:
        raise CaseFormatError(1, "missing mpc.baseMVA")
    for need in ("bus", "gen", "branch"):
        if need not in blocks:
            raise CaseFormatError(1, f"missing mpc.{need} matrix")
        if not blocks[need]:
            raise CaseFormatError(1, f"empty mpc.{need} matrix")
    widths = {"bus": 3, "gen": 10, "branch": 6}
    for block, need in widths.items():
        for r in blocks[block]:
            if len(r) < need:
                raise CaseFormatError(1, f"mpc.{block} row has {len(r)} < {need} columns")
    bus = np.array(blocks["bus"], dtype=float)
    gen = np.array([r[:10] for r in blocks["gen"]], dtype=float)
    branch_rows = blocks["branch"]
    br_status = np.array(
        [bool(r[10] != 0) if len(r) >= 11 else True for r in branch_rows], dtype=bool
    )
    return GridCase(
        name=name,
        base_mva=float(base_mva),
        bus_ids=bus[:, 0].astype(int),
        loads=bus[:, 2].astype(float),
        gen_bus=gen[:, 0].astype(int),
        gen_p=gen[:, 1].astype(float),
        gen_pmax=gen[:, 8].astype(float),
        gen_pmin=gen[:, 9].astype(float),
        gen_status=gen[:, 7] > 0,
        br_from=np.array([int(r[0]) for r in branch_rows]),
        br_to=np.array([int(r[1]) for r in branch_rows]),
        br_x=np.array([float(r[3]) for r in branch_rows]),
        br_rating=np.array([float(r[5]) for r in branch_rows]),
        br_status=br_status,
    )


def bundled_case_names() -> tuple[str, ...]:
    files = resources.files("desgrid").joinpath("cases")
    return tuple(sorted(p.name[:-2] for p in files.iterdir() if p.name.endswith(".m")))


def load_case(name_or_path: str) -> GridCase:
    """Load a bundled case by name (e.g. 'case30') or any path to a case file."""
    p = Path(name_or_path)
    if p.suffix == ".m" and p.exists():
        return parse_case(p.read_text(encoding="utf-8"), name=p.stem)
    ref = resources.files("desgrid").joinpath(f"cases/{name_or_path}.m")
    if not ref.is_file():
        raise GridModelError(
            f"unknown case {name_or_path!r}; bundled: {', '.join(bundled_case_names())}"
        )
    return parse_case(ref.read_text(encoding="utf-8"), name=name_or_path)


# ---- topology ---------------------------------------------------------------


def build_adjacency(case: GridCase) -> dict[int, list[tuple[int, int]]]:
    """bus id -> [(branch id, other endpoint)] over in-service branches."""
    adj: dict[int, list[tuple[int, int]]] = {int(b): [] for b in case.bus_ids}
    for k in range(case.n_branch):
        if not case.br_status[k]:
            continue
        f, t = int(case.br_from[k]), int(case.br_to[k])
        adj[f].append((k + 1, t))
        adj[t].append((k + 1, f))
    return adj


def find_islands(case: GridCase) -> tuple[Island, ...]:
    """Connected components over in-service branches, ordered by least bus id."""
    adj = build_adjacency(case)
    seen: set[int] = set()
    islands: list[Island] = []
    online_gen_buses = {
        int(case.gen_bus[g])
        for g in range(case.n_gen)
        if case.gen_status[g] and case.gen_pmax[g] > 0
    }
    for start in sorted(adj):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        i = 0
        while i < len(comp):
            b = comp[i]
            i += 1
            for _, other in adj[b]:
                if other not in seen:
                    seen.add(other)
                    comp.append(other)
        buses = tuple(sorted(comp))
        inside = set(buses)
        branch_ids = tuple(
            k + 1
            for k in range(case.n_branch)
            if case.br_status[k] and int(case.br_from[k]) in inside and int(case.br_to[k]) in inside
        )
        gens_here = sorted(online_gen_buses & inside)
        islands.append(
            Island(
                buses=buses,
                branch_ids=branch_ids,
                has_generation=bool(gens_here),
                slack_bus=gens_here[0] if gens_here else buses[0],
            )
        )
    return tuple(islands)


# ---- DC power flow ----------------------------------------------------------


def _island_angles(
    case: GridCase, island: Island, inj_pu: np.ndarray, idx: dict[int, int]
) -> np.ndarray:
    """Bus angles for one island, slack pinned to zero."""
    buses = island.buses
    pos = {b: i for i, b in enumerate(buses)}
    n = len(buses)
    theta = np.zeros(n)
    if n == 1:
        return theta
    b_mat = np.zeros((n, n))
    for bid in island.branch_ids:
        k = bid - 1
        f, t = pos[int(case.br_from[k])], pos[int(case.br_to[k])]
        y = 1.0 / case.br_x[k]
        b_mat[f, f] += y
        b_mat[t, t] += y
        b_mat[f, t] -= y
        b_mat[t, f] -= y
    s = pos[island.slack_bus]
    keep = [i for i in range(n) if i != s]
    rhs = np.array([inj_pu[idx[buses[i]]] for i in keep])
    try:
        sol = np.linalg.solve(b_mat[np.ix_(keep, keep)], rhs)
    except np.linalg.LinAlgError as exc:
        raise GridModelError(f"singular island matrix (slack {island.slack_bus})") from exc
    for i, k in enumerate(keep):
        theta[k] = sol[i]
    return theta


def dc_power_flow(case: GridCase, injections: np.ndarray | None = None) -> FlowSolution:
    """Per-island DC flow; injections default to the case's own dispatch/loads.

    Raises GridModelError when any island's injections do not sum to zero
    within tolerance, since lossless DC flow has no solution there.
    """
    inj = case.injections() if injections is None else np.asarray(injections, dtype=float)
    if inj.shape != (case.n_bus,):
        raise GridModelError("injections vector has wrong length")
    idx = case.bus_index
    islands = find_islands(case)
    for isl in islands:
        s = sum(inj[idx[b]] for b in isl.buses)
        if abs(s) > _BALANCE_TOL_MW * max(1.0, sum(abs(inj[idx[b]]) for b in isl.buses)):
            raise GridModelError(
                f"island at bus {isl.buses[0]} injections unbalanced by {s:.6f} MW"
            )
    inj_pu = inj / case.base_mva
    angles = np.zeros(case.n_bus)
    for isl in islands:
        theta = _island_angles(case, isl, inj_pu, idx)
        for b, th in zip(isl.buses, theta):
            angles[idx[b]] = th
    flows = np.zeros(case.n_branch)
    for k in range(case.n_branch):
        if not case.br_status[k]:
            continue
        f, t = idx[int(case.br_from[k])], idx[int(case.br_to[k])]
        flows[k] = (angles[f] - angles[t]) / case.br_x[k] * case.base_mva
    return FlowSolution(angles=angles, flows_mw=flows, injections_mw=inj, islands=islands)


def compute_ptdf(case: GridCase, slack: int | None = None) -> PTDFMatrix:
    """Injection-shift factors for the island containing ``slack``.

    Column b holds branch flows under +1 MW injected at b and -1 MW at the
    slack; the slack column is zero, and all rows/columns outside the slack's
    island are zero.  ``slack`` defaults to the first island's slack bus.
    """
    islands = find_islands(case)
    if slack is None:
        slack = islands[0].slack_bus
    home = next((i for i in islands if slack in i.buses), None)
    if home is None:
        raise GridModelError(f"slack bus {slack} not present in any island")
    idx = case.bus_index
    buses = home.buses
    pos = {b: i for i, b in enumerate(buses)}
    n = len(buses)
    mat = np.zeros((case.n_branch, case.n_bus))
    if n > 1:
        b_mat = np.zeros((n, n))
        for bid in home.branch_ids:
            k = bid - 1
            f, t = pos[int(case.br_from[k])], pos[int(case.br_to[k])]
            y = 1.0 / case.br_x[k]
            b_mat[f, f] += y
            b_mat[t, t] += y
            b_mat[f, t] -= y
            b_mat[t, f] -= y
        s = pos[slack]
        keep = [i for i in range(n) if i != s]
        x_red = np.linalg.inv(b_mat[np.ix_(keep, keep)])
        # theta response to unit injection at each non-slack island bus
        theta = np.zeros((n, n))  # (bus, injection-bus) angle response
        theta[np.ix_(keep, keep)] = x_red
        for bid in home.branch_ids:
            k = bid - 1
            f, t = pos[int(case.br_from[k])], pos[int(case.br_to[k])]
            row = (theta[f, :] - theta[t, :]) / case.br_x[k]
            for b in buses:
                mat[k, idx[b]] = row[pos[b]]
    return PTDFMatrix(
        slack_bus=int(slack),
        matrix=mat,
        bus_ids=tuple(int(b) for b in case.bus_ids),
        island_buses=frozenset(buses),
    )


# ---- rebalance --------------------------------------------------------------


def rebalance_island(island: Island, case: GridCase) -> tuple[GridCase, float]:
    """Match island generation to island load; returns (new case, MW load lost).

    Generation ramps within [p_min, p_max] before any load is shed; a
    generation-deficit island sheds load proportionally; an island with no
    on-line generation loses all its load; when even minimum output exceeds
    load, generators trip largest-p_min first.  A balanced island comes back
    unchanged.
    """
    idx = case.bus_index
    bus_set = set(island.buses)
    gen_rows = [
        g for g in range(case.n_gen) if int(case.gen_bus[g]) in bus_set and case.gen_status[g]
    ]
    load_rows = [idx[b] for b in island.buses]
    load_total = float(sum(case.loads[i] for i in load_rows))
    gen_p = case.gen_p.copy()
    gen_status = case.gen_status.copy()
    loads = case.loads.copy()

    if not gen_rows:
        if load_total <= 0:
            return case, 0.0
        for i in load_rows:
            loads[i] = 0.0
        return case.with_loads(loads), load_total

    current = float(sum(gen_p[g] for g in gen_rows))
    pmax_tot = float(sum(case.gen_pmax[g] for g in gen_rows))
    pmin_tot = float(sum(case.gen_pmin[g] for g in gen_rows))
    in_bounds = all(
        case.gen_pmin[g] - 1e-9 <= gen_p[g] <= case.gen_pmax[g] + 1e-9 for g in gen_rows
    )
    if abs(current - load_total) <= _BALANCE_TOL_MW and in_bounds:
        return case, 0.0

    if pmax_tot < load_total - _BALANCE_TOL_MW:
        # deficit: everything to p_max, shed the rest proportionally
        for g in gen_rows:
            gen_p[g] = case.gen_pmax[g]
        lost = load_total - pmax_tot
        if load_total > 0:
            scale = pmax_tot / load_total
            for i in load_rows:
                loads[i] *= scale
        return case.with_loads(loads).with_dispatch(gen_p, gen_status), float(lost)

    # trip units whose combined minimum output exceeds the load
    active = list(gen_rows)
    while active and sum(case.gen_pmin[g] for g in active) > load_total + _BALANCE_TOL_MW:
        drop = max(active, key=lambda g: (case.gen_pmin[g], -g))
        gen_status[drop] = False
        gen_p[drop] = 0.0
        active.remove(drop)
    if not active:
        if load_total <= _BALANCE_TOL_MW:
            return case.with_dispatch(gen_p, gen_status), 0.0
        for i in load_rows:
            loads[i] = 0.0
        return case.with_loads(loads).with_dispatch(gen_p, gen_status), load_total

    pmin_tot = float(sum(case.gen_pmin[g] for g in active))
    pmax_tot = float(sum(case.gen_pmax[g] for g in active))
    span = pmax_tot - pmin_tot
    frac = 0.0 if span <= 0 else (load_total - pmin_tot) / span
    for g in active:
        gen_p[g] = case.gen_pmin[g] + frac * (case.gen_pmax[g] - case.gen_pmin[g])
    return case.with_loads(loads).with_dispatch(gen_p, gen_status), 0.0


def balance_case(case: GridCase) -> tuple[GridCase, float]:
    """Rebalance every island; returns (new case, total MW load lost)."""
    total = 0.0
    for isl in find_islands(case):
        case, lost = rebalance_island(isl, case)
        total += lost
    return case, total


def repair_ratings(case: GridCase, alpha: float = 2.0, floor_mw: float = 10.0) -> GridCase:
    """Give rating-0 ('unlimited') branches max(alpha * |base flow|, floor_mw).

    Base flows are solved on a balanced copy of the case; branches with a
    positive rating are untouched.
    """
    balanced, _ = balance_case(case)
    flows = dc_power_flow(balanced).flows_mw
    ratings = case.br_rating.copy()
    for k in range(case.n_branch):
        if ratings[k] <= 0:
            ratings[k] = max(alpha * abs(flows[k]), floor_mw)
    return case.with_ratings(ratings)


# ---- export -----------------------------------------------------------------


def export_flows_csv(case: GridCase, sol: FlowSolution, path) -> None:
    """Write per-branch flows: branch_id,from,to,flow_mw,rating_mw,loading_pct.

    Out-of-service branches carry an empty loading_pct field.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branch_id", "from", "to", "flow_mw", "rating_mw", "loading_pct"])
        for k in range(case.n_branch):
            if case.br_status[k]:
                rating = case.br_rating[k]
                pct = "" if rating <= 0 else f"{100.0 * abs(sol.flows_mw[k]) / rating:.6f}"
                flow = f"{sol.flows_mw[k]:.6f}"
            else:
                pct = ""
                flow = f"{0.0:.6f}"
            w.writerow(
                [k + 1, int(case.br_from[k]), int(case.br_to[k]), flow, f"{case.br_rating[k]:.6f}", pct]
            )
