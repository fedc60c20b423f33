#!/usr/bin/env python3
"""Generate the bundled case118/case300 stand-in networks.

The classic 118- and 300-bus datasets are not redistributable here, so the
bundle ships synthetic networks at the same published dimensions (buses,
branches, generators).  Topology is a ring of consecutive buses plus random
chords, which keeps the graph meshed enough that single line outages
redistribute flow instead of islanding.  Branch ratings are left at 0
(unrated); consumers call repair_ratings() to derive ratings from the
balanced base-case flows.

Deterministic: fixed seeds, byte-identical output on rerun.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from desgrid.grid import balance_case, dc_power_flow, find_islands, parse_case

CASES_DIR = Path(__file__).resolve().parents[1] / "src" / "desgrid" / "cases"


def build_network(
    name: str,
    n_bus: int,
    n_branch: int,
    n_gen: int,
    seed: int,
    load_fraction: float,
    load_range: tuple[float, float],
    n_plants: int,
) -> str:
    rng = np.random.Generator(np.random.PCG64(seed))

    # ring backbone for guaranteed connectivity, then mostly short chords so
    # an outage redistributes onto nearby parallel paths (meshed texture)
    # with a few long shortcuts
    edges: list[tuple[int, int]] = [(i, i + 1) for i in range(1, n_bus)]
    edges.append((1, n_bus))
    existing = {tuple(sorted(e)) for e in edges}
    kinds: list[str] = []
    while len(edges) < n_branch:
        if rng.random() < 0.85:
            i = int(rng.integers(1, n_bus + 1))
            d = int(rng.integers(2, 7))
            j = (i - 1 + d) % n_bus + 1
            kind = "local"
        else:
            i, j = (int(v) for v in rng.choice(np.arange(1, n_bus + 1), size=2, replace=False))
            kind = "long"
        key = (min(i, j), max(i, j))
        if key[0] == key[1] or key in existing or key[1] - key[0] in (1, n_bus - 1):
            continue
        existing.add(key)
        edges.append(key)
        kinds.append(kind)

    ring_xs = np.round(rng.uniform(0.02, 0.12, size=n_bus), 4)
    chord_xs = np.array(
        [
            round(rng.uniform(0.04, 0.20) if k == "local" else rng.uniform(0.20, 0.50), 4)
            for k in kinds
        ]
    )
    br_x = np.concatenate([ring_xs, chord_xs])

    # loads at a subset of buses
    n_load = int(round(load_fraction * n_bus))
    load_buses = np.sort(rng.choice(np.arange(1, n_bus + 1), size=n_load, replace=False))
    load_vals = np.round(rng.uniform(*load_range, size=n_load), 1)
    loads = dict(zip(load_buses.tolist(), load_vals.tolist()))
    total_load = float(sum(loads.values()))

    # generation is clustered at plant sites: units sit on consecutive buses
    # around each site, so losing a corridor strands real load instead of
    # re-supplying every fragment locally
    sites = rng.choice(np.arange(1, n_bus + 1), size=n_plants, replace=False)
    gen_bus_list: list[int] = []
    used: set[int] = set()
    k = 0
    while len(gen_bus_list) < n_gen:
        site = int(sites[k % n_plants])
        offset = k // n_plants
        bus = (site - 1 + offset) % n_bus + 1
        k += 1
        if bus in used:
            continue
        used.add(bus)
        gen_bus_list.append(bus)
    gen_buses = np.array(sorted(gen_bus_list), dtype=int)
    site_of = {int(b): np.argmin(np.abs(sites - b)) for b in gen_bus_list}
    plant_scale = rng.uniform(0.5, 3.0, size=n_plants)
    raw = np.array(
        [plant_scale[site_of[int(b)]] * rng.uniform(0.8, 1.2) for b in gen_buses]
    )
    pmax = np.maximum(10.0, np.round(raw * (1.6 * total_load / raw.sum()) / 10.0) * 10.0)
    pg = np.round(pmax * (total_load / pmax.sum()), 2)
    pg[int(np.argmax(pmax))] += round(total_load - pg.sum(), 6)

    lines = [
        f"function mpc = {name}",
        f"% Synthetic {n_bus}-bus network at the classic case dimensions",
        f"% ({n_bus} buses, {n_gen} generators, {n_branch} branches).  Not the IEEE",
        "% data: topology and parameters are generated deterministically by",
        "% tools/build_case_data.py.  Branch ratings are 0 (unrated); apply",
        "% repair_ratings() before running overload studies.",
        "",
        "mpc.version = '2';",
        "mpc.baseMVA = 100;",
        "",
        "%% bus data",
        "%\tbus_i\ttype\tPd",
        "mpc.bus = [",
    ]
    for b in range(1, n_bus + 1):
        btype = 3 if b == 1 else (2 if b in set(gen_buses.tolist()) else 1)
        lines.append(f"\t{b}\t{btype}\t{loads.get(b, 0.0):g};")
    lines += [
        "];",
        "",
        "%% generator data",
        "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin",
        "mpc.gen = [",
    ]
    for g in range(n_gen):
        lines.append(
            f"\t{int(gen_buses[g])}\t{pg[g]:g}\t0\t0\t0\t1\t100\t1\t{pmax[g]:g}\t0;"
        )
    lines += [
        "];",
        "",
        "%% branch data",
        "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus",
        "mpc.branch = [",
    ]
    for k, (f, t) in enumerate(edges):
        lines.append(f"\t{f}\t{t}\t0\t{br_x[k]:g}\t0\t0\t0\t0\t0\t0\t1;")
    lines += ["];", ""]
    return "\n".join(lines)


def validate(text: str, name: str, n_bus: int, n_branch: int, n_gen: int) -> None:
    case = parse_case(text, name=name)
    assert case.n_bus == n_bus and case.n_branch == n_branch and case.n_gen == n_gen
    assert len(find_islands(case)) == 1, "network must be connected"
    balanced, _ = balance_case(case)
    sol = dc_power_flow(balanced)
    inj = balanced.injections()
    assert abs(inj.sum()) < 1e-6
    print(
        f"{name}: {n_bus} buses / {n_branch} branches / {n_gen} gens, "
        f"load {case.total_load():.1f} MW, max |flow| {np.max(np.abs(sol.flows_mw)):.1f} MW"
    )
    # the N-2 studies drop two branches; the mesh must stay connected for
    # the low-id pairs the fixtures use
    for pair in [(23, 39), (34, 37)]:
        probe = case.with_branch_out(pair)
        assert len(find_islands(probe)) == 1, f"pair {pair} must not island {name}"


def main() -> None:
    specs = [
        ("case118", 118, 186, 54, 118118, 0.70, (15.0, 90.0), 9),
        ("case300", 300, 411, 69, 300300, 0.68, (10.0, 120.0), 12),
    ]
    CASES_DIR.mkdir(parents=True, exist_ok=True)
    for name, n_bus, n_branch, n_gen, seed, frac, rng_range, n_plants in specs:
        text = build_network(name, n_bus, n_branch, n_gen, seed, frac, rng_range, n_plants)
        validate(text, name, n_bus, n_branch, n_gen)
        (CASES_DIR / f"{name}.m").write_text(text, encoding="utf-8")
        print(f"wrote {CASES_DIR / (name + '.m')}")


if __name__ == "__main__":
    main()
