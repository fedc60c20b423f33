"""Command line entry points.

Verbs: parse-case, build-supervisors, run-scenario, monte-carlo, ccd,
verify, report.  Results go to stdout as JSON (or plain lines for verify);
failures print one machine-readable JSON object to stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .automata import AutomatonFormatError, compose_all, is_sub_automaton
from .cascade import MODES, CascadeError, ScenarioConfig, export_trace_csv, export_trace_summary, run_cascade
from .experiments import (
    ExperimentError,
    MonteCarloConfig,
    compute_ccd,
    export_results,
    prepare_case,
    run_monte_carlo,
    sample_scenarios,
)
from .grid import (
    GridModelError,
    balance_case,
    compute_ptdf,
    dc_power_flow,
    export_flows_csv,
    load_case,
    repair_ratings,
)
from .modular import (
    ModularError,
    build_node_supervisors,
    build_specification,
    build_subsystem,
    demo_two_node_case,
    save_controller_bundle,
    synthesize_modular,
    verify_safety,
)
from .plots import render_report_figures
from .shedding import ShedError, ShedLP, solve_lp
from .supervisory import SpecificationAutomaton, build_specification_from_states, check_f_controllable, supremal_f_controllable

_ERRORS = (AutomatonFormatError, GridModelError, ShedError, ModularError, CascadeError, ExperimentError, ValueError, OSError)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _fail(kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}, sort_keys=True), file=sys.stderr)
    return 2


def _parse_pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError("expected --pair A,B with two branch ids")
    a, b = (int(p) for p in parts)
    if a == b:
        raise ValueError("pair branches must differ")
    return tuple(sorted((a, b)))


def _prepared(args) -> "GridCase":  # noqa: F821 (forward name only for docs)
    case = load_case(args.case)
    if getattr(args, "alpha", None):
        case = repair_ratings(case, alpha=args.alpha)
    scale = getattr(args, "scale", 1.0)
    if scale != 1.0:
        case = case.with_loads(case.loads * scale)
    return case


def _cmd_parse_case(args) -> int:
    case = load_case(args.case)
    balanced, _ = balance_case(case)  # source dispatch is rarely lossless-exact
    sol = dc_power_flow(balanced)
    loading = sol.loading(balanced)
    info = {
        "case": case.name,
        "buses": case.n_bus,
        "branches": case.n_branch,
        "generators": case.n_gen,
        "total_load_mw": round(case.total_load(), 6),
        "islands": len(sol.islands),
        "max_loading": round(float(np.max(loading[np.isfinite(loading)])), 6),
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        export_flows_csv(balanced, sol, out / "flows.csv")
        info["flows_csv"] = str(out / "flows.csv")
    _emit(info)
    return 0


def _cmd_build_supervisors(args) -> int:
    case = _prepared(args)
    ctrl = build_node_supervisors(case, max_states=args.max_states)
    manifest = save_controller_bundle(ctrl, args.out)
    lazy = sum(1 for m in ctrl.members if type(m).__name__ == "LazyNodeSupervisor")
    _emit({
        "case": case.name,
        "nodes": len(ctrl.members),
        "materialized": len(ctrl.members) - lazy,
        "lazy": lazy,
        "manifest": str(manifest),
    })
    return 0


def _cmd_run_scenario(args) -> int:
    case = _prepared(args)
    scn = ScenarioConfig(
        initial_outage=_parse_pair(args.pair),
        control_mode=args.mode,
        delay_ticks=args.delay,
        max_ticks=args.max_ticks,
    )
    trace = run_cascade(case, scn)
    summary = trace.summary()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        export_trace_csv(trace, out / "trace.csv")
        export_trace_summary(trace, out / "trace_summary.json")
        summary["out"] = str(out)
    _emit(summary)
    return 0


def _mc_config(args) -> MonteCarloConfig:
    return MonteCarloConfig(
        case=args.case,
        n_scenarios=args.n,
        seed=args.seed,
        sigma=args.sigma,
        modes=tuple(args.modes.split(",")),
        delay_ticks=args.delay,
        load_scale=args.scale,
        rating_alpha=args.alpha,
        workers=args.workers,
    )


def _cmd_monte_carlo(args) -> int:
    agg = run_monte_carlo(_mc_config(args))
    files = export_results(agg, args.out)
    _emit({
        "case": agg.case_name,
        "n_scenarios": agg.n_scenarios,
        "medians": {m: agg.medians[m] for m in agg.modes},
        "files": [str(p) for p in files],
    })
    return 0


def _cmd_ccd(args) -> int:
    if args.infile == "-":
        text = sys.stdin.read()
    else:
        text = Path(args.infile).read_text(encoding="utf-8")
    values = [float(tok) for tok in text.split()]
    pts = compute_ccd(values)
    lines = ["x,fraction_ge"] + [f"{x:.6f},{f:.6f}" for x, f in pts]
    body = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    return 0


def _cmd_report(args) -> int:
    agg = run_monte_carlo(_mc_config(args))
    out = Path(args.out)
    files = export_results(agg, out)
    figures = render_report_figures(agg, out)
    _emit({
        "case": agg.case_name,
        "n_scenarios": agg.n_scenarios,
        "medians": {m: agg.medians[m] for m in agg.modes},
        "files": [str(p) for p in files],
        "figures": [str(p) for p in figures],
    })
    return 0


# ---------------------------------------------------------------- verify
def _random_plant(rng: np.random.Generator):
    from .automata import Automaton, EventTable

    n_states = int(rng.integers(2, 5))
    n_events = int(rng.integers(2, 5))
    table = EventTable()
    labels = [f"e{i}" for i in range(n_events)]
    for lab in labels:
        table.add(lab, controllable=bool(rng.integers(0, 2)), forcible=bool(rng.integers(0, 2)))
    states = [f"s{i}" for i in range(n_states)]
    delta: dict[tuple[int, str], int] = {}
    for q in range(n_states):
        for e in labels:
            if rng.random() < 0.55:
                delta[(q, e)] = int(rng.integers(0, n_states))
    return Automaton("rand", table, labels, states, delta, 0)


def _verify_checks() -> list[tuple[str, bool, str]]:
    out: list[tuple[str, bool, str]] = []

    def record(name: str, ok: bool, detail: str = "") -> None:
        out.append((name, ok, detail))

    case = demo_two_node_case()
    spec1, plant1 = build_subsystem(case, 1)
    sa = build_specification(plant1)
    record("component-counts", plant1.n_states == 32 and sa.spec.n_states == 31,
           f"plant={plant1.n_states} spec={sa.spec.n_states}")

    pipe = synthesize_modular(plant1, sa, node=1, subsystem=spec1, method="pipeline")
    strict = synthesize_modular(plant1, sa, node=1, subsystem=spec1, method="forcible")
    record("pipeline-zero-removal",
           pipe.realization.realization.n_states == 31 and not pipe.realization.removed_states,
           f"states={pipe.realization.realization.n_states}")
    record("strict-synthesis-prunes", strict.realization.realization.n_states == 24,
           f"states={strict.realization.realization.n_states}")

    rng = np.random.Generator(np.random.PCG64(2024))
    bad = 0
    for _ in range(20):
        plant = _random_plant(rng)
        legal = {plant.label(0)} | {
            lab for lab in plant.state_labels if rng.random() < 0.7
        }
        sa_r = build_specification_from_states(plant, legal)
        sup = supremal_f_controllable(sa_r)
        if sup.is_empty:
            continue
        ok_fc, _ = check_f_controllable(
            SpecificationAutomaton(plant, sup.realization, frozenset(sup.realization.state_labels))
        )
        if not ok_fc or not is_sub_automaton(sup.realization, sa_r.spec):
            bad += 1
    record("random-synthesis-fcontrollable", bad == 0, f"violations={bad}")

    ctrl = build_node_supervisors(case, method="forcible")
    plant_g = compose_all([m.plant for m in ctrl.members])
    sa_g = build_specification(plant_g)
    record("closed-loop-safety", verify_safety(ctrl, plant_g, sa_g.spec, bound=4), "")

    lp = ShedLP(node=2, buses=(2,), branch_ids=(1,),
                flow_rows=np.array([[-1.0]]), rhs=np.array([-20.0]),
                critical_row=0, bounds=np.array([60.0]))
    sol = solve_lp(lp)
    record("lp-exact-fixture", sol.status == "optimal" and abs(sol.objective - 20.0) < 1e-9,
           f"objective={sol.objective}")

    from .grid import GridCase
    tri = GridCase(
        name="triangle",
        base_mva=100.0,
        bus_ids=np.array([1, 2, 3]),
        loads=np.array([0.0, 0.0, 90.0]),
        gen_bus=np.array([1]), gen_p=np.array([90.0]),
        gen_pmax=np.array([200.0]), gen_pmin=np.array([0.0]),
        gen_status=np.array([True]),
        br_from=np.array([1, 1, 2]), br_to=np.array([2, 3, 3]),
        br_x=np.array([0.1, 0.1, 0.1]),
        br_rating=np.array([100.0, 100.0, 100.0]),
        br_status=np.array([True, True, True]),
    )
    sol_t = dc_power_flow(tri)
    want = np.array([30.0, 60.0, 30.0])
    record("triangle-flows", bool(np.all(np.abs(sol_t.flows_mw - want) <= 1e-9)),
           f"flows={sol_t.flows_mw.tolist()}")

    c30, _ = balance_case(load_case("case30"))
    ptdf = compute_ptdf(c30)
    base = dc_power_flow(c30)
    bus = 7
    inj = base.injections_mw.copy()
    inj[c30.bus_index[bus]] += 1.0
    inj[c30.bus_index[ptdf.slack_bus]] -= 1.0
    fd = dc_power_flow(c30, inj).flows_mw - base.flows_mw
    col = ptdf.column(bus)
    record("ptdf-finite-difference", bool(np.max(np.abs(fd - col)) <= 1e-6),
           f"max_err={float(np.max(np.abs(fd - col))):.2e}")

    cfg = MonteCarloConfig(case="case30", n_scenarios=5, seed=7)
    pc = prepare_case(cfg)
    s1 = sample_scenarios(cfg, pc)
    s2 = sample_scenarios(cfg, pc)
    same = all(
        a.initial_outage == b.initial_outage
        and np.array_equal(a.load_multipliers, b.load_multipliers)
        for a, b in zip(s1, s2)
    )
    record("sampling-determinism", same, "")
    return out


def _cmd_verify(_args) -> int:
    failures = 0
    for name, ok, detail in _verify_checks():
        tag = "ok  " if ok else "FAIL"
        suffix = f"  {detail}" if detail and not ok else ""
        print(f"{tag} {name}{suffix}")
        if not ok:
            failures += 1
    if failures:
        return _fail("verify", f"{failures} check(s) failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="desgrid", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, *, out_required=False):
        sp.add_argument("--case", required=True, help="bundled case name or path to a case file")
        sp.add_argument("--out", required=out_required, default=None, help="output directory")

    sp = sub.add_parser("parse-case", help="parse a case and print its dimensions")
    add_common(sp)
    sp.set_defaults(func=_cmd_parse_case)

    sp = sub.add_parser("build-supervisors", help="synthesize node supervisors and save the bundle")
    add_common(sp, out_required=True)
    sp.add_argument("--alpha", type=float, default=None, help="repair ratings with this headroom factor")
    sp.add_argument("--scale", type=float, default=1.0, help="uniform load scale")
    sp.add_argument("--max-states", type=int, default=4096, dest="max_states")
    sp.set_defaults(func=_cmd_build_supervisors)

    sp = sub.add_parser("run-scenario", help="run one N-2 scenario to convergence")
    add_common(sp)
    sp.add_argument("--pair", required=True, help="initial outage branch pair A,B")
    sp.add_argument("--mode", default="none", choices=MODES)
    sp.add_argument("--delay", type=int, default=0)
    sp.add_argument("--max-ticks", type=int, default=60, dest="max_ticks")
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.set_defaults(func=_cmd_run_scenario)

    for verb, fn in (("monte-carlo", _cmd_monte_carlo), ("report", _cmd_report)):
        sp = sub.add_parser(verb, help=f"{verb} over sampled N-2 scenarios")
        add_common(sp, out_required=True)
        sp.add_argument("--n", type=int, required=True, help="number of scenarios")
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--sigma", type=float, default=0.15)
        sp.add_argument("--modes", default="none,modular,central")
        sp.add_argument("--delay", type=int, default=0)
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--scale", type=float, default=1.0)
        sp.add_argument("--workers", type=int, default=1)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("ccd", help="complementary cumulative distribution of a number list")
    sp.add_argument("--in", dest="infile", required=True, help="file of numbers, or - for stdin")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_ccd)

    sp = sub.add_parser("verify", help="run the property battery on small instances")
    sp.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        return _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
