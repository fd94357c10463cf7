"""Command-line entry point: ``v2x-alloc {allocate,sweep,simulate,validate}``.

Exit codes: 0 success (complete allocation / all checks pass), 1 failed
validation, 2 unreadable or invalid input, 3 infeasible latency bound,
4 partial allocation (some DUE left without a band).

CSV output of ``sweep`` and ``simulate`` uses one fixed column set,
``CSV_COLUMNS``. Times are in ms, powers in dBm, rates in packets/s and
capacities in bits/s/Hz (``*_bps`` metrics are scaled by the bandwidth).
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .allocator import POWER_METHODS, Status, allocate, total_objective
from .channel import generate_scenario, watts_to_dbm
from .queueing import is_stable, mean_sojourn_time
from .scenario_file import ScenarioFileError, default_scenario_path, load_scenario
from .simulator import QUEUEING, SimConfig, simulate_due_queue, simulate_system
from .validation import CHECKS, MUTATIONS, format_table, run_check

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_PARTIAL = 0, 1, 2, 3, 4
STATUS_EXIT = {Status.COMPLETE: EXIT_OK, Status.PARTIAL: EXIT_PARTIAL, Status.INFEASIBLE: EXIT_INFEASIBLE}

CSV_COLUMNS = ("sweep_param", "value", "metric", "link_id", "analytic", "empirical_mean",
               "ci_halfwidth", "seed_count")
PAIR_COLUMNS = ("cue", "due", "p_cue_dbm", "p_due_dbm", "outage", "outage_budget", "busy",
                "latency_ms", "cue_capacity_bpshz", "cue_capacity_bps")

# sweep parameter -> (scenario key, converter from the CLI unit to the file unit)
SWEEP_PARAMS = {
    "lambda": ("arrival_rate", lambda v: v),
    "mu0": ("latency_bound_s", lambda v: v * 1e-3),  # given in ms
    "gamma0": ("sinr_threshold_db", lambda v: v),
    "p0": (None, None),
}


class InputError(Exception):
    pass


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(round(x, 12))


def _parse_sets(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key.strip():
            raise InputError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _load(args, extra=None):
    overrides = _parse_sets(getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = str(args.seed)
    overrides.update(extra or {})
    return load_scenario(args.scenario, overrides=overrides)


def _sim_config(args, master_seed):
    return SimConfig(slots=args.slots, seeds=tuple(range(args.seeds)), master_seed=master_seed)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _write_rows(path, columns, rows):
    fh, close = _open_out(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
    finally:
        if close:
            fh.close()


# --------------------------------------------------------------------------
# allocate


def _pair_rows(result, config):
    rows = []
    for m, k in result.assignment.pairs:
        s = result.solution(m, k)
        rows.append((m, k, _fmt(watts_to_dbm(s.p_cue)), _fmt(watts_to_dbm(s.p_due)), _fmt(s.outage),
                     _fmt(result.outage_budget[k]), _fmt(s.busy), _fmt(result.per_due_latency[k] * 1e3),
                     _fmt(s.capacity), _fmt(s.capacity * config.bandwidth)))
    for m in range(config.num_cues):
        if result.assignment.due_of(m) is None:
            c = result.per_cue_capacity[m]
            rows.append((m, "", _fmt(watts_to_dbm(config.max_power_cue)), "", "", "", "", "",
                         _fmt(c), _fmt(c * config.bandwidth)))
    for k in result.unmatched_dues:
        rows.append(("", k, "", "", "", _fmt(result.outage_budget[k]), "", "", "", ""))
    return rows


def report_text(result, config, gains):
    lines = [
        f"status: {result.status.value}",
        f"matched pairs: {len(result.assignment.pairs)} of {config.num_dues} DUEs",
        f"sum capacity of matched CUEs: {result.sum_capacity:.4f} bits/s/Hz",
        f"sum capacity of all CUEs: {total_objective(result, gains, config):.4f} bits/s/Hz",
        f"latency bound: {config.latency_bound * 1e3:g} ms, capacity floor: {config.capacity_floor:g} bits/s/Hz",
    ]
    if result.outage_target is not None:
        lines.append(f"fixed outage target p0 = {result.outage_target:g}")
    lines += [f"note: {n}" for n in result.notes]
    lines.append("")
    head = f"{'CUE':>4} {'DUE':>4} {'Pc[dBm]':>8} {'Pd[dBm]':>8} {'outage':>8} {'busy':>7} {'mu[ms]':>8} {'R[b/s/Hz]':>10}"
    lines.append(head)
    for m, k in result.assignment.pairs:
        s = result.solution(m, k)
        lines.append(f"{m:>4} {k:>4} {watts_to_dbm(s.p_cue):8.2f} {watts_to_dbm(s.p_due):8.2f} "
                     f"{s.outage:8.4f} {s.busy:7.4f} {result.per_due_latency[k] * 1e3:8.4f} {s.capacity:10.4f}")
    for m in range(config.num_cues):
        if result.assignment.due_of(m) is None:
            lines.append(f"{m:>4} {'-':>4} {watts_to_dbm(config.max_power_cue):8.2f} {'-':>8} {'-':>8} "
                         f"{'-':>7} {'-':>8} {result.per_cue_capacity[m]:10.4f}")
    for k in result.unmatched_dues:
        why = "latency bound unattainable" if k in result.infeasible_dues else "no feasible band"
        lines.append(f"{'-':>4} {k:>4}  unmatched ({why})")
    return "\n".join(lines)


def cmd_allocate(args):
    config = _load(args)
    gains = generate_scenario(config)
    result = allocate(config, gains, outage_target=args.p0, power_method=args.power_method)
    print(report_text(result, config, gains))
    if args.output:
        _write_rows(args.output, PAIR_COLUMNS, _pair_rows(result, config))
    return STATUS_EXIT[result.status]


# --------------------------------------------------------------------------
# sweep


def _mode_label(p0):
    return "proposed" if p0 is None else f"p0={p0:g}"


def _point_rows(param, value, mode, config, sim):
    """Allocate then simulate one grid point; failures become rows."""
    p0 = value if param == "p0" else mode
    label = _mode_label(p0)
    rows = []

    def row(metric, link, analytic, st_mean=math.nan, ci=math.nan, n=0):
        rows.append((param, _fmt(value), f"{label}:{metric}", link, _fmt(analytic), _fmt(st_mean),
                     _fmt(ci), n))

    gains = generate_scenario(config)
    try:
        result = allocate(config, gains, outage_target=p0)
    except ValueError as exc:
        row(f"error:{type(exc).__name__}", "", math.nan)
        return rows
    row("matched_dues", "", len(result.assignment.pairs))
    row(f"status:{result.status.value}", "", 1)
    if not result.assignment.pairs:
        return rows
    st = simulate_system(result, gains, config, sim)
    n = len(sim.seeds)
    analytic = total_objective(result, gains, config)
    row("sum_capacity_bpshz", "all", analytic, st.sum_capacity, st.sum_capacity_ci, n)
    bw = config.bandwidth
    row("sum_capacity_bps", "all", analytic * bw, st.sum_capacity * bw, st.sum_capacity_ci * bw, n)
    for m, k in result.assignment.pairs:
        s = result.solution(m, k)
        d = st.per_due[k]
        row("latency_ms", k, result.per_due_latency[k] * 1e3, d.mean_sojourn * 1e3, d.sojourn_ci * 1e3, n)
        row("outage", k, s.outage, d.empirical_outage, d.outage_ci, n)
        row("busy", k, s.busy, d.empirical_busy, d.busy_ci, n)
    for m in range(config.num_cues):
        c = st.per_cue[m]
        row("cue_capacity_bpshz", m, result.per_cue_capacity[m], c.empirical_capacity, c.capacity_ci, n)
    for k in result.unmatched_dues:
        row("latency_ms", k, math.nan)
    return rows


def _sweep_job(job):
    param, value, mode, scenario, overrides, slots, seeds, master = job
    sim = SimConfig(slots=slots, seeds=tuple(range(seeds)), master_seed=master)
    try:
        config = load_scenario(scenario, overrides=overrides)
    except ScenarioFileError as exc:
        return [(param, _fmt(value), f"{_mode_label(mode)}:error:invalid_scenario", "", "nan", "nan",
                 "nan", 0)], str(exc)
    return _point_rows(param, value, mode, config, sim), None


def _grid(args):
    if args.values:
        vals = [float(v) for v in args.values.split(",") if v.strip()]
    elif args.range:
        try:
            start, stop, step = (float(x) for x in args.range.split(":"))
        except ValueError:
            raise InputError("--range expects start:stop:step") from None
        if step <= 0:
            raise InputError("--range step must be positive")
        vals = [float(v) for v in np.round(np.arange(start, stop + step / 2, step), 12)]
    else:
        vals = []
    if not vals:
        raise InputError("sweep grid is empty")
    return vals


def cmd_sweep(args):
    grid = _grid(args)
    key, conv = SWEEP_PARAMS[args.param]
    base = _parse_sets(args.set)
    seed = args.seed
    if seed is not None:
        base["rng_seed"] = str(seed)
    load_scenario(args.scenario, overrides=base)  # fail early on a broken file
    modes = [None] if args.param == "p0" else [None] + list(args.p0 or ())
    jobs = []
    for value in grid:
        ov = dict(base)
        if key is not None:
            ov[key] = repr(float(conv(value)))
        for mode in modes:
            jobs.append((args.param, value, mode, str(args.scenario), ov, args.slots, args.seeds,
                         seed if seed is not None else 0))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))  # map keeps grid order
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = []
    for point_rows, err in results:
        if err:
            print(f"warning: {err}", file=sys.stderr)
        rows.extend(point_rows)
    _write_rows(args.output, CSV_COLUMNS, rows)
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    seed = args.seed if args.seed is not None else 0
    sim = _sim_config(args, seed)
    rows = []
    if args.queue:
        rates = [float(v) for v in args.rates.split(",")]
        outages = [float(v) for v in args.outages.split(",")]
        qsim = SimConfig(slots=args.slots, seeds=sim.seeds, master_seed=seed, measure_mode=QUEUEING)
        T = args.slot_ms * 1e-3
        for i, lam in enumerate(rates):
            for j, q in enumerate(outages):
                if not lam * T < 1.0:
                    raise InputError(f"lambda*T must be < 1 (lambda={lam:g})")
                st = simulate_due_queue(lam, T, q, qsim, link_id=i * len(outages) + j)
                mu = mean_sojourn_time(lam, T, q) * 1e3 if is_stable(lam, T, q) else math.inf
                rows.append(("lambda", _fmt(lam), f"q={q:g}:sojourn_ms", "0", _fmt(mu),
                             _fmt(st.mean_sojourn * 1e3), _fmt(st.sojourn_ci * 1e3), st.seed_count))
                rows.append(("lambda", _fmt(lam), f"q={q:g}:unstable", "0", _fmt(int(not is_stable(lam, T, q))),
                             _fmt(int(st.unstable)), "nan", st.seed_count))
    else:
        config = _load(args)
        rows = _point_rows("rng_seed", config.rng_seed, args.p0, config, sim)
    _write_rows(args.output, CSV_COLUMNS, rows)
    return EXIT_OK


# --------------------------------------------------------------------------
# validate


def cmd_validate(args):
    names = args.only.split(",") if args.only else list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise InputError(f"unknown checks {unknown}; choose from {list(CHECKS)}")
    results = []
    for name in names:
        r = run_check(name, size="quick" if args.quick else "full", mutate=args.mutate)
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<12} {r.title} ({r.seconds:.1f} s)", flush=True)
        results.append(r)
    print()
    print(format_table(results))
    if args.output:
        rows = [(r.name, row.metric, row.expected, row.observed, row.tolerance,
                 "pass" if row.passed else "fail") for r in results for row in r.rows]
        _write_rows(args.output, ("check", "metric", "expected", "observed", "tolerance", "result"), rows)
    failed = [r.name for r in results if not r.passed]
    print(f"\n{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_VALIDATION if failed else EXIT_OK


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="v2x-alloc", description="Latency-aware spectrum and power allocation for V2X.")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_opts(sp):
        sp.add_argument("--scenario", type=Path, default=default_scenario_path(),
                        help="scenario INI file (default: bundled highway scenario)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a scenario key; repeatable")
        sp.add_argument("--seed", type=int, help="drop seed; also the simulation master seed")

    def sim_opts(sp):
        sp.add_argument("--slots", type=int, default=20_000, help="slots per block (default 20000)")
        sp.add_argument("--seeds", type=int, default=20, help="independent blocks (default 20)")

    a = sub.add_parser("allocate", help="allocate one scenario and print the report")
    scenario_opts(a)
    a.add_argument("--p0", type=float, help="fixed outage target instead of the latency-derived budget")
    a.add_argument("--power-method", choices=sorted(POWER_METHODS), default="closed-form")
    a.add_argument("--output", help="CSV file for the per-link table")
    a.set_defaults(func=cmd_allocate)

    s = sub.add_parser("sweep", help="allocate and simulate over a parameter grid")
    scenario_opts(s)
    sim_opts(s)
    s.add_argument("--param", choices=sorted(SWEEP_PARAMS), default="lambda",
                   help="lambda [packets/s], mu0 [ms], gamma0 [dB] or p0")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--values", help="comma-separated grid")
    g.add_argument("--range", help="start:stop:step grid, stop included")
    s.add_argument("--p0", type=float, action="append",
                   help="also run the fixed-outage baseline at this p0; repeatable")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--output", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("simulate", help="simulate one allocated scenario, or bare queues with --queue")
    scenario_opts(m)
    sim_opts(m)
    m.add_argument("--p0", type=float, help="fixed outage target for the scenario allocation")
    m.add_argument("--queue", action="store_true", help="Bernoulli-failure queues instead of a scenario")
    m.add_argument("--rates", default="1000,2000,3000,4000", help="arrival rates for --queue [packets/s]")
    m.add_argument("--outages", default="0.1,0.3,0.5", help="per-slot outage probabilities for --queue")
    m.add_argument("--slot-ms", type=float, default=0.2, help="slot length for --queue [ms]")
    m.add_argument("--output", help="CSV path (default stdout)")
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="run the numerical self-checks")
    v.add_argument("--quick", action="store_true", help="smaller samples, same tolerances")
    v.add_argument("--only", help=f"comma-separated subset of: {','.join(CHECKS)}")
    v.add_argument("--mutate", choices=MUTATIONS, help="perturb the analytic model to test the harness")
    v.add_argument("--output", help="CSV file for the result table")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("slots", "seeds", "jobs"):
        if getattr(args, name, 1) < 1:
            parser.error(f"--{name} must be >= 1")
    try:
        return args.func(args)
    except ScenarioFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
