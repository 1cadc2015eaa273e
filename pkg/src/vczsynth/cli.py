"""Command line: ``vczsynth {feasibility,synthesize,simulate,benchmark}``.

Exit codes: 0 success, 2 infeasible, 3 monitor breach, 4 scenario/parse error.
Log verbosity comes from ``VCZSYNTH_LOG`` (e.g. ``DEBUG``); default ``WARNING``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .abstraction import build_model, load_model, save_model
from .artifacts import dumps_json, write_json
from .confinement import solve_least_conservative, solve_most_efficient
from .errors import ContractViolation, Infeasible, OutsideDomain, VczError
from .scenario import load_scenario
from .sim import nearest_winning_center, plot_data, run, synthesize
from .synthesis import load_controller, save_controller

log = logging.getLogger("vczsynth")

EXIT_OK, EXIT_INFEASIBLE, EXIT_BREACH, EXIT_PARSE = 0, 2, 3, 4


def _scalar_or_list(a):
    a = np.asarray(a, dtype=float)
    return float(a[0]) if np.all(a == a[0]) else a.tolist()


def feasibility_report(scn) -> dict:
    """Inequality slacks at the resolved parameters plus both selection strategies."""
    rep = scn.feasibility()
    out = {
        "scenario": scn.name,
        "pass": rep.passed,
        "rhs": _scalar_or_list(rep.torque_rhs),
        "tau_bar": _scalar_or_list(scn.bounds.tau_bar),
        "torque_slack": rep.torque_slack.tolist(),
        "velocity_slack": rep.velocity_slack.tolist(),
        "a_r": _scalar_or_list(rep.a_r),
        "vcz_mode": scn.vcz_mode,
        "lambda": scn.vcz.lam,
        "u_bar": np.asarray(scn.vcz.u_bar).tolist(),
    }
    try:
        lam_me, u_me = solve_most_efficient(scn.bounds, scn.funnel)
        lc = solve_least_conservative(scn.bounds, scn.funnel)
        out.update(lambda_me=lam_me, u_me=u_me.tolist(), lambda_lc=lc.lam_min,
                   u_max_at_lambda=lc.u_max(scn.vcz.lam).tolist())
    except Infeasible as exc:
        out.update(lambda_me=None, u_me=None, lambda_lc=None, u_max_at_lambda=None, budget_error=str(exc))
    return out


def cmd_feasibility(args) -> int:
    scn = load_scenario(args.scenario, args.seed_override, args.dt)
    report = feasibility_report(scn)
    text = dumps_json(report)
    if args.out:
        write_json(Path(args.out), report)
    sys.stdout.write(text)
    return EXIT_OK if report["pass"] else EXIT_INFEASIBLE


def _model_for(scn, cache: Optional[str]):
    if not cache:
        return None
    path = Path(cache)
    if path.exists():
        log.info("loading cached model %s", path)
        return load_model(path)
    model = build_model(scn.grid(), scn.input_grid(), scn.vcz.h)
    save_model(model, path)
    return model


def cmd_synthesize(args) -> int:
    scn = load_scenario(args.scenario, args.seed_override, args.dt)
    res = synthesize(scn, _model_for(scn, args.cache_model))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_controller(res.controller, out / "controller.npz")
    stats = res.stats()
    seconds = stats.pop("synthesis_seconds")
    stats["cells"] = res.model.n_cells
    stats["scenario"] = scn.name
    # The initial center must sit in the first task's winning domain.
    x0 = scn.initial.x0 if scn.initial is not None else np.zeros(scn.n)
    xi0 = (nearest_winning_center(res.controller, 0, x0) if scn.initial is None or scn.initial.xi0 is None
           else np.asarray(scn.initial.xi0, dtype=float))
    ok = bool(res.controller.refine(0).contains(xi0))
    stats["xi0"] = np.asarray(xi0).tolist()
    stats["xi0_winning"] = ok
    write_json(out / "synthesis.json", stats)
    log.info("synthesis took %.4f s", seconds)
    sys.stdout.write(dumps_json(stats))
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    scn = load_scenario(args.scenario, args.seed_override, args.dt)
    ctrl = load_controller(args.controller) if args.controller else synthesize(scn).controller
    result = run(scn, ctrl)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(result.trajectory.to_csv())
    write_json(out / "report.json", result.report)
    for name, text in plot_data(result.trajectory).items():
        (out / "plot" / name).parent.mkdir(parents=True, exist_ok=True)
        (out / "plot" / name).write_text(text)
    rep = result.report
    summary = {k: rep[k] for k in ("scenario", "halt", "monitors_passed", "all_tasks_completed",
                                   "tasks_reached_at")}
    summary["specification_satisfied"] = rep["specification"]["satisfied"]
    sys.stdout.write(dumps_json(summary))
    return EXIT_OK if result.ok else EXIT_BREACH


def cmd_benchmark(args) -> int:
    from .baseline import benchmark

    paths = args.scenario or []
    if not paths:
        raise ContractViolation("benchmark needs at least the pendulum scenario")
    scns = [load_scenario(p, args.seed_override, args.dt) for p in paths]
    report = benchmark(scns[0], scns[1:], eta=args.eta, repeats=args.repeats)
    md = report.to_markdown()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "benchmark.md").write_text(md)
        (out / "benchmark.csv").write_text(report.to_csv())
        write_json(out / "benchmark.json", report.as_dict())
    sys.stdout.write(md)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vczsynth", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, many=False):
        if many:
            sp.add_argument("--scenario", action="append", help="scenario YAML (repeatable; pendulum first)")
        else:
            sp.add_argument("--scenario", required=True, help="scenario YAML file")
        sp.add_argument("--seed-override", type=int, default=None, help="replace the scenario seed")
        sp.add_argument("--dt", type=float, default=None, help="integration step (default h/50)")

    sp = sub.add_parser("feasibility", help="check the confinement inequalities")
    common(sp)
    sp.add_argument("--out", help="also write the JSON report here")
    sp.set_defaults(func=cmd_feasibility)

    sp = sub.add_parser("synthesize", help="tighten, abstract, solve, and save the controller")
    common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--cache-model", help="symbolic model dump to reuse (created when missing)")
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("simulate", help="run the closed loop and write trajectory/report/plot data")
    common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--controller", help="controller.npz from `synthesize` (synthesized on the fly if omitted)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("benchmark", help="VCZ vs full-state baseline comparison table")
    common(sp, many=True)
    sp.add_argument("--out", help="directory for benchmark.md/.csv/.json")
    sp.add_argument("--eta", type=float, default=0.01, help="matched cell width for the pendulum comparison")
    sp.add_argument("--repeats", type=int, default=3, help="timing repeats (best is reported)")
    sp.set_defaults(func=cmd_benchmark)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("VCZSYNTH_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VczError as exc:
        code = exc.exit_code
        if isinstance(exc, ContractViolation):
            # Contract failures reachable from the CLI come from scenario content.
            code = EXIT_PARSE
        if isinstance(exc, OutsideDomain):
            code = EXIT_BREACH
        sys.stderr.write(f"error ({type(exc).__name__}): {exc}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
