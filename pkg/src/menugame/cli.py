"""Command-line entry point.

Exit codes: 0 success / verification passed, 1 verification failure,
2 usage or parse errors.  Every randomized command requires --seed and
identical (config, seed) pairs produce byte-identical CSV/JSON artifacts;
floats are printed with 9 significant digits.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import equilibria, mdp, smallgamma
from .cascade import policy_evaluate
from .model import (
    InstanceFormatError,
    MarketInstance,
    eta,
    load_instance,
    policy_to_json,
)
from .sellers import BRConfig, br_dynamics, menu_members

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


def _parse_floats(text: str, path_hint: str = "") -> list[float]:
    """Inline comma list, or @file pointing at a JSON array."""
    if text.startswith("@"):
        doc = json.loads(Path(text[1:]).read_text())
        return [float(v) for v in doc]
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _parse_sweep(text: str) -> list[float]:
    if ":" in text:
        start, stop, count = text.split(":")
        return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
    return _parse_floats(text)


@dataclass
class RunConfig:
    """Resolved configuration of one CLI invocation."""

    command: str
    instance: MarketInstance
    out: Path | None = None
    delta: list[float] | None = None
    seed: int | None = None
    options: dict = field(default_factory=dict)


def _write(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def cmd_solve_platform(cfg: RunConfig) -> int:
    instance, delta = cfg.instance, cfg.delta
    if cfg.options.get("approx"):
        policy = smallgamma.approx_policy(instance, delta)
        value = policy_evaluate(instance, delta, policy).platform_revenue
    else:
        table, opt = mdp.solve_dp(instance, delta)
        policy = mdp.fair_policy(instance, delta, dp=(table, opt))
        value = table.optimum()
    _write(cfg.out, _json_text(policy_to_json(policy, value)))
    print(f"value {_fmt(value)} over {len(policy.support)} menu(s)")
    return EXIT_OK


def cmd_compare_approx(cfg: RunConfig) -> int:
    instance, base = cfg.instance, list(cfg.delta)
    seller = cfg.options["seller"]
    gammas = cfg.options["gammas"]
    sweep = cfg.options["sweep"]
    rows: list[dict] = []
    for g in gammas:
        inst = instance.with_gamma(g)
        for d in sweep:
            delta = list(base)
            delta[seller] = d
            fair = mdp.fair_policy(inst, delta)
            approx = smallgamma.approx_policy(inst, delta)
            if not (fair.is_deterministic() and approx.is_deterministic()):
                continue
            exact_u = policy_evaluate(inst, delta, fair).seller_utility[seller]
            approx_u = policy_evaluate(inst, delta, approx).seller_utility[seller]
            if abs(exact_u) <= 1e-12 and abs(approx_u) <= 1e-12:
                rel = 0.0
            else:
                rel = abs(exact_u - approx_u) / abs(exact_u)
            rows.append(
                {
                    "gamma": g,
                    "delta": d,
                    "exact_utility": exact_u,
                    "approx_utility": approx_u,
                    "rel_error": rel,
                }
            )
    header = "gamma,delta,exact_utility,approx_utility,rel_error"
    lines = [header]
    for row in rows:
        lines.append(
            ",".join(
                _fmt(row[k])
                for k in ("gamma", "delta", "exact_utility", "approx_utility", "rel_error")
            )
        )
    _write(cfg.out, "\n".join(lines) + "\n")
    for g in gammas:
        errs = [row["rel_error"] for row in rows if row["gamma"] == g]
        if errs:
            print(f"gamma {g:g}: {len(errs)} rows, max rel error {_fmt(max(errs))}")
    if cfg.out is not None and not cfg.options.get("no_plot"):
        from .plots import plot_compare_approx

        png = cfg.out.with_suffix(".png")
        plot_compare_approx(rows, seller + 1, png)
        print(f"figure written to {png}")
    return EXIT_OK


def cmd_br_dynamics(cfg: RunConfig) -> int:
    instance = cfg.instance
    config = BRConfig(
        grid_step=cfg.options["grid_step"],
        undercut=cfg.options["undercut"],
        epsilon=cfg.options["epsilon"],
        max_iters=cfg.options["max_iters"],
        burn_in=cfg.options["burn_in"],
        rng_seed=cfg.seed,
    )
    trace = br_dynamics(instance, cfg.delta, config)
    n = instance.n_sellers

    move_at = {s.iteration: s.mover for s in trace.steps}
    header = (
        "iteration,mover,"
        + ",".join(f"delta_{a + 1}" for a in range(n))
        + ","
        + ",".join(f"U_{a + 1}" for a in range(n))
    )
    lines = [header]
    for it in range(trace.profiles.shape[0]):
        mover = move_at.get(it, -1) + 1  # 0 marks "no move this iteration"
        lines.append(
            f"{it},{mover},"
            + ",".join(_fmt(v) for v in trace.profiles[it])
            + ","
            + ",".join(_fmt(v) for v in trace.utilities[it])
        )
    _write(cfg.out, "\n".join(lines) + "\n")

    slack = config.grid_step + config.undercut
    summary: dict = {
        "converged": trace.converged,
        "moves": len(trace.steps),
        "iterations": int(trace.profiles.shape[0] - 1),
        "burn_in": config.burn_in,
        "seller_bands": [
            {"seller": a + 1, "min": lo, "max": hi, "span": hi - lo}
            for a, (lo, hi) in enumerate(trace.seller_ranges())
        ],
    }
    post = trace.post_burn_in()
    on_menu: set[int] = set()
    for row in post:
        on_menu |= menu_members(instance, row)
    summary["menu_sellers_post_burn_in"] = sorted(a + 1 for a in on_menu)
    try:
        box = equilibria.ec_box(instance)
        inside = sum(1 for row in post for _ in [0] if box.contains(row, slack=slack))
        summary["ec_membership_rate"] = inside / len(post) if len(post) else None
        summary["ec_box"] = {"lo": list(box.lo), "hi": list(box.hi), "slack": slack}
    except ValueError as exc:
        summary["ec_membership_rate"] = None
        summary["ec_box_error"] = str(exc)
    summary["warnings"] = equilibria.eta_hypothesis_warnings(instance)

    summary_path = cfg.options.get("summary")
    _write(summary_path, _json_text(summary))
    rate = summary.get("ec_membership_rate")
    print(
        f"moves {len(trace.steps)}, converged {trace.converged}, "
        f"ec membership {_fmt(rate) if rate is not None else 'n/a'}"
    )
    if cfg.out is not None and not cfg.options.get("no_plot"):
        from .plots import plot_br_dynamics

        try:
            thresholds = equilibria.thresholds_eta_tilde(instance)[: instance.menu_size]
        except ValueError:
            thresholds = []
        png = cfg.out.with_suffix(".png")
        plot_br_dynamics(
            range(trace.profiles.shape[0]), trace.profiles, thresholds, png, config.burn_in
        )
        print(f"figure written to {png}")
    return EXIT_OK


def _tail_start_profile(instance: MarketInstance, box: equilibria.ECBox) -> np.ndarray:
    """The exception-set start: the first two sellers at the shared top
    endpoint, other menu sellers mid-component, excluded sellers pinned."""
    start = np.array([(lo + hi) / 2.0 for lo, hi in zip(box.lo, box.hi)])
    start[0] = box.hi[0]
    if instance.n_sellers > 1:
        start[1] = box.hi[1]
    return start


def cmd_verify(cfg: RunConfig) -> int:
    instance = cfg.instance
    what = cfg.options["what"]
    warnings = equilibria.eta_hypothesis_warnings(instance)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)

    if what == "thresholds":
        tl = equilibria.thresholds_eta_tilde(instance)
        doc = {
            "property": "thresholds",
            "eta": [float(v) for v in eta(instance)],
            "eta_tilde": [float(v) for v in tl],
            "reading_divergence": equilibria.threshold_reading_divergence(instance),
            "warnings": warnings,
            "verdict": "pass",
        }
        _write(cfg.out, _json_text(doc))
        print("thresholds " + " ".join(_fmt(v) for v in tl))
        return EXIT_OK

    if what in ("nash", "eps-nash"):
        grid = cfg.options["grid"]
        undercut = cfg.options["undercut"]
        if what == "nash":
            report = equilibria.verify_nash(instance, cfg.delta, grid, undercut)
        else:
            report = equilibria.verify_eps_nash(
                instance, cfg.delta, cfg.options["epsilon"], grid, undercut
            )
        doc = report.to_json_dict()
        doc["warnings"] = warnings
        _write(cfg.out, _json_text(doc))
        print(f"{report.property_name}: {report.verdict}")
        return EXIT_OK if report.passed else EXIT_VERIFICATION_FAILED

    # what == "ec"
    samples = cfg.options["samples"]
    grid_step = cfg.options["grid_step"]
    undercut = cfg.options["undercut"]
    doc: dict = {"property": "ec", "samples": samples, "warnings": warnings}
    try:
        box = equilibria.ec_box(instance)
    except ValueError as exc:
        doc["verdict"] = "fail"
        doc["error"] = str(exc)
        _write(cfg.out, _json_text(doc))
        print(f"ec: cannot build box: {exc}")
        return EXIT_VERIFICATION_FAILED
    doc["ec_box"] = {"lo": list(box.lo), "hi": list(box.hi)}

    stability = equilibria.check_stability(instance, box, samples, cfg.seed, grid_step, undercut)
    unrest = equilibria.check_unrest(instance, box, samples, cfg.seed, grid_step, undercut)
    doc["stability"] = stability.to_json_dict()
    doc["unrest"] = unrest.to_json_dict()

    falsifications = []
    try:
        candidates = equilibria.canonical_subset_candidates(instance, cfg.options["shrink"])
    except ValueError as exc:
        candidates = []
        doc["falsification_error"] = str(exc)
    for name, candidate in candidates:
        rep = equilibria.falsify_subset(instance, candidate, samples, cfg.seed, grid_step, undercut)
        falsifications.append(
            {
                "candidate": name,
                "first_violated": rep.details.get("first_violated"),
                "violations": len(rep.violations),
            }
        )
    doc["falsifications"] = falsifications

    start = _tail_start_profile(instance, box)
    tails = {}
    for eps in cfg.options["tail_epsilons"]:
        chain = equilibria.search_external_tail(
            instance, box, start, eps, cfg.options["tail_depth"], grid_step, undercut
        )
        tails[_fmt(eps)] = chain if chain is not None else None
    doc["external_tails"] = {
        "start": [float(v) for v in start],
        "max_depth": cfg.options["tail_depth"],
        "chains": tails,
    }

    passed = stability.passed and unrest.passed
    doc["verdict"] = "pass" if passed else "fail"
    _write(cfg.out, _json_text(doc))
    print(
        f"stability {stability.verdict} ({len(stability.violations)} violations), "
        f"unrest {unrest.verdict} ({len(unrest.violations)} violations), "
        f"{len([f for f in falsifications if f['first_violated']])} sub-box falsifications"
    )
    return EXIT_OK if passed else EXIT_VERIFICATION_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="menugame",
        description="Platform menu-and-pricing optimization and seller-competition analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve-platform", help="solve the platform problem for one profile")
    solve.add_argument("--instance", required=True)
    solve.add_argument("--delta", required=True, help="commission profile, comma list or @file")
    solve.add_argument("--out", default=None)
    solve.add_argument("--gamma", type=float, default=None, help="override the instance's gamma")
    solve.add_argument("--approx", action="store_true", help="use the small-gamma approximate policy")

    comp = sub.add_parser("compare-approx", help="exact vs approximate utility accuracy sweep")
    comp.add_argument("--instance", required=True)
    comp.add_argument("--delta", required=True, help="base profile; the swept seller's entry is replaced")
    comp.add_argument("--seller", type=int, default=1, help="1-based seller whose commission is swept")
    comp.add_argument("--sweep", default="0.05:0.95:19", help="start:stop:count or comma list")
    comp.add_argument("--gammas", default="0.2,0.4,0.7")
    comp.add_argument("--out", default=None)
    comp.add_argument("--no-plot", action="store_true")

    br = sub.add_parser("br-dynamics", help="seeded epsilon-best-response dynamics")
    br.add_argument("--instance", required=True)
    br.add_argument("--delta-init", required=True)
    br.add_argument("--seed", type=int, required=True)
    br.add_argument("--gamma", type=float, default=None, help="override the instance's gamma")
    br.add_argument("--out", default=None)
    br.add_argument("--summary", default=None)
    br.add_argument("--max-iters", type=int, default=500)
    br.add_argument("--burn-in", type=int, default=100)
    br.add_argument("--grid-step", type=float, default=1e-3)
    br.add_argument("--undercut", type=float, default=1e-3)
    br.add_argument("--epsilon", type=float, default=1e-4)
    br.add_argument("--no-plot", action="store_true")

    ver = sub.add_parser("verify", help="equilibrium verification suites")
    ver.add_argument("what", choices=["nash", "eps-nash", "ec", "thresholds"])
    ver.add_argument("--instance", required=True)
    ver.add_argument("--profile", default=None, help="profile for nash/eps-nash checks")
    ver.add_argument("--gamma", type=float, default=None, help="override the instance's gamma")
    ver.add_argument("--epsilon", type=float, default=None)
    ver.add_argument("--samples", type=int, default=1000)
    ver.add_argument("--seed", type=int, default=None)
    ver.add_argument("--grid", type=int, default=1001)
    ver.add_argument("--grid-step", type=float, default=1e-3)
    ver.add_argument("--undercut", type=float, default=1e-3)
    ver.add_argument("--shrink", type=float, default=0.02)
    ver.add_argument("--tail-depth", type=int, default=2)
    ver.add_argument("--tail-epsilons", default="1e-4,1e-3")
    ver.add_argument("--out", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        instance = load_instance(args.instance)
        if getattr(args, "gamma", None) is not None:
            instance = instance.with_gamma(args.gamma)
    except (InstanceFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "solve-platform":
            cfg = RunConfig(
                command=args.command,
                instance=instance,
                out=Path(args.out) if args.out else None,
                delta=_parse_floats(args.delta),
                options={"approx": args.approx},
            )
            return cmd_solve_platform(cfg)

        if args.command == "compare-approx":
            cfg = RunConfig(
                command=args.command,
                instance=instance,
                out=Path(args.out) if args.out else None,
                delta=_parse_floats(args.delta),
                options={
                    "seller": args.seller - 1,
                    "sweep": _parse_sweep(args.sweep),
                    "gammas": _parse_floats(args.gammas),
                    "no_plot": args.no_plot,
                },
            )
            if not 0 <= cfg.options["seller"] < instance.n_sellers:
                parser.error(f"--seller must be in 1..{instance.n_sellers}")
            return cmd_compare_approx(cfg)

        if args.command == "br-dynamics":
            cfg = RunConfig(
                command=args.command,
                instance=instance,
                out=Path(args.out) if args.out else None,
                delta=_parse_floats(args.delta_init),
                seed=args.seed,
                options={
                    "max_iters": args.max_iters,
                    "burn_in": args.burn_in,
                    "grid_step": args.grid_step,
                    "undercut": args.undercut,
                    "epsilon": args.epsilon,
                    "summary": Path(args.summary) if args.summary else None,
                    "no_plot": args.no_plot,
                },
            )
            return cmd_br_dynamics(cfg)

        # verify
        if args.what in ("nash", "eps-nash") and args.profile is None:
            parser.error(f"verify {args.what} requires --profile")
        if args.what == "eps-nash" and args.epsilon is None:
            parser.error("verify eps-nash requires --epsilon")
        if args.what == "ec" and args.seed is None:
            parser.error("verify ec requires --seed (randomized command)")
        cfg = RunConfig(
            command="verify",
            instance=instance,
            out=Path(args.out) if args.out else None,
            delta=_parse_floats(args.profile) if args.profile else None,
            seed=args.seed,
            options={
                "what": args.what,
                "epsilon": args.epsilon,
                "samples": args.samples,
                "grid": args.grid,
                "grid_step": args.grid_step,
                "undercut": args.undercut,
                "shrink": args.shrink,
                "tail_depth": args.tail_depth,
                "tail_epsilons": _parse_floats(args.tail_epsilons),
            },
        )
        return cmd_verify(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
