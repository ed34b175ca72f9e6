"""Command-line experiment runner.

Subcommands:
  run         seeded batch of one mechanism, CSV summary out
  grid        kernel / epsilon / query-budget sweep
  manipulate  truthful vs overbidding comparison with ANOVA
  certify     clearing certificate for a saved auction replay
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from .core import ReportSet
from .learning import KernelSpec
from .mlca import LearnerSpec, learner_from_dict
from .valuemodels import DomainInstance

_KERNELS = ("linear", "quadratic", "exponential", "gaussian")


def _parse_seeds(text: str) -> tuple:
    """'A..B' inclusive range, or a comma-separated list."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        seeds = tuple(range(int(lo), int(hi) + 1))
    else:
        seeds = tuple(int(x) for x in text.split(","))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed range")
    return seeds


def _add_domain_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--domain", choices=("gsvm", "twowise"), default="gsvm")
    p.add_argument("--m", type=int, default=12, help="number of items")
    p.add_argument("--n", type=int, default=5, help="number of bidders")
    p.add_argument("--seeds", type=_parse_seeds, default=(101,), help="A..B or list")


def _add_learner_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=_KERNELS, default="quadratic")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--c", type=float, default=1e4)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="kernel parameter; defaults to 0.1 (quadratic) or m")
    p.add_argument("--qmax", type=int, default=40)
    p.add_argument("--qinit", type=int, default=12)
    p.add_argument("--qround", type=int, default=4)


def _kernel_spec(args) -> KernelSpec:
    lam = args.lam
    if lam is None:
        lam = 0.1 if args.kernel == "quadratic" else (0.0 if args.kernel == "linear"
                                                      else float(args.m))
    return KernelSpec(args.kernel, lam)


def _learner(args) -> LearnerSpec:
    if args.kernel == "linear":
        return LearnerSpec("linear", c=args.c)
    return LearnerSpec("svr", _kernel_spec(args), epsilon=args.eps, c=args.c)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _cmd_run(args) -> int:
    from . import experiments as ex

    payment = args.payment.replace("-", "_")
    heuristic = args.heuristic.replace("-", "_")
    if args.mechanism == "mlca":
        spec = ex.MechanismSpec("mlca", learner=_learner(args), q_max=args.qmax,
                                q_init=args.qinit, q_round=args.qround, payment_rule=payment)
    elif args.mechanism == "cca":
        spec = ex.MechanismSpec("cca", heuristic=heuristic, payment_rule=payment)
    else:
        spec = ex.MechanismSpec(args.mechanism)
    cfg = ex.ExperimentConfig(args.domain, args.m, args.n, args.seeds, (spec,))
    rows = ex.run_batch(cfg)
    _write(args.out, ex.rows_to_csv(rows))
    if args.trace:
        _dump_replay(args, spec)
    return 0


def _dump_replay(args, spec) -> None:
    from .experiments import generate_domain
    from .mlca import MlcaConfig, run_mlca, replay_json
    from .valuemodels import BidderStrategy

    if spec.kind != "mlca":
        raise SystemExit("--trace is only available for --mechanism mlca")
    seed = args.seeds[0]
    domain = generate_domain(args.domain, seed, args.m, args.n)
    cfg = MlcaConfig(q_max=args.qmax, q_init=args.qinit, q_round=args.qround,
                     learner=spec.learner, seed=seed, payment_rule=spec.payment_rule)
    outcome = run_mlca(domain, [BidderStrategy() for _ in range(args.n)], cfg)
    _write(args.trace, replay_json(domain, cfg, outcome))


def _cmd_grid(args) -> int:
    from . import experiments as ex

    kernels = []
    for kind in args.kernels.split(","):
        if kind == "linear":
            kernels.append(KernelSpec("linear"))
        elif kind == "quadratic":
            kernels.append(KernelSpec("quadratic", 0.1 if args.lam is None else args.lam))
        else:
            kernels.append(KernelSpec(kind, float(args.m) if args.lam is None else args.lam))
    eps_values = tuple(float(x) for x in args.eps_list.split(","))
    q_values = tuple(int(x) for x in args.q.split(","))
    cells = ex.kernel_grid(args.domain, args.m, args.n, args.seeds, kernels,
                           eps_values, q_values, c=args.c)
    _write(args.out, ex.grid_to_csv(cells))
    return 0


def _cmd_manipulate(args) -> int:
    from . import experiments as ex

    z_values = tuple(float(x) for x in args.z.split(","))
    result = ex.manipulation_study(
        args.domain, args.m, args.n, args.seeds, args.role, z_values,
        _learner(args), q_max=args.qmax, q_init=args.qinit, q_round=args.qround,
    )
    _write(args.out, ex.manipulation_to_csv(result))
    return 0


def _cmd_certify(args) -> int:
    from .diagnostics import PriceProfile, b1_error_terms, certify_clearing
    from .wdp import WdpProblem, solve

    with open(args.trace, encoding="utf-8") as fh:
        data = json.load(fh)
    domain = DomainInstance.from_json(json.dumps(data["domain"]))
    learner = learner_from_dict(data["config"]["learner"])
    reports = [
        ReportSet.from_json(json.dumps(entries), domain.m) for entries in data["reports"]
    ]
    models = tuple(
        (learner if isinstance(learner, LearnerSpec) else learner[i]).train(
            reports[i], domain.bidders[i]
        )
        for i in range(domain.n)
    )
    a_tilde = solve(WdpProblem(models=models)).allocation
    cert = certify_clearing(PriceProfile(models), a_tilde, domain)
    d1, d2 = b1_error_terms(models, domain, a_tilde)
    bound = domain.n * (d1 + d2)
    print(f"delta: {cert.delta:.10g}")
    print(f"gamma: {cert.gamma:.10g}")
    print("beta: " + " ".join(f"{b:.10g}" for b in cert.beta))
    print(f"bound_n_d1_d2: {bound:.10g}")
    print(f"within_bound: {cert.delta <= bound + 1e-9}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="auctionlab")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="seeded batch of one mechanism")
    _add_domain_args(run)
    _add_learner_args(run)
    run.add_argument("--mechanism", choices=("mlca", "cca", "vcg", "random"), required=True)
    run.add_argument("--payment", choices=("vcg", "vcg-nearest"), default="vcg")
    run.add_argument("--heuristic", choices=("clock", "clock-raised", "profit-max"),
                     default="clock")
    run.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    run.add_argument("--trace", default=None,
                     help="also save a replay JSON of the first seed (mlca only)")
    run.set_defaults(func=_cmd_run)

    grid = sub.add_parser("grid", help="kernel/epsilon/Q sweep")
    _add_domain_args(grid)
    grid.add_argument("--kernels", default="linear,quadratic,exponential,gaussian")
    grid.add_argument("--eps-list", default="0", help="comma-separated epsilons")
    grid.add_argument("--q", default="20,40,80", help="comma-separated report counts")
    grid.add_argument("--c", type=float, default=1e4)
    grid.add_argument("--lambda", dest="lam", type=float, default=None)
    grid.add_argument("--out", default="-")
    grid.set_defaults(func=_cmd_grid)

    man = sub.add_parser("manipulate", help="overbidding study with ANOVA")
    _add_domain_args(man)
    _add_learner_args(man)
    man.add_argument("--role", default="national",
                     help="manipulator: bidder index or 'national'")
    man.add_argument("--z", default="0.25,0.5,0.75,0.99", help="overbid levels")
    man.add_argument("--out", default="-")
    man.set_defaults(func=_cmd_manipulate)

    cert = sub.add_parser("certify", help="clearing certificate for a replay")
    cert.add_argument("--trace", required=True, help="replay JSON from `run --trace`")
    cert.set_defaults(func=_cmd_certify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
