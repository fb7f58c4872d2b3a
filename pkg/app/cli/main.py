"""Command-line entry point: python -m app.cli.main <subcommand> ..."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Union

import pandas as pd

from app.spidercert import config
from app.spidercert.bench import (
    brute_optimum,
    gen_complete,
    gen_gnp,
    gen_regular,
    run_experiment,
    soundness_sweep,
)
from app.spidercert.certifier import certify_2xor, certify_maxcut, verify_certificate
from app.spidercert.csp import (
    CspInstance,
    XorInstance,
    gen_csp,
    gen_weighted_xor,
    refute_predicate,
    refute_xor,
    xor_from_graph,
)
from app.spidercert.data_access import (
    dump_spider,
    dumps,
    experiments_frame,
    load_certificate,
    load_graph,
    load_instance,
    read_json,
    to_jsonable,
)
from app.spidercert.feaspoint import f_properties, lb_simplification, lower_bound
from app.spidercert.graph import SignedGraph, build_graph
from app.spidercert.schemas import CheckResult, ExperimentConfig, RunConfig, WeightSpec
from app.spidercert.spider import build_psi, build_spider, verify_psi
from app.spidercert.utils import rel_residual

logger = logging.getLogger("app.cli")

NEEDS_INSTANCE = {"certify", "verify-cert", "refute-xor", "refute-csp", "lowerbound"}

SELFTEST_SPIDERS = [(3, 1), (4, 1), (9, 2), (16, 2), (27, 3)]
SELFTEST_AGG_SPIDERS = [(2, 1), (3, 1), (2, 2)]


class Failure(Exception):
    """Verification or soundness failure: the result is printed, then exit code 1."""

    def __init__(self, payload: Any):
        super().__init__("check failed")
        self.payload = payload


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--no-meta", action="store_true", help="Omit the version/created/argv block")
    p.add_argument("--jobs", type=int, default=config.JOBS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None, help=f"Relative tolerance (default {config.REL_TOL})")
    p.add_argument("--log-level", default=config.LOG_LEVEL)
    p.add_argument("--output", type=Path, default=None, help="Write here instead of stdout")
    return p


def _source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", type=Path, default=None, help="Graph or instance JSON")
    p.add_argument("--model", default=None, help="Generator: gnp, regular, complete, xor, csp")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--degree", type=float, default=None)
    p.add_argument("--arity", type=int, default=None)
    p.add_argument("--weights", choices=["rademacher", "wn"], default="rademacher")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--predicate", default=None)
    p.add_argument("--m", type=float, default=None, help="Expected clause count")


def _spider_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--k", type=int, default=None, help="Spider leg count")
    p.add_argument("--ell", type=int, default=None, help="Spider leg length")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="spidercert", description="Spider certificates for max-cut, 2-XOR and CSPs")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("gen", parents=[common], help="Generate a graph or instance")
    _source(g)

    c = sub.add_parser("certify", parents=[common], help="Certify a max-cut / 2-XOR upper bound")
    _source(c)
    _spider_args(c)
    c.add_argument("--kind", choices=["maxcut", "2xor"], default="maxcut")
    c.add_argument("--verify", choices=["none", "exhaustive", "sampled"], default="none")
    c.add_argument("--samples", type=int, default=100_000)

    v = sub.add_parser("verify-cert", parents=[common], help="Re-derive and verify a certificate file")
    _source(v)
    v.add_argument("--certificate", type=Path, required=True)
    v.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    v.add_argument("--samples", type=int, default=100_000)

    x = sub.add_parser("refute-xor", parents=[common], help="Refute a k-XOR instance")
    _source(x)
    _spider_args(x)

    s = sub.add_parser("refute-csp", parents=[common], help="Refute a predicate CSP")
    _source(s)
    _spider_args(s)
    s.add_argument("--delta", type=float, default=None)

    lb = sub.add_parser("lowerbound", parents=[common], help="Explicit Sherali-Adams feasible point")
    _source(lb)
    lb.add_argument("--rounds", type=int, default=1)
    lb.add_argument("--subset-size", type=int, default=None)

    b = sub.add_parser("bench", parents=[common], help="Run experiments or the soundness sweep")
    b.add_argument("--config", type=Path, default=None, help="ExperimentConfig JSON")
    b.add_argument("--sweep", type=int, default=None, help="Number of soundness-sweep instances")

    sp = sub.add_parser("spider-check", parents=[common], help="Check the spider matrix identities")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--ell", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--dump", type=Path, default=None)

    sub.add_parser("selftest", parents=[common], help="Exhaustive fixtures and identity suites")
    return parser


# ---------------------------------------------------------------- inputs

def _generate(args: argparse.Namespace) -> Union[SignedGraph, XorInstance, CspInstance]:
    if args.model is None:
        raise ValueError("give a generator with --model")
    if args.n is None:
        raise ValueError(f"--model {args.model} needs --n")
    if args.model == "complete":
        return gen_complete(args.n)
    if args.model == "gnp":
        return gen_gnp(args.n, args.degree or 3.0, seed=args.seed)
    if args.model == "regular":
        return gen_regular(args.n, int(args.degree or 3), seed=args.seed)
    if args.model == "xor":
        W = WeightSpec(kind=args.weights, p=args.p, N=args.N)
        return gen_weighted_xor(args.n, args.arity or 2, W, seed=args.seed)
    if args.model == "csp":
        k = args.arity or 3
        if args.predicate is None:
            raise ValueError("--model csp needs --predicate")
        m = args.m if args.m is not None else float(args.n) ** (k / 2) * 4
        return gen_csp(args.n, k, args.predicate, m, seed=args.seed)
    raise ValueError(f"unknown generator '{args.model}'")


def _load(args: argparse.Namespace) -> Union[SignedGraph, XorInstance, CspInstance]:
    if args.model is not None:
        return _generate(args)
    data = read_json(args.input)
    if "edges" in data or "generator" in data:
        return load_graph(args.input)
    return load_instance(args.input)


def _graph(obj) -> SignedGraph:
    if isinstance(obj, SignedGraph):
        return obj
    raise ValueError("this subcommand needs a graph (JSON with 'edges' or a graph generator)")


def _xor(obj) -> XorInstance:
    if isinstance(obj, XorInstance):
        return obj
    if isinstance(obj, SignedGraph):
        return xor_from_graph(obj)
    raise ValueError("this subcommand needs an XOR instance or a graph")


def _spider_params(args: argparse.Namespace) -> dict:
    if args.epsilon is not None:
        return dict(epsilon=args.epsilon)
    if args.k is None or args.ell is None:
        raise ValueError("give --epsilon or both --k and --ell")
    return dict(k=args.k, ell=args.ell)


# ---------------------------------------------------------------- subcommands

def cmd_gen(args):
    obj = _generate(args)
    return obj.to_model()


def cmd_certify(args):
    G = _graph(_load(args))
    certify = certify_maxcut if args.kind == "maxcut" else certify_2xor
    params = _spider_params(args)
    cert = certify(G, tol=args.tol, require_corollary="epsilon" in params, **params)
    report = None
    if args.verify != "none":
        report = verify_certificate(cert, G, mode=args.verify, samples=args.samples, seed=args.seed,
                                    jobs=args.jobs, tol=args.tol)
    model = cert.to_model(report)
    if report is not None and not report.passed:
        raise Failure(model)
    return model


def cmd_verify_cert(args):
    G = _graph(_load(args))
    stored = load_certificate(args.certificate)
    certify = certify_maxcut if stored.kind == "maxcut" else certify_2xor
    cert = certify(G, k=stored.k, ell=stored.ell, require_corollary=False, tol=args.tol)
    report = verify_certificate(cert, G, mode=args.mode, samples=args.samples, seed=args.seed,
                                jobs=args.jobs, tol=args.tol)
    tol = config.resolve_tol(args.tol)
    for name, mine, theirs in (("stored_beta_closed", cert.beta_closed, stored.beta_closed),
                               ("stored_beta_sharp", cert.beta_sharp, stored.beta_sharp)):
        res = rel_residual(mine, theirs)
        report.checks.append(CheckResult(name=name, status="pass" if res <= tol else "fail",
                                         residual=res, tolerance=tol))
    report.passed = all(c.passed for c in report.checks)
    if not report.passed:
        raise Failure(report)
    return report


def cmd_refute_xor(args):
    I = _xor(_load(args))
    rep = refute_xor(I, seed=args.seed, tol=args.tol, **_spider_params(args))
    return rep


def cmd_refute_csp(args):
    I = _load(args)
    if not isinstance(I, CspInstance):
        raise ValueError("refute-csp needs a CSP instance (JSON with 'clauses' or --model csp)")
    if args.epsilon is None:
        raise ValueError("refute-csp needs --epsilon")
    return refute_predicate(I, epsilon=args.epsilon, delta=args.delta, k=args.k, ell=args.ell,
                            seed=args.seed, jobs=args.jobs, tol=args.tol)


def cmd_lowerbound(args):
    obj = _load(args)
    I = xor_from_graph(obj, unit=True) if isinstance(obj, SignedGraph) else _xor(obj)
    rep = lower_bound(I, args.rounds, subset_size=args.subset_size, seed=args.seed)
    if not (rep.meets_guarantee and rep.embeddability.passed):
        raise Failure(rep)
    return rep


def cmd_bench(args):
    if (args.config is None) == (args.sweep is None):
        raise ValueError("bench needs exactly one of --config or --sweep")
    if args.sweep is not None:
        rep = soundness_sweep(args.sweep, seed=args.seed, jobs=args.jobs)
        if not rep.passed:
            raise Failure(rep)
        return rep
    cfg = ExperimentConfig.model_validate(read_json(args.config))
    rows = run_experiment(cfg, jobs=args.jobs)
    if any(r.violations for r in rows):
        raise Failure(rows)
    return rows


def cmd_spider_check(args):
    sm = build_psi(build_spider(args.k, args.ell), alpha=args.alpha)
    rep = verify_psi(sm, tol=args.tol)
    if args.dump is not None:
        dump_spider(sm, args.dump)
    if not rep.passed:
        raise Failure(rep)
    return rep


def _selftest_graphs() -> List[Tuple[str, SignedGraph]]:
    return [
        ("K3", build_graph([(0, 1, 1, -1), (1, 2, 1, -1), (0, 2, 1, -1)])),
        ("P4", build_graph([(0, 1, 1, -1), (1, 2, 1, -1), (2, 3, 1, -1)])),
        ("C5", build_graph([(i, (i + 1) % 5, 1, -1) for i in range(5)])),
        ("signed C4", build_graph([(0, 1, 1, 1), (1, 2, 1, -1), (2, 3, 1, 1), (3, 0, 1, -1)])),
    ]


def cmd_selftest(args):
    results = []
    for k, ell in SELFTEST_SPIDERS:
        rep = verify_psi(build_psi(build_spider(k, ell)), tol=args.tol)
        results.append({"suite": "spider", "case": f"({k},{ell})", "passed": rep.passed})
    for name, G in _selftest_graphs():
        for k, ell in SELFTEST_AGG_SPIDERS:
            cert = certify_2xor(G, k=k, ell=ell, require_corollary=False, tol=args.tol)
            check = verify_certificate(cert, G, mode="exhaustive", tol=args.tol).check("aggregation")
            results.append({"suite": "aggregation", "case": f"{name} x ({k},{ell})", "passed": check.passed})
    fp = f_properties(10_000)
    results.append({"suite": "f", "case": "grid 1e4", "passed": fp.passed})
    lb = lb_simplification()
    results.append({"suite": "lower-bound", "case": f"R <= {int(lb['R_max'])}", "passed": lb["failures"] == 0})
    edge = build_graph([(0, 1, 1, -1)])
    results.append({"suite": "brute", "case": "edge", "passed": brute_optimum(edge) == 1})
    payload = {"passed": all(r["passed"] for r in results), "results": results}
    if not payload["passed"]:
        raise Failure(payload)
    return payload


COMMANDS = {
    "gen": cmd_gen,
    "certify": cmd_certify,
    "verify-cert": cmd_verify_cert,
    "refute-xor": cmd_refute_xor,
    "refute-csp": cmd_refute_csp,
    "lowerbound": cmd_lowerbound,
    "bench": cmd_bench,
    "spider-check": cmd_spider_check,
    "selftest": cmd_selftest,
}


# ---------------------------------------------------------------- output

def render(payload: Any, fmt: str, meta: bool, argv: Sequence[str]) -> str:
    if fmt == "csv":
        if isinstance(payload, list) and payload and hasattr(payload[0], "timings"):
            return experiments_frame(payload).to_csv(index=False)
        return pd.json_normalize(to_jsonable(payload)).to_csv(index=False)
    return dumps(payload, meta=meta, argv=argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    code = 0
    try:
        RunConfig(
            subcommand=args.subcommand,
            input=getattr(args, "input", None),
            generator=getattr(args, "model", None),
            epsilon=getattr(args, "epsilon", None),
            delta=getattr(args, "delta", None),
            k=getattr(args, "k", None),
            ell=getattr(args, "ell", None),
            rounds=getattr(args, "rounds", None),
            seed=args.seed,
            tol=args.tol,
            format=args.format,
            jobs=args.jobs,
            needs_instance=args.subcommand in NEEDS_INSTANCE,
        )
        payload = COMMANDS[args.subcommand](args)
    except Failure as fail:
        payload, code = fail.payload, 1
    except (ValueError, OSError) as err:
        logger.error("%s: %s", args.subcommand, err)
        print(f"error: {err}", file=sys.stderr)
        return 2

    text = render(payload, args.format, meta=not args.no_meta, argv=argv)
    if args.output is not None:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
