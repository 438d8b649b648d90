"""Command-line front end.

Subcommands: ``analyze-basis``, ``design``, ``learn``, ``forge``, ``oracle``.
All commands honour ``--seed`` and ``--out``, never mutate their inputs, and
emit JSON (plus CSV summaries where tabular). Every run with ``--out`` also
drops a ``config.json`` snapshot; ``tollkit --config config.json`` replays it
to bit-identical outputs. Exit codes: 0 success, 2 parse or validation
failure, 3 numeric failure where non-convergence is an error, 4 construction
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

from .errors import (ConstructionFailed, GameValidationError,
                     InfeasibleParams, InvalidParams, KernelNonConvergent,
                     KernelOverflow, MaxItersExceeded, TollkitError, TooLarge,
                     UnsupportedBasis)
from .game import BasisFunction, GameInstance, TaxProfile
from .kernel import KernelConfig, bell_fractional, mu_factor, rho_factor
from .learning import best_profile_approximation, multiplicative_weights_run
from .oracle import check_smoothness, empirical_poa
from .relaxation import solve_relaxation
from .taxes import audit_taxes, build_tax_profile
from . import forge

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NUMERIC = 3
EXIT_CONSTRUCTION = 4


@dataclass(frozen=True)
class ExperimentConfig:
    """A reproducible record of one CLI invocation.

    Stores the exact argument vector plus the resolved seed and output
    directory; replaying the vector regenerates the same outputs bit-exactly
    within one build.
    """

    argv: tuple[str, ...]
    seed: int | None
    out: str | None

    def to_json(self) -> dict:
        return {"argv": list(self.argv), "seed": self.seed, "out": self.out}

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        return cls(argv=tuple(str(a) for a in data["argv"]),
                   seed=None if data.get("seed") is None else int(data["seed"]),
                   out=data.get("out"))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _write_config(args, argv) -> None:
    if getattr(args, "out", None):
        os.makedirs(args.out, exist_ok=True)
        config = ExperimentConfig(argv=tuple(argv), seed=getattr(args, "seed", None),
                                  out=args.out)
        label = args.command
        if label == "forge":
            label = f"forge-{args.forge_command}"
        # Per-command names so pipelines sharing one output directory keep
        # every stage replayable.
        _write_json(os.path.join(args.out, f"config-{label}.json"),
                    config.to_json())


def _parse_basis(args) -> BasisFunction:
    if args.monomial is not None and args.table is not None:
        raise GameValidationError("give either --monomial or --table, not both")
    if args.monomial is not None:
        return BasisFunction.monomial(args.monomial)
    if args.table is not None:
        values = [float(x) for x in args.table.split(",") if x.strip()]
        return BasisFunction.table(values)
    raise GameValidationError("a basis is required: --monomial D or --table v1,v2,...")


def _kernel_config(args) -> KernelConfig:
    return KernelConfig(tol_tail=args.tol_tail, i_max=args.i_max)


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _emit(args, payload, name: str) -> None:
    print(json.dumps(payload, indent=2))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, name), payload)


def cmd_analyze_basis(args) -> int:
    basis = _parse_basis(args)
    cfg = _kernel_config(args)
    report = rho_factor(basis, x_max=args.x_max, cfg=cfg)
    payload = {"basis": basis.to_json(), "rho_report": report.to_json()}
    try:
        mu = mu_factor(basis, cfg=cfg, monomial_like=args.monomial_like)
        if math.isfinite(mu):
            payload["mu"] = mu
        else:
            payload["mu"] = None
            payload["mu_status"] = "non-finite"
    except UnsupportedBasis:
        payload["mu"] = None
        payload["mu_status"] = "unsupported-basis"
    if basis.kind == "monomial":
        payload["bell"] = bell_fractional(basis.degree)
    if args.bell_table is not None:
        payload["bell_table"] = [
            {"degree": d, "rho": bell_fractional(d)}
            for d in range(args.bell_table + 1)]
    _emit(args, payload, "analyze_basis.json")
    if args.out:
        with open(os.path.join(args.out, "analyze_basis.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rho", "argmax", "mu", "infinite"])
            writer.writerow([
                "" if report.infinite else report.value, report.argmax,
                "" if payload["mu"] is None else payload["mu"], report.infinite])
        if args.bell_table is not None:
            with open(os.path.join(args.out, "bell_table.csv"), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["degree", "rho"])
                for row in payload["bell_table"]:
                    writer.writerow([row["degree"], row["rho"]])
    return EXIT_OK


def _instance_rho(instance: GameInstance, x_max: int, cfg: KernelConfig) -> float:
    """Worst efficiency factor over the bases actually used."""
    used = [j for j in range(instance.num_basis)
            if any(c[j] > 0 for c in instance.coefficients)]
    value = 1.0
    for j in used:
        report = rho_factor(instance.basis[j], x_max=x_max, cfg=cfg)
        if report.infinite:
            raise KernelNonConvergent("efficiency factor is unbounded", v=None)
        value = max(value, report.value)
    return value


def cmd_design(args) -> int:
    instance = GameInstance.load(args.instance)
    cfg = _kernel_config(args)
    bundle: dict = {"instance": args.instance, "stages": {}}
    stages = bundle["stages"]

    profile = None
    try:
        profile = solve_relaxation(instance, tol_gap=args.tol_gap,
                                   max_iters=args.max_iters, cfg=cfg)
        stages["relaxation"] = {"status": "ok", **profile.to_json()}
    except MaxItersExceeded as exc:
        profile = exc.profile
        stages["relaxation"] = {"status": "max-iters", **profile.to_json()}
    except KernelNonConvergent:
        stages["relaxation"] = {"status": "infinite-rho"}

    taxes = None
    if profile is not None:
        try:
            taxes = build_tax_profile(instance, profile.loads, cfg)
            stages["taxes"] = {"status": "ok", **taxes.to_json()}
            audit = audit_taxes(instance, taxes, tol=args.audit_tol, cfg=cfg)
            stages["audit"] = {"status": "ok", **audit.to_json()}
        except KernelNonConvergent:
            stages["taxes"] = {"status": "infinite-rho"}
        except KernelOverflow as exc:
            stages["taxes"] = {"status": "overflow", "detail": str(exc)}
    else:
        stages["taxes"] = {"status": "skipped"}
        stages["audit"] = {"status": "skipped"}

    rho = None
    try:
        rho = _instance_rho(instance, args.x_max, cfg)
        stages["rho"] = {"status": "ok", "rho": rho}
    except KernelNonConvergent:
        stages["rho"] = {"status": "infinite-rho"}

    if taxes is not None:
        try:
            poa = empirical_poa(instance, taxes, cap=args.enum_cap)
            stages["poa"] = {"status": "ok", **poa.to_json()}
        except TooLarge as exc:
            stages["poa"] = {"status": "too-large", "detail": str(exc)}
        if rho is not None:
            try:
                smooth = check_smoothness(instance, taxes, profile, rho,
                                          cap=args.enum_cap)
                stages["smoothness"] = {"status": "ok", **smooth.to_json()}
            except TooLarge as exc:
                stages["smoothness"] = {"status": "too-large", "detail": str(exc)}
        else:
            stages["smoothness"] = {"status": "skipped"}
    else:
        stages["poa"] = {"status": "skipped"}
        stages["smoothness"] = {"status": "skipped"}

    _emit(args, bundle, "design_bundle.json")
    if args.out and taxes is not None:
        taxes.save(os.path.join(args.out, "taxes.json"))
    if args.out and profile is not None:
        profile.save(os.path.join(args.out, "relaxation.json"))
    return EXIT_OK


def cmd_learn(args) -> int:
    instance = GameInstance.load(args.instance)
    taxes = TaxProfile.load(args.taxes)
    cfg = _kernel_config(args)
    seeds = [int(s) + args.seed for s in args.seeds.split(",") if s.strip()]
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)

    rows = []
    summary = []
    for seed in seeds:
        trace = multiplicative_weights_run(instance, taxes, rounds=args.rounds,
                                           eta=args.eta, seed=seed)
        trace_path = os.path.join(out_dir, f"trace-{seed}.jsonl")
        trace.save_jsonl(trace_path)
        best, ratio = best_profile_approximation(instance, taxes, trace,
                                                 cap=args.enum_cap)
        row = {
            "seed": seed, "rounds": args.rounds,
            "max_average_regret": max(trace.average_regrets),
            "best_sc": trace.best_sc,
            "best_profile": list(best.choices),
            "ratio": ratio,
        }
        summary.append(row)
        rows.append([seed, args.rounds, row["max_average_regret"],
                     trace.best_sc, "" if ratio is None else ratio])

    with open(os.path.join(out_dir, "learn_summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "rounds", "max_average_regret", "best_sc", "ratio"])
        writer.writerows(rows)
    print(json.dumps({"runs": summary}, indent=2))
    return EXIT_OK


def cmd_forge(args) -> int:
    if args.forge_command == "random":
        basis = [_parse_basis(args)]
        instance = forge.random_instance(
            num_players=args.players, num_resources=args.resources, basis=basis,
            strategy_count_range=(args.min_strategies, args.max_strategies),
            strategy_size_range=(args.min_size, args.max_size),
            coeff_range=(args.min_coeff, args.max_coeff), seed=args.seed)
        _emit(args, instance.to_json(), "instance.json")
        return EXIT_OK
    if args.forge_command == "partition":
        basis = _parse_basis(args)
        system = forge.build_partitioning_system(
            n=args.n, beta=args.beta, h=args.h, k=args.k, eta=args.eta,
            basis=basis, seed=args.seed, mode=args.mode, samples=args.samples)
        _emit(args, system.to_json(), "partitioning_system.json")
        return EXIT_OK
    if args.forge_command == "reduce":
        basis = _parse_basis(args)
        lc = forge.LabelCoverInstance.load(args.labelcover)
        ps_params = {"n": args.n, "k": args.k, "eta": args.eta, "mode": args.mode}
        if args.beta is not None:
            ps_params["beta"] = args.beta
        instance, system = forge.reduce_label_cover(lc, ps_params, basis,
                                                    seed=args.seed)
        _emit(args, {"instance": instance.to_json(),
                     "partitioning_system": system.to_json()}, "reduction.json")
        if args.out:
            instance.save(os.path.join(args.out, "instance.json"))
        return EXIT_OK
    raise GameValidationError(f"unknown forge command {args.forge_command!r}")


def cmd_oracle(args) -> int:
    instance = GameInstance.load(args.instance)
    taxes = TaxProfile.load(args.taxes) if args.taxes else None
    report = empirical_poa(instance, taxes, cap=args.enum_cap)
    _emit(args, report.to_json(), "poa_report.json")
    return EXIT_OK


def _add_basis_flags(parser) -> None:
    parser.add_argument("--monomial", type=float, default=None,
                        help="monomial basis x**D")
    parser.add_argument("--table", type=str, default=None,
                        help="table basis, comma-separated values for x=1,2,...")


def _add_kernel_flags(parser) -> None:
    parser.add_argument("--tol-tail", type=float, default=1e-14)
    parser.add_argument("--i-max", type=int, default=10_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tollkit",
        description="design and verify congestion-dependent taxes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze-basis", help="efficiency factors of one basis")
    _add_basis_flags(p)
    _add_kernel_flags(p)
    p.add_argument("--monomial-like", action="store_true",
                   help="evaluate a table basis at real arguments for mu")
    p.add_argument("--x-max", type=int, default=1000)
    p.add_argument("--bell-table", type=int, default=None, metavar="D_MAX",
                   help="also tabulate factors for integer degrees 0..D_MAX")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_analyze_basis)

    p = sub.add_parser("design", help="solve relaxation, build and audit taxes")
    p.add_argument("instance")
    _add_kernel_flags(p)
    p.add_argument("--tol-gap", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--audit-tol", type=float, default=1e-7)
    p.add_argument("--x-max", type=int, default=1000)
    p.add_argument("--enum-cap", type=int, default=10_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("learn", help="multiplicative-weights runs over seeds")
    p.add_argument("instance")
    p.add_argument("--taxes", required=True)
    _add_kernel_flags(p)
    p.add_argument("--rounds", type=int, default=5000)
    p.add_argument("--eta", type=str, default="auto")
    p.add_argument("--seeds", type=str, default="0,1,2")
    p.add_argument("--seed", type=int, default=0,
                   help="offset added to every entry of --seeds")
    p.add_argument("--enum-cap", type=int, default=10_000_000)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("forge", help="generate instances and gadgets")
    forge_sub = p.add_subparsers(dest="forge_command", required=True)

    q = forge_sub.add_parser("random")
    q.add_argument("--players", type=int, required=True)
    q.add_argument("--resources", type=int, required=True)
    _add_basis_flags(q)
    q.add_argument("--min-strategies", type=int, default=1)
    q.add_argument("--max-strategies", type=int, default=3)
    q.add_argument("--min-size", type=int, default=1)
    q.add_argument("--max-size", type=int, default=2)
    q.add_argument("--min-coeff", type=float, default=0.5)
    q.add_argument("--max-coeff", type=float, default=2.0)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", type=str, default=None)
    q.set_defaults(func=cmd_forge)

    q = forge_sub.add_parser("partition")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--beta", type=int, required=True)
    q.add_argument("--h", type=int, required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--eta", type=float, required=True)
    _add_basis_flags(q)
    q.add_argument("--mode", type=str, default="auto",
                   choices=["auto", "exhaustive", "sampled"])
    q.add_argument("--samples", type=int, default=forge.P2_DEFAULT_SAMPLES)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", type=str, default=None)
    q.set_defaults(func=cmd_forge)

    q = forge_sub.add_parser("reduce")
    q.add_argument("--labelcover", required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--eta", type=float, required=True)
    q.add_argument("--beta", type=int, default=None,
                   help="rows in the partitioning system (default: right alphabet)")
    _add_basis_flags(q)
    q.add_argument("--mode", type=str, default="auto",
                   choices=["auto", "exhaustive", "sampled"])
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", type=str, default=None)
    q.set_defaults(func=cmd_forge)

    p = sub.add_parser("oracle", help="brute-force equilibrium report")
    p.add_argument("instance")
    p.add_argument("--taxes", type=str, default=None)
    p.add_argument("--enum-cap", type=int, default=10_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    argv = list(argv)
    if argv[:1] == ["--config"]:
        if len(argv) < 2:
            print("error: --config needs a file", file=sys.stderr)
            return EXIT_PARSE
        try:
            replay = ExperimentConfig.load(argv[1])
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: cannot load config: {exc}", file=sys.stderr)
            return EXIT_PARSE
        argv = list(replay.argv) + argv[2:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, matching the parse-error contract
        return int(exc.code or 0)
    try:
        _write_config(args, argv)
        return args.func(args)
    except (GameValidationError, InvalidParams, InfeasibleParams,
            json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (KernelNonConvergent, KernelOverflow, TooLarge) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConstructionFailed as exc:
        report = {"status": "construction-failed", "detail": str(exc),
                  "worst_margin": exc.worst_margin, "attempts": exc.attempts}
        print(json.dumps(report, indent=2), file=sys.stderr)
        return EXIT_CONSTRUCTION
    except TollkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
