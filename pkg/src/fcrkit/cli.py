"""Command-line interface.

Subcommands::

    fcrkit simulate  --config cfg.json --out DIR [--seed N]
    fcrkit estimate  --config cfg.json --data data.csv --out DIR
    fcrkit intervals --config cfg.json --data data.csv --out DIR
    fcrkit evaluate  --config cfg.json --out DIR [--threads N]
    fcrkit compare   --config cfg.json --out DIR [--threads N]

Exit codes: 0 success, 1 input/config error, 2 numeric non-convergence.
``--seed`` and ``--threads`` override the config; thread count never changes
results.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import backend
from .dataio import (
    RunConfig,
    dump_json,
    eval_long_rows,
    interval_report_json_dict,
    load_config,
    read_dataset,
    write_compare_table,
    write_dataset,
    write_eval_long_csv,
    write_interval_report,
    write_replicate_table,
    write_truth,
)
from .errors import ConfigError, DataFormatError
from .estimation import fit_marginal_mle, fit_moments
from .mc import Scenario, compare_scenarios, replicate_draws, run_scenario
from .model import MixturePrior
from .procedures import run_procedure
from .selection import Batch, select

__all__ = ["main"]


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _require(cfg: RunConfig, names: list[str]) -> list[str]:
    missing = [n for n in names if getattr(cfg, n) is None]
    return missing


def _load_batch(cfg: RunConfig, data_path: str) -> Batch:
    ids, x, sigma2_file = read_dataset(data_path)
    sigma2 = cfg.sigma2
    if sigma2_file is not None:
        if sigma2 is not None and abs(sigma2 - sigma2_file) > 1e-12:
            print(
                f"warning: dataset sigma column (sigma2={sigma2_file!r}) overrides "
                f"config sigma2={sigma2!r}",
                file=sys.stderr,
            )
        sigma2 = sigma2_file
    if sigma2 is None:
        raise ConfigError("sigma2 missing: set it in the config or a dataset sigma column")
    return Batch(ids=tuple(ids), x=x, sigma2=sigma2)


def _prior_for_batch(cfg: RunConfig, batch: Batch) -> MixturePrior | None:
    if cfg.prior is None:
        return None
    if cfg.prior.sigma2 != batch.sigma2:
        return MixturePrior(p=cfg.prior.p, tau2=cfg.prior.tau2, sigma2=batch.sigma2)
    return cfg.prior


def _fit_batch(cfg: RunConfig, batch: Batch):
    if cfg.estimation_method == "Moments":
        return fit_moments(batch)
    return fit_marginal_mle(
        batch, tol=cfg.estimation_tol, max_iter=cfg.estimation_max_iter
    )


def cmd_simulate(cfg: RunConfig, out_dir: str) -> int:
    missing = _require(cfg, ["prior", "m"])
    if missing:
        return _fail(f"simulate needs config fields: {', '.join(missing)}")
    theta, x = replicate_draws(cfg.seed, 0, cfg.m, cfg.prior)
    width = len(str(cfg.m - 1))
    ids = [f"unit{idx:0{width}d}" for idx in range(cfg.m)]
    write_dataset(os.path.join(out_dir, "dataset.csv"), ids, x)
    write_truth(os.path.join(out_dir, "truth.csv"), ids, theta)
    print(f"wrote {cfg.m} observations to {out_dir}/dataset.csv (+ truth.csv)")
    return 0


def cmd_estimate(cfg: RunConfig, data_path: str, out_dir: str) -> int:
    batch = _load_batch(cfg, data_path)
    fit = _fit_batch(cfg, batch)
    dump_json(fit.to_json_dict(), os.path.join(out_dir, "fit.json"))
    print(
        f"method={fit.method} p={fit.prior.p:.6g} tau2={fit.prior.tau2:.6g} "
        f"loglik={fit.loglik:.6g} iterations={fit.iterations} converged={fit.converged}"
    )
    return 0 if fit.converged else 2


def cmd_intervals(cfg: RunConfig, data_path: str, out_dir: str) -> int:
    missing = _require(cfg, ["rule"])
    if missing:
        return _fail(f"intervals needs config fields: {', '.join(missing)}")
    batch = _load_batch(cfg, data_path)
    sel = select(batch, cfg.rule)

    needs_prior = any(p in ("QH", "EBFCR") for p in cfg.procedures)
    prior = None
    fit = None
    if needs_prior:
        if cfg.eb_mode == "EstimatedPrior":
            fit = _fit_batch(cfg, batch)
            prior = fit.prior
        else:
            prior = _prior_for_batch(cfg, batch)
            if prior is None:
                return _fail(
                    "intervals with OraclePrior needs a 'prior' config entry "
                    "(or eb_mode=EstimatedPrior)"
                )

    summary: dict = {
        "m": batch.m,
        "R": sel.R,
        "q": cfg.q,
        "rule": cfg.rule.describe(),
        "eb_mode": cfg.eb_mode if needs_prior else None,
        "empty_selection": sel.R == 0,
        "average_length": {},
        "length_ratios": {},
    }
    if fit is not None:
        summary["fit"] = fit.to_json_dict()
    elif prior is not None:
        summary["prior"] = {"p": prior.p, "tau2": prior.tau2, "sigma2": prior.sigma2}

    lengths: dict[str, float] = {}
    for name in cfg.procedures:
        report = run_procedure(name, batch, sel, prior, cfg.q, cfg.qh_denominator)
        write_interval_report(
            os.path.join(out_dir, f"intervals_{name}.csv"), report
        )
        lengths[name] = report.average_length
        summary["average_length"][name] = report.average_length
    for name in cfg.procedures:
        for other in cfg.procedures:
            if name != other and lengths[other] > 0.0:
                summary["length_ratios"][f"{name}_vs_{other}"] = (
                    lengths[name] / lengths[other]
                )
    dump_json(summary, os.path.join(out_dir, "intervals_summary.json"))
    if sel.R == 0:
        print("empty selection: no intervals constructed")
    else:
        parts = ", ".join(f"{k}={v:.6g}" for k, v in lengths.items())
        print(f"R={sel.R} of m={batch.m}; average lengths: {parts}")
    return 0


def _scenarios_from_config(cfg: RunConfig) -> list[Scenario]:
    missing = _require(cfg, ["prior", "m", "rule"])
    if missing:
        raise ConfigError(f"evaluation needs config fields: {', '.join(missing)}")
    return [
        Scenario(
            prior=cfg.prior,
            m=cfg.m,
            rule=cfg.rule,
            q=cfg.q,
            procedure=name,
            eb_mode=cfg.eb_mode,
            replicates=cfg.replicates,
            seed=cfg.seed,
            qh_denominator=cfg.qh_denominator,
        )
        for name in cfg.procedures
    ]


def _scenario_label(cfg: RunConfig) -> str:
    rule = cfg.rule.describe()
    rule_txt = rule.pop("kind") + "-" + "-".join(str(v) for v in rule.values())
    return (
        f"m{cfg.m}_p{cfg.prior.p:g}_tau2{cfg.prior.tau2:g}_{rule_txt}"
        f"_q{cfg.q:g}_{cfg.eb_mode}"
    )


def cmd_evaluate(cfg: RunConfig, out_dir: str) -> int:
    scenarios = _scenarios_from_config(cfg)
    label = _scenario_label(cfg)
    long_rows = []
    for s in scenarios:
        report, table = run_scenario(s, threads=cfg.threads, return_table=True)
        dump_json(report.to_json_dict(), os.path.join(out_dir, f"eval_{s.procedure}.json"))
        write_replicate_table(
            os.path.join(out_dir, f"replicates_{s.procedure}.csv"), table
        )
        long_rows.extend(eval_long_rows(label, report))
        print(
            f"{s.procedure}: fcr_hat={report.fcr_hat:.6g} (se {report.fcr_se:.3g}) "
            f"avg_length={report.avg_length:.6g} avg_R={report.avg_R:.6g}"
        )
    write_eval_long_csv(os.path.join(out_dir, "eval_long.csv"), long_rows)
    return 0


def cmd_compare(cfg: RunConfig, out_dir: str) -> int:
    scenarios = _scenarios_from_config(cfg)
    reports, table = compare_scenarios(scenarios, threads=cfg.threads)
    write_compare_table(os.path.join(out_dir, "compare.csv"), table)
    dump_json(
        {"rows": table, "replicates": cfg.replicates, "seed": cfg.seed},
        os.path.join(out_dir, "compare.json"),
    )
    for row in table:
        ratio = row["length_ratio_vs_by"]
        ratio_txt = f" ({100.0 * ratio:.1f}% of BY length)" if ratio is not None else ""
        print(
            f"{row['procedure']}: fcr_hat={row['fcr_hat']:.6g} "
            f"avg_length={row['avg_length']:.6g}{ratio_txt}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fcrkit",
        description=(
            "Interval estimation for selected normal means under a "
            "spike-and-slab empirical Bayes model."
        ),
    )
    parser.add_argument(
        "--backend-info", action="store_true",
        help="print the active numerical backend and exit",
    )
    sub = parser.add_subparsers(dest="command")
    for name, needs_data in (
        ("simulate", False),
        ("estimate", True),
        ("intervals", True),
        ("evaluate", False),
        ("compare", False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to JSON config")
        if needs_data:
            p.add_argument("--data", required=True, help="path to dataset CSV")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument(
            "--threads", type=int, default=None,
            help="worker threads (never changes results)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.backend_info:
        print(f"backend: {backend.backend_name()}")
        return 0
    if args.command is None:
        build_parser().print_help()
        return 1
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must fit in unsigned 64 bits")
            cfg = _replace_cfg(cfg, seed=args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg = _replace_cfg(cfg, threads=args.threads)
        out_dir = args.out
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.data, out_dir)
        if args.command == "intervals":
            return cmd_intervals(cfg, args.data, out_dir)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, out_dir)
        if args.command == "compare":
            return cmd_compare(cfg, out_dir)
        return _fail(f"unknown command {args.command!r}")
    except (ConfigError, DataFormatError, ValueError) as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(f"I/O failure: {exc}")


def _replace_cfg(cfg: RunConfig, **kw) -> RunConfig:
    from dataclasses import replace

    return replace(cfg, **kw)


if __name__ == "__main__":
    raise SystemExit(main())
