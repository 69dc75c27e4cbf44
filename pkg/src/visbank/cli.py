"""Command-line entry point.

Exit codes: 0 success, 1 invalid input (arguments, config, unreadable or
malformed files), 2 runtime failure (including failed self-checks).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import checks, kernels
from .bank import Policy, VisualBank
from .config import RunConfig, default_config, load_config
from .errors import BankFileError, ConfigError
from .harness import run_openset_eval, run_policy_ablation, run_prompt_sweep
from .io import bank_export, bank_import, bank_to_bytes, bank_from_bytes, save_params
from .learner import train_loop
from .synth import RNG_STREAM, generate_world, per_category_stream, rng_for

log = logging.getLogger("visbank")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, out_help: str = "output directory") -> None:
    p.add_argument("--config", type=Path, help="JSON run config (defaults built in)")
    p.add_argument("--seed", type=int, help="run a single seed instead of the config's seed list")
    p.add_argument("--out", type=Path, help=out_help)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="visbank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train the MLP once and write curve, params and bank")
    _common(p)

    for name, text in (("sweep", "prompt-budget sweep"),
                       ("ablate", "averaging vs FIFO update-policy ablation"),
                       ("openset", "open-set insertion of unseen categories")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--workers", type=int, default=1, help="processes for independent seeds")

    p = sub.add_parser("bank-export", help="fill a bank from the configured world and write it")
    _common(p, "bank file to write (or directory for bank.vbnk)")
    p.add_argument("--policy", choices=["averaging", "fifo"], help="override train.policy")

    p = sub.add_parser("bank-import", help="read and validate a bank file")
    _common(p, "optional path for a JSON summary")
    p.add_argument("bank", type=Path, help="bank file to read")

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradient")
    _common(p)

    p = sub.add_parser("selftest", help="oracle equivalence, gradient check and bank round-trip")
    _common(p)
    p.add_argument("--updates", type=int, default=10_000, help="oracle comparisons to run")
    return parser


def _resolve(args) -> tuple[RunConfig, str]:
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError("--config", f"cannot read {args.config}")
        cfg = load_config(args.config)
    else:
        cfg = default_config()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be non-negative")
        return cfg.with_seeds([args.seed]), "cli"
    return cfg, "config"


def _out_dir(args, default: str) -> Path:
    out = args.out if args.out is not None else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    cfg, source = _resolve(args)
    seed = cfg.seeds[0]
    out = _out_dir(args, "results/train")
    world = generate_world(cfg.world_for(seed))
    result = train_loop(world, cfg.train, seed)
    with open(out / "curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mean_ce", "correct_fraction"])
        for epoch, r in enumerate(result.curve, start=1):
            w.writerow([epoch, f"{r.mean_ce:.8f}", f"{r.correct_fraction:.8f}"])
    save_params(result.params, out / "params.npz")
    bank_export(result.bank, out / "bank.vbnk")
    final = result.curve[-1] if result.curve else None
    _write_json(out / "summary.json", {
        "experiment": "train",
        "seed": seed,
        "seed_source": source,
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "kernel_backend": kernels.backend_name(),
        "final_mean_ce": final.mean_ce if final else None,
        "final_correct_fraction": final.correct_fraction if final else None,
    })
    if final:
        print(f"seed {seed}: final mean_ce={final.mean_ce:.4f} "
              f"correct_fraction={final.correct_fraction:.4f} -> {out}")
    return EXIT_OK


def _experiment(runner, default_dir: str):
    def run(args) -> int:
        cfg, source = _resolve(args)
        if args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
        out = _out_dir(args, default_dir)
        report = runner(cfg, workers=args.workers)
        report.write(out, cfg, source)
        for setting, agg in report.aggregates().items():
            print(f"{setting:>20}: accuracy {agg['accuracy_mean']:.4f} "
                  f"+/- {agg['accuracy_std']:.4f} (n={agg['n']})")
        print(f"wrote {out / 'report.csv'}")
        return EXIT_OK
    return run


def _fill_bank(cfg: RunConfig, seed: int, policy: str) -> VisualBank:
    world = generate_world(cfg.world_for(seed))
    cats, _, feats = per_category_stream(world, cfg.eval.prompt_budget, rng_for(seed, RNG_STREAM))
    bank = VisualBank(world.num_categories, cfg.train.slots, world.spec.prompt_dim, policy)
    bank.insert_many(cats, feats)
    return bank


def cmd_bank_export(args) -> int:
    cfg, _ = _resolve(args)
    out = args.out if args.out is not None else Path("bank.vbnk")
    if out.is_dir():
        out = out / "bank.vbnk"
    out.parent.mkdir(parents=True, exist_ok=True)
    bank = _fill_bank(cfg, cfg.seeds[0], args.policy or cfg.train.policy)
    bank_export(bank, out)
    print(f"wrote {bank!r} to {out}")
    return EXIT_OK


def cmd_bank_import(args) -> int:
    if not args.bank.is_file():
        raise ConfigError("bank", f"cannot read {args.bank}")
    bank = bank_import(args.bank)
    doc = {
        "path": str(args.bank),
        "policy": bank.policy.name.lower(),
        "num_categories": bank.num_categories,
        "n": bank.n,
        "d": bank.d,
        "occupancy": [int(x) for x in bank.occupancy],
        "write_cursor": [int(x) for x in bank.cursor],
    }
    if args.out is not None:
        _write_json(args.out, doc)
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg, _ = _resolve(args)
    seeds = cfg.seeds if len(cfg.seeds) >= len(checks.GRADCHECK_SHAPES) else \
        [cfg.seeds[0] + i for i in range(len(checks.GRADCHECK_SHAPES))]
    results = checks.run_gradchecks(cfg.gradcheck.eps, cfg.gradcheck.n_coords, seeds)
    worst = max(err for _, err in results)
    for shape, err in results:
        print("d=%d h=%d D=%d C=%d n_q=%d: max rel err %.3e" % (*shape, err))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        _write_json(args.out / "gradcheck.json", {
            "eps": cfg.gradcheck.eps,
            "cases": [{"shape": list(s), "max_rel_err": float(e)} for s, e in results],
            "max_rel_err": float(worst),
        })
    ok = worst < 1e-4
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_selftest(args) -> int:
    cfg, _ = _resolve(args)
    seed = cfg.seeds[0]
    failures = []
    res = checks.oracle_equivalence(args.updates, seed=seed)
    print(f"oracle equivalence ({kernels.backend_name()}): {res.updates} updates, "
          f"{res.index_mismatches} index / {res.value_mismatches} value mismatches")
    if not res.ok:
        failures.append("oracle")
    grads = checks.run_gradchecks(cfg.gradcheck.eps, cfg.gradcheck.n_coords)
    worst = max(e for _, e in grads)
    print(f"gradient check: max rel err {worst:.3e}")
    if worst >= 1e-4:
        failures.append("gradcheck")
    for policy in Policy:
        bank = _fill_bank(cfg, seed, policy.name.lower())
        if not bank.state_equal(bank_from_bytes(bank_to_bytes(bank))):
            failures.append(f"round-trip {policy.name.lower()}")
    print("bank round-trip: " + ("ok" if not any("round" in f for f in failures) else "FAILED"))
    if failures:
        print("FAIL: " + ", ".join(failures))
        return EXIT_RUNTIME
    print("PASS")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "sweep": _experiment(run_prompt_sweep, "results/sweep"),
    "ablate": _experiment(run_policy_ablation, "results/ablate"),
    "openset": _experiment(run_openset_eval, "results/openset"),
    "bank-export": cmd_bank_export,
    "bank-import": cmd_bank_import,
    "gradcheck": cmd_gradcheck,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"visbank: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, BankFileError) as exc:
        print(f"visbank: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"visbank: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
