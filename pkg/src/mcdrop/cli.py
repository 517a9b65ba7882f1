"""Operator CLI: one subcommand per experiment.

Every command reads flags (optionally seeded from a --config file of JSON or
key=value lines), runs one experiment, writes a canonical JSON report, and
exits 0.  Usage errors exit 2; runtime failures print a machine-readable
error to stderr and exit 1.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import reports
from .active import ActiveLearner, ALConfig
from .checkpoint import load_checkpoint, save_checkpoint
from .data import SplitSpec, generate_synthetic, load_csv, split
from .errors import McdropError, ValidationError
from .mc import McConfig, dump_posteriors, mc_predict_batch
from .nn import Network, NetworkConfig
from .rejection import (export_curve_csv, partition_counts, referral_curve,
                        rejection_metrics, threshold_sweep)
from .train import TrainConfig, grid_search_dropout, train


def _parse_floats(text):
    return [float(v) for v in str(text).split(",") if v != ""]


def _parse_ints(text):
    return [int(v) for v in str(text).split(",") if v != ""]


def _load_config_file(path):
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(text)
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(
                f"config line {line_no} is not key=value: {line!r}"
            )
        key, value = line.split("=", 1)
        try:
            values[key.strip()] = json.loads(value.strip())
        except json.JSONDecodeError:
            values[key.strip()] = value.strip()
    return values


def _add_data_args(parser):
    parser.add_argument("--data", help="CSV file with a label,f0,f1,... header")
    parser.add_argument("--synthetic", action="store_true",
                        help="generate a two-class Gaussian dataset instead")
    parser.add_argument("--n", type=int, default=1000)
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--bayes-error", type=float, default=0.1)
    parser.add_argument("--data-seed", type=int, default=None,
                        help="seed for synthetic data (defaults to --seed)")


def _load_dataset(args):
    if args.data:
        return load_csv(args.data)
    if args.synthetic:
        seed = args.data_seed if args.data_seed is not None else args.seed
        return generate_synthetic(args.n, args.dim,
                                  bayes_error=args.bayes_error, seed=seed)
    raise ValidationError("pass --data FILE or --synthetic")


def _add_network_args(parser):
    parser.add_argument("--hidden", default="16",
                        help="comma-separated hidden widths, e.g. 16,16")
    parser.add_argument("--activation", default="relu",
                        choices=["relu", "identity"])
    parser.add_argument("--alpha", type=float, default=0.2)
    parser.add_argument("--beta", type=float, default=0.2)
    parser.add_argument("--l2", type=float, default=5e-4)


def _add_train_args(parser):
    parser.add_argument("--lr", type=float, default=0.001)
    parser.add_argument("--momentum", type=float, default=0.9)
    parser.add_argument("--decay-factor", type=float, default=0.1)
    parser.add_argument("--decay-every", type=int, default=5)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=25)


def _network_config(args, dataset):
    hidden = [(w, args.activation) for w in _parse_ints(args.hidden)]
    return NetworkConfig(
        input_dim=dataset.input_dim, num_classes=dataset.num_classes,
        hidden_layers=hidden, alpha=args.alpha, beta=args.beta,
        l2_lambda=args.l2, seed=args.seed,
    )


def _train_config(args):
    return TrainConfig(
        learning_rate=args.lr, momentum=args.momentum,
        lr_decay_factor=args.decay_factor,
        lr_decay_every_epochs=args.decay_every,
        batch_size=args.batch_size, max_epochs=args.epochs, seed=args.seed,
    )


def _mc_config(args):
    return McConfig(T=args.T, base_seed=args.seed,
                    sigma_formula=args.sigma_formula)


def _add_mc_args(parser):
    parser.add_argument("--T", type=int, default=100)
    parser.add_argument("--sigma-formula", default="paper_literal",
                        choices=["paper_literal", "sample_std"])


def _summaries_for(args):
    dataset = _load_dataset(args)
    net = load_checkpoint(args.checkpoint).network
    if dataset.input_dim != net.config.input_dim:
        raise ValidationError(
            f"dataset dim {dataset.input_dim} != network input "
            f"{net.config.input_dim}"
        )
    summaries = mc_predict_batch(net, dataset.X, _mc_config(args),
                                 sample_ids=dataset.ids)
    return dataset, net, summaries


# -- commands --------------------------------------------------------------


def cmd_train(args):
    dataset = _load_dataset(args)
    net = Network(_network_config(args, dataset))
    _, trace, state = train(net, dataset.X, dataset.y, _train_config(args))
    save_checkpoint(args.checkpoint, net, state)
    reports.write_report(args.report, "train", {
        "data": {"name": dataset.name, "n": len(dataset),
                 "input_dim": dataset.input_dim,
                 "num_classes": dataset.num_classes,
                 "checksum": dataset.checksum()},
        "network": net.config.to_dict(),
        "train": _train_config(args).to_dict(),
        "trace": [r.to_dict() for r in trace],
        "final": {"loss": trace[-1].loss if trace else None,
                  "accuracy": trace[-1].accuracy if trace else None},
        "checkpoint": Path(args.checkpoint).name,
    })
    return 0


def cmd_mc_predict(args):
    dataset, net, summaries = _summaries_for(args)
    dump_posteriors(args.posteriors, summaries, full=args.full)
    sigmas = np.array([s.scalar_uncertainty for s in summaries])
    predictions = np.array([s.predicted_class for s in summaries])
    reports.write_report(args.report, "mc-predict", {
        "checkpoint": Path(args.checkpoint).name,
        "mc": _mc_config(args).to_dict(),
        "n": len(summaries),
        "posteriors": Path(args.posteriors).name,
        "scalar_uncertainty": {
            "min": float(sigmas.min()), "max": float(sigmas.max()),
            "mean": float(sigmas.mean()),
        },
        "accuracy": float(np.mean(predictions == dataset.y)),
    })
    return 0


def cmd_sweep_threshold(args):
    dataset, _, summaries = _summaries_for(args)
    rows = threshold_sweep(summaries, dataset.y, sorted(_parse_floats(args.taus)),
                           positive_class=args.positive_class)
    reports.write_report(args.report, "sweep-threshold", {
        "checkpoint": Path(args.checkpoint).name,
        "mc": _mc_config(args).to_dict(),
        "positive_class": args.positive_class,
        "rows": [r.to_dict() for r in rows],
    })
    return 0


def cmd_referral_curve(args):
    dataset, _, summaries = _summaries_for(args)
    fractions = _parse_floats(args.fractions)
    seeds = _parse_ints(args.seeds)
    all_rows, all_raw = [], []
    for mode in args.modes.split(","):
        rows, raw = referral_curve(summaries, dataset.y, fractions,
                                   mode=mode.strip(), seeds=seeds)
        all_rows.extend(rows)
        all_raw.extend(raw)
    if args.csv:
        export_curve_csv(args.csv, all_raw)

    # no-referral baseline: partition counts and metrics over everything
    predictions = np.array([s.predicted_class for s in summaries])
    pc = partition_counts(predictions, dataset.y, referred_ids=[],
                          sample_ids=dataset.ids)
    reports.write_report(args.report, "referral-curve", {
        "checkpoint": Path(args.checkpoint).name,
        "mc": _mc_config(args).to_dict(),
        "policy": {"fractions": fractions, "modes": args.modes.split(","),
                   "seeds": seeds},
        "counts": pc.to_dict(),
        "metrics": rejection_metrics(pc).to_dict(),
        "per_fraction": [r.to_dict() for r in all_rows],
        "csv": Path(args.csv).name if args.csv else None,
    })
    return 0


def cmd_grid_dropout(args):
    dataset = _load_dataset(args)
    base = _network_config(args, dataset)
    result = grid_search_dropout(
        dataset.X, dataset.y, base, _train_config(args),
        alphas=_parse_floats(args.alphas), betas=_parse_floats(args.betas),
        folds=args.folds, seed=args.seed,
    )
    reports.write_report(args.report, "grid-dropout", {
        "folds": args.folds,
        "grid": result.to_dict(),
    })
    return 0


def _al_setup(args):
    dataset = _load_dataset(args)
    pool_frac = 1.0 - args.val_frac - args.test_frac
    if pool_frac <= 0:
        raise ValidationError("val and test fractions leave no pool")
    spec = SplitSpec(train=0.0, val=args.val_frac, test=args.test_frac,
                     pool=pool_frac, stratified=True, seed=args.seed)
    splits = split(dataset, spec)
    cfg = ALConfig(
        network=replace(_network_config(args, splits.pool),
                        input_dim=dataset.input_dim),
        kappa=args.kappa, tau=args.tau, strategy=args.strategy,
        target_accuracy=args.target, patience=args.patience,
        initial_labelled_fraction=args.initial_frac,
        mc=_mc_config(args), train=_train_config(args), seed=args.seed,
    )
    return dataset, splits, cfg


def cmd_active_learn(args):
    if args.oracle != "simulated":
        raise ValidationError(
            "active-learn runs a simulated oracle; use `serve` for human labels"
        )
    dataset, splits, cfg = _al_setup(args)
    learner = ActiveLearner(splits.pool, splits.val, cfg,
                            test_data=splits.test)
    result = learner.run()
    learner.write_manifest(args.manifest, args.checkpoint)
    last = result.history[-1]
    reports.write_report(args.report, "active-learn", {
        "config": cfg.to_dict(),
        "kappa": result.kappa,
        "split_checksums": splits.checksums(),
        "history": result.history_table(),
        "stop_reason": result.stop_reason,
        "final": {"labelled_fraction": last.labelled_fraction,
                  "val_accuracy": last.val_accuracy,
                  "test_accuracy": last.test_accuracy},
        "state_checksum": learner.state_checksum(),
        "manifest": Path(args.manifest).name,
    })
    return 0


def cmd_serve(args):
    import threading

    import uvicorn

    from .active import resume
    from .server import HumanOracle, LabelQueue, StatusBoard, build_app

    dataset, splits, cfg = _al_setup(args)
    queue = LabelQueue(num_classes=dataset.num_classes)
    board = StatusBoard()
    oracle = HumanOracle(queue, timeout=args.batch_timeout)

    def on_iteration(learner):
        record = learner.state.history[-1]
        board.update(iteration=record.iteration,
                     labelled_fraction=record.labelled_fraction,
                     validation_accuracy=record.val_accuracy,
                     run_state="running")

    manifest = Path(args.manifest)
    if manifest.exists():
        learner = resume(manifest, splits.pool, splits.val,
                         test_data=splits.test, oracle=oracle)
        learner.on_iteration = on_iteration
        if learner.state.history:
            on_iteration(learner)
    else:
        learner = ActiveLearner(splits.pool, splits.val, cfg, oracle=oracle,
                                test_data=splits.test,
                                on_iteration=on_iteration)

    def run_loop():
        board.update(run_state="running")
        try:
            result = learner.run()
            board.update(run_state="finished", stop_reason=result.stop_reason)
        except McdropError as exc:
            board.update(run_state="failed", stop_reason=str(exc))
        finally:
            learner.write_manifest(args.manifest, args.checkpoint)

    thread = threading.Thread(target=run_loop, daemon=True)
    thread.start()

    app = build_app(queue, board)
    ui_dir = Path(args.ui_dir) if args.ui_dir else None
    if ui_dir and ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export_report(args):
    merged = {"reports": {}}
    for path in args.inputs:
        doc = reports.read_report(path)
        merged["reports"][Path(path).name] = doc
    reports.write_report(args.out, "export-report", merged)
    return 0


# -- parser ----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mcdrop",
        description="MC-dropout uncertainty, rejection, and active learning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None,
                       help="JSON or key=value file of flag defaults")

    p = sub.add_parser("train", help="fit a dropout classifier")
    common(p)
    _add_data_args(p)
    _add_network_args(p)
    _add_train_args(p)
    p.add_argument("--checkpoint", default="train_checkpoint.json")
    p.add_argument("--report", default="train_report.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("mc-predict", help="MC-dropout posterior summaries")
    common(p)
    _add_data_args(p)
    _add_mc_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--posteriors", default="posteriors.jsonl")
    p.add_argument("--full", action="store_true",
                   help="include the full samples matrix per line")
    p.add_argument("--report", default="mc_predict_report.json")
    p.set_defaults(func=cmd_mc_predict)

    p = sub.add_parser("sweep-threshold", help="per-threshold referral table")
    common(p)
    _add_data_args(p)
    _add_mc_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--taus", default="0.08,0.1,0.2,0.3")
    p.add_argument("--positive-class", type=int, default=1)
    p.add_argument("--report", default="sweep_report.json")
    p.set_defaults(func=cmd_sweep_threshold)

    p = sub.add_parser("referral-curve",
                       help="informed vs random referral curves")
    common(p)
    _add_data_args(p)
    _add_mc_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--fractions", default="0,0.1,0.2,0.3,0.4,0.5")
    p.add_argument("--modes", default="informed,random")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--csv", default=None)
    p.add_argument("--report", default="referral_report.json")
    p.set_defaults(func=cmd_referral_curve)

    p = sub.add_parser("grid-dropout",
                       help="cross-validated dropout-rate grid search")
    common(p)
    _add_data_args(p)
    _add_network_args(p)
    _add_train_args(p)
    p.add_argument("--alphas", default="0.0,0.25,0.5")
    p.add_argument("--betas", default="0.0,0.2,0.4")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--report", default="grid_report.json")
    p.set_defaults(func=cmd_grid_dropout)

    def al_args(p):
        common(p)
        _add_data_args(p)
        _add_network_args(p)
        _add_train_args(p)
        _add_mc_args(p)
        p.add_argument("--val-frac", type=float, default=0.15)
        p.add_argument("--test-frac", type=float, default=0.2)
        p.add_argument("--strategy", default="mc_dropout_variance",
                       choices=["mc_dropout_variance", "least_confidence",
                                "random"])
        p.add_argument("--kappa", type=int, default=None)
        p.add_argument("--tau", type=float, default=0.02)
        p.add_argument("--target", type=float, default=1.0)
        p.add_argument("--patience", type=int, default=2)
        p.add_argument("--initial-frac", type=float, default=0.06)

    p = sub.add_parser("active-learn", help="uncertainty-guided labeling loop")
    al_args(p)
    p.add_argument("--oracle", default="simulated", choices=["simulated"])
    p.add_argument("--manifest", default="al_manifest.json")
    p.add_argument("--checkpoint", default="al_checkpoint.json")
    p.add_argument("--report", default="al_report.json")
    p.set_defaults(func=cmd_active_learn)

    p = sub.add_parser("serve",
                       help="labeling service with a live human-in-the-loop run")
    al_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--batch-timeout", type=float, default=24 * 3600.0)
    p.add_argument("--manifest", default="serve_manifest.json",
                   help="run manifest; resumed when it already exists, "
                        "written on loop completion")
    p.add_argument("--checkpoint", default="serve_checkpoint.json")
    p.add_argument("--ui-dir", default="frontend",
                   help="directory with the built labeling console "
                        "(index.html + dist/)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-report", help="bundle reports into one document")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", default="combined_report.json")
    p.set_defaults(func=cmd_export_report)

    return parser


def _config_path_from_argv(argv):
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # a --config file provides defaults; explicit flags win on re-parse
    config_path = _config_path_from_argv(argv)
    if config_path:
        defaults = _load_config_file(config_path)
        for action in parser._subparsers._group_actions:
            for sub in action.choices.values():
                known = {a.dest for a in sub._actions}
                sub.set_defaults(**{k: v for k, v in defaults.items()
                                    if k in known})
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except McdropError as exc:
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
