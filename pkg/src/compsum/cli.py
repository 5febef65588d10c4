"""Command-line interface.

Commands: ``transform-table``, ``verify``, ``gaps``, ``train``,
``evaluate``. Exit codes: 0 ok, 1 usage or config error, 2 verification
failure. Output files are written to a temporary sibling and renamed on
success, so rejected runs never leave partial outputs.
"""

import argparse
import dataclasses
import inspect
import math
import os
import sys
import tempfile

import numpy as np

from . import config as cfgmod
from . import suites, transform
from .config import ConfigError
from .models import load_model, save_model
from .train import (
    evaluate,
    gaussian_mixture_dataset,
    make_model,
    margin_task_dataset,
    train_adv_comp_sum,
    train_standard,
    train_standard_best_lr,
)

METRICS_HEADER = "epoch,lr,train_loss,clean_acc,robust_acc,checkpoint_flag"


def _fmt(v):
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if v == 0.0:
            v = 0.0  # normalize negative zero
        return f"{v:.17g}"
    return str(v)


def write_csv(path, header, rows):
    """Write header plus rows atomically (temp file, rename on success)."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(row + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _metrics_rows(history):
    rows = []
    for h in history:
        rows.append(",".join([
            str(h["epoch"]), _fmt(float(h["lr"])), _fmt(float(h["train_loss"])),
            _fmt(float(h["clean_acc"])), _fmt(float(h["robust_acc"])),
            str(h["checkpoint_flag"]),
        ]))
    return rows


def _build_dataset(values):
    kind = values["data.kind"]
    if kind == "gaussian_mixture":
        return gaussian_mixture_dataset(
            n_classes=values["data.classes"], dim=values["data.dim"],
            n_train=values["data.train"], n_test=values["data.test"],
            center_scale=values["data.center_scale"],
            noise=values["data.noise"], seed=values["seed"])
    if kind == "margin_task":
        return margin_task_dataset(
            n_train=values["data.train"], n_test=values["data.test"],
            dim=values["data.dim"], center=values["data.center"],
            sigma=values["data.sigma"], seed=values["seed"])
    raise ConfigError(f"unknown data.kind {kind!r}")


def cmd_transform_table(args):
    taus = [float(t) for t in args.taus.split(",") if t.strip()]
    n = args.n
    grid = args.grid
    header = "tau,beta,T,T_tilde,t,Gamma,Gamma_tilde"
    rows = []
    for tau in taus:
        for beta in np.linspace(0.0, 1.0, grid):
            tval = transform.t_tau(beta, tau, n)
            rows.append(",".join(_fmt(v) for v in (
                tau, beta, tval, transform.t_tilde(beta, tau, n),
                tval, transform.gamma_tau(tval, tau, n),
                transform.gamma_tilde(tval, tau, n))))
    write_csv(args.out, header, rows)
    return 0


def cmd_verify(args):
    runner = suites.SUITES[args.suite]
    accepted = inspect.signature(runner).parameters
    kwargs = {}
    if args.count is not None and "count" in accepted:
        kwargs["count"] = args.count
    if args.seed is not None and "seed" in accepted:
        kwargs["seed"] = args.seed
    header, rows, violations = runner(**kwargs)
    if args.out:
        write_csv(args.out, header, rows)
    for v in violations:
        print(f"VIOLATION: {v}", file=sys.stderr)
    print(f"suite={args.suite} checks emitted={len(rows)} "
          f"violations={len(violations)}")
    return 2 if violations else 0


def cmd_gaps(args):
    header, rows = suites.gap_table(
        args.lam, args.n, args.r_star,
        [float(t) for t in args.taus.split(",") if t.strip()])
    write_csv(args.out, header, rows)
    return 0


def _train_single(values, data, tau, out_path, checkpoint_path):
    adversarial = None
    ball = None
    if values["train.mode"] == "adversarial":
        adversarial = cfgmod.adv_params_from(values, data.n_classes)
        ball = cfgmod.ball_from(values)
    elif values["train.mode"] != "standard":
        raise ConfigError(f"unknown train.mode {values['train.mode']!r}")
    cfg = cfgmod.train_config_from(values, tau=tau, adversarial=adversarial,
                                   ball=ball)

    def factory():
        return make_model(values["model.kind"], data.X_train.shape[1],
                          data.n_classes, hidden=values["model.hidden"],
                          seed=values["seed"])

    if adversarial is not None:
        model, history = train_adv_comp_sum(data, factory(), cfg)
    elif values["train.lr_grid"]:
        model, history, _ = train_standard_best_lr(
            data, factory, cfg, lr_grid=values["train.lr_grid"])
    else:
        model, history = train_standard(data, factory(), cfg)
    write_csv(out_path, METRICS_HEADER, _metrics_rows(history))
    save_model(model, checkpoint_path)
    return model, history


def cmd_train(args):
    values = cfgmod.load_config(args.config)
    if args.seed is not None:
        values["seed"] = args.seed
    data = _build_dataset(values)
    out = args.out or "metrics.csv"
    base, ext = os.path.splitext(out)
    sweep = values["train.tau_sweep"]
    if sweep:
        for tau in sweep:
            tag = f"{base}_tau{tau:g}"
            _train_single(values, data, tau, tag + (ext or ".csv"),
                          tag + ".ckpt")
    else:
        _train_single(values, data, values["train.tau"], out,
                      base + ".ckpt")
    return 0


def cmd_evaluate(args):
    values = cfgmod.load_config(args.config)
    if args.seed is not None:
        values["seed"] = args.seed
    ckpt = args.checkpoint or values["eval.checkpoint"]
    if not ckpt:
        raise ConfigError("evaluate needs --checkpoint or eval.checkpoint")
    model = load_model(ckpt)
    data = _build_dataset(values)
    ball = None
    attack = None
    if values["train.mode"] == "adversarial" or args.robust:
        ball = cfgmod.ball_from(values)
        attack = cfgmod.adv_params_from(values, data.n_classes)
        attack = dataclasses.replace(attack,
                                     pgd_steps=values["eval.attack_steps"])
    metrics = evaluate(model, data.X_test, data.y_test, ball, attack)
    header = ",".join(metrics.keys())
    row = ",".join(_fmt(float(v)) for v in metrics.values())
    if args.out:
        write_csv(args.out, header, row.split("\n"))
    print(header)
    print(row)
    return 0


def _add_common(p, out_default=None):
    p.add_argument("--out", default=out_default, help="output CSV path")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads (computation is deterministic "
                        "regardless)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="compsum",
        description="comp-sum losses, consistency transforms, gap "
                    "calculators and their verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform-table",
                       help="emit beta/T/T_tilde/t/Gamma/Gamma_tilde grids")
    p.add_argument("--taus", default="0,0.5,1,1.5,2")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--grid", type=int, default=51)
    _add_common(p, out_default="transform_table.csv")
    p.set_defaults(func=cmd_transform_table)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", required=True, choices=sorted(suites.SUITES))
    p.add_argument("--count", type=int, default=None,
                   help="instance count override")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gaps", help="emit the deterministic-case gap-bound "
                                    "table over tau")
    p.add_argument("--lam", type=float, default=2.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--r-star", dest="r_star", type=float, default=1.0)
    p.add_argument("--taus", default="0,0.5,1,1.5,2")
    _add_common(p, out_default="gaps.csv")
    p.set_defaults(func=cmd_gaps)

    key_help = "config keys: " + ", ".join(sorted(cfgmod.CONFIG_KEYS))
    p = sub.add_parser("train", help="train per the config file",
                       epilog=key_help)
    p.add_argument("--config", required=True)
    _add_common(p, out_default="metrics.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint",
                       epilog=key_help)
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--robust", action="store_true",
                   help="also attack with the config's ball")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit status 2 for usage errors; remap to 1
        return 0 if exc.code == 0 else 1
    if getattr(args, "threads", None):
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
