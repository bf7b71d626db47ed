"""Command-line surface binding the pipeline end to end.

One executable with subcommands: dataset generation, parent training,
per-video fine-tuning, evaluation, report comparison, and the gradient
checker. Progress goes to standard error; results go to standard output
or the ``--report`` file. Exit codes: 0 success, 1 usage error, 2
runtime failure.

Settings resolve in three layers: package defaults, then the ``--config``
file, then explicit command-line flags.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, read_config
from .dataset import DatasetError, generate_synthetic, read_dataset, write_dataset
from .metrics import SequenceScore, comparison_csv, comparison_report, scores_csv
from .model import build_model
from .trainer import (
    LOSS_MODES,
    CheckpointError,
    TrainerError,
    embedding_separation_ratio,
    evaluate,
    finetune_online,
    gradcheck_suite,
    load_checkpoint,
    save_checkpoint,
    train_parent,
)

__all__ = ["main", "run"]


class _UsageError(Exception):
    """Bad argv; carries the message argparse produced."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A002 - argparse API
        raise _UsageError(f"{self.prog}: {message}")


class CliError(RuntimeError):
    """Runtime failure surfaced to the user with exit code 2."""


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(text: str, report_path: str | None) -> None:
    """Results go to --report when given, standard output otherwise."""
    if report_path is None:
        sys.stdout.write(text)
    else:
        Path(report_path).write_text(text, encoding="utf-8")
        _progress(f"wrote {report_path}")


def _run_config(args) -> RunConfig:
    config = read_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "loss", None) is not None:
        config = replace(config, loss_mode=args.loss)
    if getattr(args, "seed", None) is not None and args.command == "gen-data":
        config = replace(config, data_seed=args.seed)
    return config


# -- subcommand handlers -----------------------------------------------------


def _cmd_gen_data(args) -> int:
    config = _run_config(args)
    synth = config.synth_config()
    _progress(
        f"generating {synth.num_train_videos} train / {synth.num_test_videos} test "
        f"videos ({synth.image_size}x{synth.image_size}, seed {synth.seed})"
    )
    train, test = generate_synthetic(synth)
    write_dataset(args.out, train, test)
    _progress(f"wrote dataset to {args.out}")
    return 0


def _cmd_train_parent(args) -> int:
    config = _run_config(args)
    train, _ = read_dataset(args.data)
    model = build_model(config.model_config())
    cfg = config.train_config()
    _progress(
        f"parent training: {len(train)} videos, loss_mode={cfg.loss_mode}, "
        f"{cfg.parent_epochs} epochs, lr={cfg.learning_rate:g}, seed={cfg.seed}"
    )
    ckpt, history = train_parent(
        model,
        train,
        cfg,
        config.pair_config(),
        config.center_config(),
        config.mixed_config(),
        on_epoch=lambda epoch, loss: _progress(f"epoch {epoch + 1}: mean loss {loss:.4f}"),
    )
    save_checkpoint(args.out, ckpt)
    _progress(f"saved checkpoint to {args.out} (final mean loss {history[-1]:.4f})")
    return 0


def _find_video(data_dir: str, name: str):
    train, test = read_dataset(data_dir)
    videos = {v.name: v for v in [*train, *test]}
    if name not in videos:
        available = ", ".join(sorted(videos))
        raise CliError(f"video {name!r} not in {data_dir} (available: {available})")
    return videos[name]


def _cmd_finetune(args) -> int:
    config = _run_config(args)
    parent = load_checkpoint(args.parent)
    video = _find_video(args.data, args.video)
    cfg = config.train_config()
    _progress(f"fine-tuning on {video.name!r} frame 0 for {cfg.finetune_iters} iterations")
    ckpt = finetune_online(parent, video.frames[0], video.masks[0], cfg)
    save_checkpoint(args.out, ckpt)
    _progress(f"saved checkpoint to {args.out}")
    return 0


def _scores_text(scores: list[SequenceScore]) -> str:
    """Human-readable score table followed by its comma-separated form."""
    name_w = max(8, max(len(s.sequence_name) for s in scores))
    lines = [f"{'sequence':<{name_w}}  j_mean"]
    for s in scores:
        lines.append(f"{s.sequence_name:<{name_w}}  {100.0 * s.j_mean:>6.1f}")
    mean = sum(s.j_mean for s in scores) / len(scores)
    lines.append(f"{'mean':<{name_w}}  {100.0 * mean:>6.1f}")
    return "\n".join(lines) + "\n\n" + scores_csv(scores)


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.model)
    model = ckpt.to_model()
    train, test = read_dataset(args.data)
    videos = train if args.split == "train" else test
    if not videos:
        raise CliError(f"split {args.split!r} of {args.data} has no videos")
    if args.metric == "separation":
        ratio = embedding_separation_ratio(model, videos)
        text = (
            f"embedding separation ratio over {len(videos)} {args.split} videos: "
            f"{ratio:.6f}\n\nmetric,value\nseparation_ratio,{ratio:.6f}\n"
        )
    else:
        scores = []
        for video in videos:
            _progress(f"evaluating {video.name}")
            scores.append(evaluate(model, video))
        text = _scores_text(scores)
    _emit(text, args.report)
    return 0


def _read_scores_report(path: str) -> list[SequenceScore]:
    """Parse the comma-separated section of a report written by eval."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror or exc}") from exc
    try:
        start = lines.index("sequence,j_mean") + 1
    except ValueError:
        raise CliError(f"{path}: no 'sequence,j_mean' section found") from None
    scores = []
    for line in lines[start:]:
        if not line.strip():
            break
        name, _, value = line.partition(",")
        try:
            scores.append(SequenceScore(name, (), float(value)))
        except ValueError:
            raise CliError(f"{path}: bad score row {line!r}") from None
    if not scores:
        raise CliError(f"{path}: empty score section")
    return scores


def _cmd_compare(args) -> int:
    scores_a = _read_scores_report(args.report_a)
    scores_b = _read_scores_report(args.report_b)
    labels = (Path(args.report_a).stem or "report_a", Path(args.report_b).stem or "report_b")
    if labels[0] == labels[1]:
        labels = ("report_a", "report_b")
    try:
        text = comparison_report(scores_a, scores_b, labels) + "\n" + comparison_csv(
            scores_a, scores_b
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    sys.stdout.write(text)
    return 0


def _cmd_gradcheck(args) -> int:
    entries = gradcheck_suite(base_seed=args.seed)
    failed = False
    for e in entries:
        status = "ok" if e.passed else "FAIL"
        failed = failed or not e.passed
        print(
            f"{e.name}: max rel err {e.max_rel_err:.3e} "
            f"({e.n_checked} components checked, {e.n_excluded} excluded) {status}"
        )
    if failed:
        raise CliError("gradient check failed")
    return 0


# -- argv plumbing -----------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="oneshotseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gen-data", help="write a synthetic dataset directory")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="synthesis seed")
    p.add_argument("--config", default=None, help="key=value config file")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train-parent", help="train the parent network")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--loss", choices=LOSS_MODES, default=None, help="video-loss mode")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--config", default=None, help="key=value config file")
    p.set_defaults(func=_cmd_train_parent)

    p = sub.add_parser("finetune", help="fine-tune a parent on one video's first frame")
    p.add_argument("--parent", required=True, help="parent checkpoint path")
    p.add_argument("--video", required=True, help="video name (e.g. test000)")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--config", default=None, help="key=value config file")
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--report", default=None, help="write results here instead of stdout")
    p.add_argument(
        "--metric",
        choices=("j", "separation"),
        default="j",
        help="j: per-sequence J means; separation: embedding separation ratio",
    )
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", help="compare two eval reports sequence by sequence")
    p.add_argument("--report-a", required=True, help="first eval report")
    p.add_argument("--report-b", required=True, help="second eval report")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference check of every loss")
    p.add_argument("--seed", type=int, default=0, help="base seed for the check instances")
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def run(argv: list[str]) -> int:
    """Execute one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        print(parser.format_usage().rstrip(), file=sys.stderr)
        return 1
    except SystemExit as exc:
        # argparse exits directly for --help; mirror its code
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (CliError, ConfigError, DatasetError, CheckpointError, TrainerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
