"""Command-line entry points: train, eval, stream.

Exit codes: 0 success, 2 usage/argument problems, 3 training diverged.
"""

import argparse
import json
import sys
from pathlib import Path

from . import stream as streaming
from .checkpoint import load_checkpoint
from .errors import NaNLossError
from .events import load_dataset, split_dataset
from .synth import moving_dot_dataset, num_patterns
from .training import RunConfig, evaluate, report, train

DEFAULT_LENGTHS = "10,20,30,40,50,60,70,80,90,100"


def _synthetic_classes(task):
    if not task.startswith("movedot"):
        raise argparse.ArgumentTypeError(f"unknown synthetic task {task!r}; try movedot2")
    try:
        n = int(task[len("movedot"):])
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown synthetic task {task!r}; try movedot2")
    if not 2 <= n <= num_patterns():
        raise argparse.ArgumentTypeError(f"movedot supports 2..{num_patterns()} classes")
    return n


def _lengths(text):
    try:
        out = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad length list {text!r}")
    if not out or any(v < 1 for v in out):
        raise argparse.ArgumentTypeError("lengths must be positive")
    return out


def _add_data_flags(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset directory (root/<class>/<sample>.bin)")
    src.add_argument("--synthetic", type=_synthetic_classes, metavar="TASK",
                     help="built-in task, e.g. movedot2 or movedot10")
    p.add_argument("--truncate", type=int, default=2000,
                   help="keep only the first N events per sequence (default 2000)")
    p.add_argument("--train-count", type=int, default=2000,
                   help="synthetic training sequences (default 2000)")
    p.add_argument("--test-count", type=int, default=500,
                   help="synthetic test sequences (default 500)")
    p.add_argument("--synth-events", type=int, default=400,
                   help="events per synthetic sequence (default 400)")
    p.add_argument("--synth-noise", type=float, default=0.05,
                   help="fraction of spurious synthetic events (default 0.05)")


def _datasets(args, seed):
    if args.synthetic is not None:
        n = args.synthetic
        train_set = moving_dot_dataset(n, max(1, args.train_count // n), seed=seed,
                                       n_events=args.synth_events, noise_rate=args.synth_noise,
                                       split="train")
        test_set = moving_dot_dataset(n, max(1, args.test_count // n), seed=seed + 7_000_003,
                                      n_events=args.synth_events, noise_rate=args.synth_noise,
                                      split="test")
        return train_set, test_set
    root = Path(args.data)
    if (root / "train").is_dir() and (root / "test").is_dir():
        return (load_dataset(root / "train", truncate_to=args.truncate, split="train"),
                load_dataset(root / "test", truncate_to=args.truncate, split="test"))
    full = load_dataset(root, truncate_to=args.truncate)
    return split_dataset(full, 0.9, seed)


def build_parser():
    parser = argparse.ArgumentParser(prog="inode",
                                     description="event-stream classification with an "
                                                 "input-filtering neural ODE")
    sub = parser.add_subparsers(dest="command", required=True)

    pt = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_data_flags(pt)
    pt.add_argument("--model", choices=("inode", "lstm", "bilstm"), default="inode")
    pt.add_argument("--hidden", type=int, default=None,
                    help="state size (default: 30 for inode, 72 for lstm/bilstm)")
    pt.add_argument("--epochs", type=int, default=50)
    pt.add_argument("--lr", type=float, default=1e-3)
    pt.add_argument("--batch", type=int, default=100)
    pt.add_argument("--rho", type=float, default=1.0,
                    help="fraction of the training set to use; batch scales with it")
    pt.add_argument("--s-len", type=int, default=100)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--grad-clip", type=float, default=None)
    pt.add_argument("--out", required=True, help="checkpoint output path")

    pe = sub.add_parser("eval", help="accuracy of a checkpoint across event budgets")
    pe.add_argument("--ckpt", required=True)
    _add_data_flags(pe)
    pe.add_argument("--lengths", type=_lengths, default=_lengths(DEFAULT_LENGTHS))
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--repeats", type=int, default=1)
    pe.add_argument("--json-out", default=None,
                    help="where to write the accuracy table (default <ckpt>.eval.json)")

    ps = sub.add_parser("stream", help="classify a live event stream line by line")
    ps.add_argument("--ckpt", required=True)
    mode = ps.add_mutually_exclusive_group()
    mode.add_argument("--listen", metavar="HOST:PORT",
                      help="serve the line protocol over TCP")
    mode.add_argument("--replay", metavar="FILE.bin",
                      help="feed a binary AER file through the classifier")
    ps.add_argument("--fast", action="store_true",
                    help="ignore event pacing during --replay")
    return parser


def cmd_train(args):
    train_set, test_set = _datasets(args, args.seed)
    hidden = args.hidden if args.hidden is not None else (30 if args.model == "inode" else 72)
    config = RunConfig(
        model=args.model, hidden=hidden, n_classes=train_set.class_count,
        s_len=args.s_len, epochs=args.epochs, lr=args.lr, batch_size=args.batch,
        rho=args.rho, seed=args.seed, grad_clip=args.grad_clip,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    def progress(rec):
        top = rec.accuracies[max(rec.accuracies)]
        print(f"epoch {rec.epoch:4d}  train_loss {rec.train_loss:.4f}  "
              f"test_loss {rec.test_loss:.4f}  acc@{max(rec.accuracies)} {top:.3f}",
              flush=True)

    try:
        trainer = train(config, train_set, test_set, out_path=out,
                        best_path=out.with_suffix(out.suffix + ".best"), progress=progress)
    except NaNLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    paths = report(trainer.log, out.with_suffix(""))
    print(f"wrote {out}, {out.with_suffix(out.suffix + '.best')}, " + ", ".join(paths))
    return 0


def cmd_eval(args):
    path = Path(args.ckpt)
    if not path.is_file():
        print(f"error: no such checkpoint: {path}", file=sys.stderr)
        return 2
    ckpt = load_checkpoint(path)
    _, test_set = _datasets(args, args.seed)
    table = evaluate(ckpt.store, ckpt.stats, ckpt.kind, test_set, args.lengths,
                     seed=args.seed, repeats=args.repeats)
    for n in args.lengths:
        print(f"{n:6d}  {table[n]:.4f}")
    json_out = Path(args.json_out) if args.json_out else path.with_suffix(path.suffix + ".eval.json")
    json_out.write_text(json.dumps({str(k): v for k, v in table.items()}, indent=2) + "\n")
    print(f"wrote {json_out}")
    return 0


def cmd_stream(args):
    path = Path(args.ckpt)
    if not path.is_file():
        print(f"error: no such checkpoint: {path}", file=sys.stderr)
        return 2
    ckpt = load_checkpoint(path)
    if args.replay:
        replay = Path(args.replay)
        if not replay.is_file():
            print(f"error: no such replay file: {replay}", file=sys.stderr)
            return 2
        seq = streaming.load_replay(replay, ckpt.sensor_dims)
        if args.fast:
            n, seconds = streaming.fast_replay(seq, ckpt, sys.stdout)
            rate = f" ({n / seconds:,.0f} events/s)" if seconds > 0 else ""
            print(f"# {n} events in {seconds:.3f}s{rate}", file=sys.stderr)
        else:
            session = streaming.LineSession(streaming.make_session(ckpt))
            streaming.replay_events(seq, session, sys.stdout, pace=True)
        return 0
    if args.listen:
        host, _, port = args.listen.rpartition(":")
        if not host or not port.isdigit():
            print(f"error: bad --listen address {args.listen!r}", file=sys.stderr)
            return 2
        print(f"listening on {host}:{port}", file=sys.stderr)
        streaming.serve_tcp(ckpt, host, int(port))
        return 0
    session = streaming.LineSession(streaming.make_session(ckpt))
    streaming.serve_lines(session)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "train":
        return cmd_train(args)
    if args.command == "eval":
        return cmd_eval(args)
    return cmd_stream(args)


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
