"""Command line: ``celltrack {simulate,train,track,evaluate,ablate}``.

Exit status is 0 on success, 1 when an input fails validation and 2 on a
usage error.
"""
import argparse
import logging
import sys
from pathlib import Path

from . import io
from ._accel import backend
from .features import SpatialEncodingConfig
from .metrics import OpWeights, evaluate
from .pipeline import ablation, ablation_json, train_model
from .simulator import SimConfig, preset, scenario_library, simulate
from .siamese import TrainConfig
from .tracker import TrackerConfig, track_sequence

log = logging.getLogger("celltrack")


def _cmd_simulate(args):
    if args.config:
        d = io.load_json(args.config)
        if not isinstance(d, dict):
            raise io.ValidationError("simulation config must be a JSON object")
        if args.seed is not None:
            d["seed"] = args.seed
        cfg = SimConfig.from_dict(d)
    else:
        cfg = preset(args.preset, seed=args.seed or 0)
    seq = simulate(cfg)
    io.write_sequence(args.out, seq)
    log.info("wrote %d frames, %d tracks to %s", len(seq.frames), len(seq.graph.tracks), args.out)
    return 0


def _cmd_train(args):
    seqs = [io.read_sequence(p) for p in io.find_sequences(args.data)]
    cfg = TrainConfig(args.lr, args.momentum, args.epochs, args.seed, args.neg_per_pos)
    log.info("training on %d sequence(s), backend=%s", len(seqs), backend())
    result = train_model(seqs, cfg, args.n)
    io.write_model(args.out, result.heads, cfg, SpatialEncodingConfig(args.n))
    log.info("loss %.6f -> %.6f", result.loss_history[0], result.loss_history[-1])
    return 0


def _tracker_config(args, n_model):
    n = args.n if args.n is not None else n_model
    if n != n_model:
        raise io.ValidationError(f"--n {n} does not match the model's encoding (n={n_model})")
    return TrackerConfig(alpha=args.alpha, n=n, min_score=args.min_score)


def _cmd_track(args):
    heads, _, n_model = io.read_model(args.model)
    cfg = _tracker_config(args, n_model)
    seq_dirs = io.find_sequences(args.data)
    out = Path(args.out)
    for d in seq_dirs:
        seq = io.read_sequence(d, require_tracks=False)
        res = track_sequence(seq.frames, heads, cfg)
        target = out if len(seq_dirs) == 1 and d == Path(args.data) else out / d.name
        io.write_sequence(target, res, write_images=False)
        log.info("%s: %d tracks", d, len(res.graph.tracks))
    return 0


def _pair_dirs(gt_root, res_root):
    gt_dirs = io.find_sequences(gt_root)
    if len(gt_dirs) == 1 and gt_dirs[0] == Path(gt_root):
        return [(gt_dirs[0], Path(res_root))]
    return [(g, Path(res_root) / g.name) for g in gt_dirs]


def _cmd_evaluate(args):
    weights = OpWeights()
    if args.weights:
        d = io.load_json(args.weights)
        if not isinstance(d, dict):
            raise io.ValidationError("weights file must be a JSON object")
        weights = OpWeights.from_dict(d)
    gts, ress = [], []
    for g, r in _pair_dirs(args.gt, args.res):
        gts.append(io.read_sequence(g))
        ress.append(io.read_sequence(r))
    report = evaluate(gts, ress, weights)
    print(report.to_json())
    return 0


def _cmd_ablate(args):
    heads, _, n_model = io.read_model(args.model)
    cfg = _tracker_config(args, n_model)
    seqs = [io.read_sequence(d) for d in io.find_sequences(args.data)]
    print(ablation_json(ablation(seqs, heads, cfg)))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="celltrack", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render a synthetic sequence with ground truth")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(scenario_library()))
    src.add_argument("--config", help="JSON file with SimConfig fields")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=_cmd_simulate)

    t = sub.add_parser("train", help="train the visual and spatial heads")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=40)
    t.add_argument("--lr", type=float, default=0.0025)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--neg-per-pos", type=int, default=3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--n", type=int, default=4, help="neighbours in the spatial encoding")
    t.set_defaults(func=_cmd_train)

    def tracker_flags(q):
        q.add_argument("--alpha", type=float, default=0.1)
        q.add_argument("--n", type=int, default=None)
        q.add_argument("--min-score", type=float, default=0.0)

    k = sub.add_parser("track", help="track label maps with a trained model")
    k.add_argument("--data", required=True)
    k.add_argument("--model", required=True)
    k.add_argument("--out", required=True)
    tracker_flags(k)
    k.set_defaults(func=_cmd_track)

    e = sub.add_parser("evaluate", help="print SEG/DET/TRA as JSON")
    e.add_argument("--gt", required=True)
    e.add_argument("--res", required=True)
    e.add_argument("--weights", help="JSON file with w_ns, w_fn, w_fp, w_ed, w_ea, w_ec")
    e.set_defaults(func=_cmd_evaluate)

    a = sub.add_parser("ablate", help="compare fusion, visual-only and spatial-only assignment")
    a.add_argument("--data", required=True)
    a.add_argument("--model", required=True)
    tracker_flags(a)
    a.set_defaults(func=_cmd_ablate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on usage errors, 0 for --help
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"celltrack {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
