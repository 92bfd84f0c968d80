"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .flow import LossKind, TrainConfig, TrainingPair, load_model, sample, save_model, train
from .imgcore import linear_to_srgb, read_png, write_png
from .pipeline import (
    DEFAULT_STRENGTHS,
    DEFAULT_TAU,
    DataError,
    build_dataset,
    ingest,
    load_group,
    load_weight_maps,
    read_manifest,
    refresh_weight_maps,
)
from .retinex import InterpolationMethod, alpha_blend, retinex_interpolate
from .service import make_server, serve_forever
from .weights import MaskParams

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_strengths(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad strengths list: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("strengths list is empty")
    return values


def _build_parser() -> _Parser:
    parser = _Parser(prog="clfm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="construct a pseudo-paired dataset from image pairs")
    p.add_argument("--pairs", required=True, help="directory of <id>_low.png / <id>_normal.png")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--strengths", type=_parse_strengths, default=DEFAULT_STRENGTHS)
    p.add_argument("--method", choices=["retinex", "alpha"], default="retinex")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU,
                   help="edge-consistency acceptance threshold")

    p = sub.add_parser("weights", help="recompute cached weight maps for a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--d", type=float, default=3.0, help="unreliability distance (px)")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--wmin", type=float, default=0.2)
    p.add_argument("--dilate", type=int, default=2)

    p = sub.add_parser("train", help="train the toy flow matching model on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--loss", choices=["fm", "wfm"], default="fm")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output model file (.clfm)")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--pretrain-steps", type=int, default=500)

    p = sub.add_parser("enhance", help="enhance an image with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--strength", type=float, required=True)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("interp", help="interpolate between two images at one strength")
    p.add_argument("--i0", required=True)
    p.add_argument("--i1", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--method", choices=["retinex", "alpha"], default="retinex")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="serve the strength studio over HTTP")
    p.add_argument("--dataset", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--model", default=None)
    p.add_argument("--ui", default=None, help="static UI bundle directory")

    return parser


def _cmd_build(args) -> int:
    records = ingest(args.pairs, args.tau)
    method = InterpolationMethod(args.method)
    manifest = build_dataset(records, args.strengths, method, args.out, tau=args.tau)
    accepted = sum(1 for r in manifest.records if r.accepted)
    print(f"built {accepted} pair(s) into {args.out} "
          f"({len(manifest.records) - accepted} rejected)")
    return EXIT_OK


def _cmd_weights(args) -> int:
    params = MaskParams(d=args.d, alpha=args.alpha, w_min=args.wmin, dilate_radius=args.dilate)
    manifest = refresh_weight_maps(args.dataset, params)
    n = sum(1 for entries in manifest.entries.values() for e in entries if e.weight_map)
    print(f"recomputed {n} weight map(s) with d={args.d} alpha={args.alpha} "
          f"wmin={args.wmin} dilate={args.dilate}")
    return EXIT_OK


def _cmd_train(args) -> int:
    dataset_dir = Path(args.dataset)
    manifest = read_manifest(dataset_dir)
    pairs = []
    for rec in manifest.records:
        if not rec.accepted or not manifest.entries.get(rec.pair_id):
            continue
        group = load_group(dataset_dir, manifest, rec.pair_id)
        maps = load_weight_maps(dataset_dir, manifest, rec.pair_id)
        pairs.append(TrainingPair(group.image_at(0.0), group, maps))
    if not pairs:
        raise DataError("dataset has no built pairs to train on")
    strengths = tuple(manifest.strengths) + (1.0,)
    cfg = TrainConfig(
        steps=args.steps,
        seed=args.seed,
        learning_rate=args.lr,
        batch_size=args.batch,
        loss=LossKind(args.loss),
        strengths=strengths,
        pretrain_steps=args.pretrain_steps,
    )
    net = train(pairs, cfg)
    save_model(net, args.out)
    print(f"trained {args.loss} model for {args.steps} step(s) -> {args.out}")
    return EXIT_OK


def _cmd_enhance(args) -> int:
    net = load_model(args.model)
    image = read_png(args.input)
    out = sample(net, image, args.strength, args.steps, args.seed)
    write_png(linear_to_srgb(out), args.out)
    print(f"enhanced {args.input} at s={args.strength} -> {args.out}")
    return EXIT_OK


def _cmd_interp(args) -> int:
    i0 = read_png(args.i0)
    i1 = read_png(args.i1)
    if args.method == "retinex":
        out = retinex_interpolate(i0, i1, args.s)
    else:
        out = alpha_blend(i0, i1, args.s)
    write_png(out, args.out)
    print(f"interpolated at s={args.s} ({args.method}) -> {args.out}")
    return EXIT_OK


def _default_ui_dir() -> str | None:
    for candidate in (Path("frontend/dist"), Path(__file__).resolve().parents[2] / "frontend/dist"):
        if candidate.is_dir():
            return str(candidate)
    return None


def _cmd_serve(args) -> int:
    ui = args.ui if args.ui else _default_ui_dir()
    server = make_server(args.dataset, args.port, args.model, ui)
    serve_forever(server)
    return EXIT_OK


_COMMANDS = {
    "build": _cmd_build,
    "weights": _cmd_weights,
    "train": _cmd_train,
    "enhance": _cmd_enhance,
    "interp": _cmd_interp,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (DataError, ValueError) as exc:
        print(f"clfm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"clfm: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
