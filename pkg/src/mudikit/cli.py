"""Command-line entry points for the compositing, init, and scoring tools.

Every randomized subcommand requires ``--seed`` and is byte-deterministic
given one: replaying the same invocation reproduces every artifact exactly.
Exit codes: 0 on success, 1 when the invocation or its inputs are invalid,
2 when execution fails after validation. MUDIKIT_THREADS caps fan-out.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import io
from .core import RandomSource, SegmentedSubject
from .dnc import DncConfig, build_matrices, dnc_score, spearman, auroc
from .errors import MudikitError, ParameterError, PoolExhaustedError
from .init import BlockAverageEncoder, InitConfig, LatentGrid, latent_initialize, read_layout_file
from .sandbox import (
    SPRITE_SHAPES,
    AffineDenoiser,
    SpriteSpec,
    TrainingSets,
    gamma_sweep,
    gen_sprites,
    grad_check,
    identity_mixture,
    make_schedule,
    proxy_embed,
    select_top_k,
    worker_count,
)
from .sandbox import sample as run_chain
from .sandbox.experiments import write_sweep_csv, write_sweep_svg
from .segmix import SegMixConfig, build_prior_set, create_seg_mix

__all__ = ["main", "build_parser"]

_SPRITE_PALETTE = (
    (0.90, 0.20, 0.15),
    (0.20, 0.45, 0.90),
    (0.95, 0.80, 0.20),
    (0.30, 0.80, 0.35),
    (0.80, 0.30, 0.80),
    (0.95, 0.55, 0.15),
)


class _Parser(argparse.ArgumentParser):
    """argparse, but usage problems exit 1 (validation) instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        h, w = (int(p) for p in parts)
    except ValueError:
        raise ParameterError(f"size must look like HxW, got {text!r}") from None
    return h, w


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise ParameterError(f"expected comma-separated numbers, got {text!r}") from None


def _existing(path_text: str, flag: str) -> Path:
    path = Path(path_text)
    if not path.exists():
        raise ParameterError(f"{flag}: {path} does not exist")
    return path


def _load_subjects(path_text: str, flag: str = "--subjects") -> list[SegmentedSubject]:
    root = _existing(path_text, flag)
    dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not dirs:
        raise ParameterError(f"{flag}: {root} contains no subject directories")
    return [io.load_subject(d) for d in dirs]


def _pick_pair(subjects, rng: RandomSource):
    if len(subjects) == 2:
        return [subjects[0], subjects[1]]
    first = rng.index(len(subjects))
    second = rng.index(len(subjects) - 1)
    if second >= first:
        second += 1
    return [subjects[first], subjects[second]]


def _write_latent_json(latent: LatentGrid, gamma: float, path) -> None:
    doc = {
        "channels": latent.channels,
        "gamma": float(gamma),
        "height": latent.height,
        "values": [float(v) for v in latent.flattened()],
        "width": latent.width,
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )


def _cmd_segmix(args) -> int:
    subjects = _load_subjects(args.subjects)
    if len(subjects) < 2:
        raise ParameterError("--subjects: need at least two subjects to compose")
    if args.count < 1:
        raise ParameterError(f"--count must be >= 1, got {args.count}")
    config = SegMixConfig(out_size=_parse_size(args.out_size), max_margin=args.max_margin)
    rng = RandomSource(args.seed)

    def compose(index: int):
        child = rng.child(index)
        pair = _pick_pair(subjects, child)
        return create_seg_mix(pair, config, child)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        samples = list(pool.map(compose, range(args.count)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for index, sample in enumerate(samples):
        io.save_bundle(sample, out / f"sample-{index:04d}")
    return 0


def _cmd_prior(args) -> int:
    subjects = _load_subjects(args.subjects)
    if args.count < 1:
        raise ParameterError(f"--count must be >= 1, got {args.count}")
    config = SegMixConfig(out_size=_parse_size(args.out_size), max_margin=args.max_margin)
    rng = RandomSource(args.seed)
    samples = build_prior_set(subjects, args.count, config, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for index, sample in enumerate(samples):
        io.save_bundle(sample, out / f"prior-{index:04d}")
    return 0


def _cmd_init(args) -> int:
    subjects = _load_subjects(args.subjects)
    layout_path = _existing(args.layout, "--layout")
    canvas, boxes = read_layout_file(layout_path, [s.identifier for s in subjects])
    config = InitConfig(gamma=args.gamma, schedule_variant=args.variant)
    schedule = make_schedule(timesteps=args.timesteps) if args.variant == "forward_noise" else None
    latent = latent_initialize(
        subjects,
        boxes,
        BlockAverageEncoder(args.factor),
        config,
        RandomSource(args.seed),
        canvas=canvas,
        schedule=schedule,
    )
    _write_latent_json(latent, args.gamma, args.out)
    return 0


def _cmd_dnc(args) -> int:
    record = io.load_detections(_existing(args.detections, "--detections"))
    image = io.load_image_png(_existing(args.image, "--image"))
    refs_dir = _existing(args.refs, "--refs")
    ref_paths = sorted(refs_dir.glob("*.emb"))
    if not ref_paths:
        raise ParameterError(f"--refs: {refs_dir} contains no .emb files")
    references = [io.load_embeddings(p) for p in ref_paths]
    detected = [proxy_embed(image, box) for box in record.boxes]
    outcome = build_matrices(detected, references, DncConfig(sort_method=args.method))
    score = dnc_score(outcome)
    print(f"{score:.6f}")
    io.save_score_report(args.out, record.image_id, score, outcome)
    return 0


def _cmd_corr(args) -> int:
    scores = io.load_value_series(_existing(args.scores, "--scores"))
    labels = io.load_value_series(_existing(args.labels, "--labels"))
    print(f"spearman {spearman(scores, labels):.6f}")
    print(f"auroc {auroc(scores, labels):.6f}")
    return 0


def _cmd_sprites(args) -> int:
    if args.count < 1:
        raise ParameterError(f"--count must be >= 1, got {args.count}")
    canvas = _parse_size(args.canvas)
    specs = [
        SpriteSpec(
            canvas=canvas,
            shape=SPRITE_SHAPES[i % len(SPRITE_SHAPES)],
            color=_SPRITE_PALETTE[i % len(_SPRITE_PALETTE)],
            size=args.size,
            identity=f"sprite-{i:02d}",
        )
        for i in range(args.count)
    ]
    subjects = gen_sprites(specs, RandomSource(args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for subject in subjects:
        io.save_subject(subject, out / subject.identifier)
    return 0


def _sandbox_pieces(args):
    subjects = _load_subjects(args.subjects)[:2]
    if len(subjects) < 2:
        raise ParameterError("--subjects: need at least two subjects")
    canvas = _parse_size(args.canvas)
    encoder = BlockAverageEncoder(args.factor)
    gmm, layouts = identity_mixture(subjects, canvas, encoder, tau=args.tau)
    schedule = make_schedule(timesteps=args.timesteps)
    return subjects, canvas, encoder, gmm, layouts[0], schedule


def _cmd_sample(args) -> int:
    subjects, canvas, encoder, gmm, layout, schedule = _sandbox_pieces(args)
    rng = RandomSource(args.seed)
    latent = latent_initialize(
        subjects, layout, encoder, InitConfig(gamma=args.gamma), rng, canvas=canvas
    )
    final, _ = run_chain(gmm, schedule, latent, args.steps, rng, noise_level=args.noise_level)
    deltas = gmm.means - final.flattened()[None, :]
    nearest = int((deltas * deltas).sum(axis=1).argmin())
    _write_latent_json(final, args.gamma, args.out)
    print(f"component {nearest}")
    return 0


def _cmd_gamma_sweep(args) -> int:
    if args.trials < 1:
        raise ParameterError(f"--trials must be >= 1, got {args.trials}")
    gammas = _parse_floats(args.gammas)
    if not gammas:
        raise ParameterError("--gammas: expected at least one value")
    subjects, canvas, encoder, gmm, layout, schedule = _sandbox_pieces(args)
    rows = gamma_sweep(
        subjects,
        gammas,
        args.trials,
        gmm,
        schedule,
        RandomSource(args.seed),
        encoder=encoder,
        canvas=canvas,
        layout=layout,
        steps=args.steps,
        noise_level=args.noise_level,
    )
    write_sweep_csv(rows, args.out)
    svg_path = args.svg if args.svg else Path(args.out).with_suffix(".svg")
    write_sweep_svg(rows, svg_path)
    return 0


def _cmd_iterate(args) -> int:
    pool = _existing(args.pool, "--pool")
    report_paths = sorted(pool.glob("*.json"))
    if not report_paths:
        raise ParameterError(f"--pool: {pool} contains no score reports")
    items = [io.load_score_report(p) for p in report_paths]
    selected = select_top_k(items, args.k)
    Path(args.out).write_text("\n".join(selected) + "\n", encoding="utf-8")
    return 0


def _cmd_gradcheck(args) -> int:
    if args.batch < 1 or (args.loss != "dm" and args.batch < 2):
        raise ParameterError(f"--batch too small for the {args.loss} loss: {args.batch}")
    rng = RandomSource(args.seed)
    schedule = make_schedule(timesteps=args.timesteps)
    model = AffineDenoiser.randomized(args.timesteps, rng)
    examples = [
        (LatentGrid(2, 2, 3, rng.normal((2, 2, 3))), f"cond-{i}") for i in range(args.batch)
    ]
    if args.loss == "dm":
        target = examples
        reference = None
    else:
        half = max(1, args.batch // 2)
        target = TrainingSets(ref_set=tuple(examples[:half]), prior_set=tuple(examples[half:]))
        reference = AffineDenoiser.randomized(args.timesteps, rng) if args.loss == "kl" else None
    err = grad_check(
        model, args.loss, target, schedule, rng,
        epsilon=args.epsilon, reference_model=reference,
    )
    print(f"max_rel_err {err:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mudikit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_text, func):
        p = sub.add_parser(
            name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        p.set_defaults(func=func)
        return p

    p = cmd("segmix", "compose segmented subject pairs into sample bundles", _cmd_segmix)
    p.add_argument("--subjects", required=True, help="directory of subject bundles")
    p.add_argument("--out", required=True, help="destination directory")
    p.add_argument("--count", type=int, required=True, help="number of composites")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--out-size", default="1024x1024", help="canvas size as HxW")
    p.add_argument("--max-margin", type=int, default=1, help="max horizontal margin (px)")

    p = cmd("prior", "compose prior-preservation pairs from a subject pool", _cmd_prior)
    p.add_argument("--subjects", required=True, help="directory of prior subjects")
    p.add_argument("--out", required=True, help="destination directory")
    p.add_argument("--count", type=int, required=True, help="number of composites")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--out-size", default="1024x1024", help="canvas size as HxW")
    p.add_argument("--max-margin", type=int, default=1, help="max horizontal margin (px)")

    p = cmd("init", "build a mean-shifted starting latent from a layout", _cmd_init)
    p.add_argument("--subjects", required=True, help="directory of subject bundles")
    p.add_argument("--layout", required=True, help="layout JSON file")
    p.add_argument("--out", required=True, help="latent JSON destination")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--gamma", type=float, default=1.0, help="mean-shift strength")
    p.add_argument("--factor", type=int, default=8, help="encoder downscale factor")
    p.add_argument(
        "--variant", choices=["mean_shift", "forward_noise"], default="mean_shift",
        help="initialization formula",
    )
    p.add_argument("--timesteps", type=int, default=100, help="schedule length")

    p = cmd("dnc", "score detections against reference embeddings", _cmd_dnc)
    p.add_argument("--detections", required=True, help="detections JSON file")
    p.add_argument("--refs", required=True, help="directory of reference .emb files")
    p.add_argument("--image", required=True, help="image the detections refer to")
    p.add_argument("--out", default="dnc-report.json", help="score report destination")
    p.add_argument(
        "--method", choices=["greedy", "sequential"], default="greedy",
        help="row-sort interpretation",
    )

    p = cmd("corr", "rank statistics between a score file and a label file", _cmd_corr)
    p.add_argument("--scores", required=True, help="file of scores, one per line")
    p.add_argument("--labels", required=True, help="file of labels, one per line")

    p = cmd("sprites", "generate procedural subjects with exact masks", _cmd_sprites)
    p.add_argument("--out", required=True, help="destination directory")
    p.add_argument("--count", type=int, required=True, help="number of sprites")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--canvas", default="32x32", help="sprite canvas as HxW")
    p.add_argument("--size", type=int, default=20, help="sprite extent (px)")

    p = cmd("sample", "run the reverse chain from a shifted latent", _cmd_sample)
    p.add_argument("--subjects", required=True, help="directory of subject bundles")
    p.add_argument("--out", required=True, help="final latent JSON destination")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--gamma", type=float, default=1.0, help="mean-shift strength")
    p.add_argument("--steps", type=int, default=50, help="reverse transitions")
    p.add_argument("--noise-level", type=float, default=0.0, help="transition noise in [0, 1]")
    p.add_argument("--tau", type=float, default=0.3, help="mixture component width")
    p.add_argument("--factor", type=int, default=8, help="encoder downscale factor")
    p.add_argument("--canvas", default="32x32", help="canvas size as HxW")
    p.add_argument("--timesteps", type=int, default=100, help="schedule length")

    p = cmd("gamma-sweep", "layout-match rate as shift strength varies", _cmd_gamma_sweep)
    p.add_argument("--subjects", required=True, help="directory of subject bundles")
    p.add_argument("--out", required=True, help="CSV destination")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--gammas", default="0,1,2,3,4", help="comma-separated strengths")
    p.add_argument("--trials", type=int, default=500, help="chains per strength")
    p.add_argument("--svg", default=None, help="plot destination (default: CSV path with .svg)")
    p.add_argument("--steps", type=int, default=50, help="reverse transitions")
    p.add_argument("--noise-level", type=float, default=0.0, help="transition noise in [0, 1]")
    p.add_argument("--tau", type=float, default=0.3, help="mixture component width")
    p.add_argument("--factor", type=int, default=8, help="encoder downscale factor")
    p.add_argument("--canvas", default="32x32", help="canvas size as HxW")
    p.add_argument("--timesteps", type=int, default=100, help="schedule length")

    p = cmd("iterate", "select the best-scoring images from a report pool", _cmd_iterate)
    p.add_argument("--pool", required=True, help="directory of score reports")
    p.add_argument("--k", type=int, default=50, help="how many ids to keep")
    p.add_argument("--out", required=True, help="selected-id list destination")

    p = cmd("gradcheck", "compare analytic loss gradients with finite differences", _cmd_gradcheck)
    p.add_argument("--loss", choices=["dm", "db", "kl"], required=True, help="objective")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--timesteps", type=int, default=20, help="schedule length")
    p.add_argument("--batch", type=int, default=4, help="examples in the batch")
    p.add_argument("--epsilon", type=float, default=1e-5, help="finite-difference step")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ParameterError, PoolExhaustedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MudikitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # pragma: no cover - unexpected bugs still exit 2
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
