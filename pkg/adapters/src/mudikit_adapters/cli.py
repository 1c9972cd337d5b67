"""Command line front end for the three export batches.

Exit codes: 0 when every matched image produced its artifacts, 1 for bad
usage, invalid configuration, or a batch that had to skip anything (the
skips are printed as warnings on stderr).
"""

from __future__ import annotations

import argparse
import sys

from .backends import MockDetector, MockEmbedder, MockSegmenter
from .errors import AdapterError
from .export import ExportSummary, export_detections, export_embeddings, export_segmentations
from .manifest import AdapterManifest


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; scripts use 1
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mudikit-adapters", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--images", required=True, help="input glob, e.g. 'shots/*.png'")
        sub.add_argument("--out", required=True, help="output directory")
        sub.add_argument("--queries", required=True, help="comma-separated text queries")
        sub.add_argument("--model-name", default="mock-suite")
        sub.add_argument("--model-revision", default="builtin")
        sub.add_argument("--device", default="cpu")
        sub.add_argument("--threshold", type=float, default=0.5)

    detect = commands.add_parser("detect", help="export detection boxes as JSON")
    common(detect)

    segment = commands.add_parser("segment", help="export per-subject mask files")
    common(segment)

    embed = commands.add_parser("embed", help="export per-subject embedding files")
    common(embed)
    embed.add_argument("--grid", type=int, default=4, help="pooling raster per crop side")

    return parser


def _run(args: argparse.Namespace) -> ExportSummary:
    queries = [q.strip() for q in args.queries.split(",") if q.strip()]
    if not queries:
        raise AdapterError("--queries must name at least one query")
    detector = MockDetector(threshold=args.threshold)
    notes = f"mock backends; brightness threshold {args.threshold}"
    if args.command == "embed":
        notes += f"; crops pooled to a {args.grid}x{args.grid} block-mean raster"
    manifest = AdapterManifest(
        model_name=args.model_name,
        model_revision=args.model_revision,
        input_glob=args.images,
        output_dir=args.out,
        device=args.device,
        notes=notes,
    )
    if args.command == "detect":
        return export_detections(manifest, detector, queries)
    if args.command == "segment":
        return export_segmentations(
            manifest, detector, MockSegmenter(threshold=args.threshold), queries
        )
    return export_embeddings(manifest, detector, MockEmbedder(grid=args.grid), queries)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        summary = _run(args)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for warning in summary.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {len(summary.written)} files")
    return summary.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
