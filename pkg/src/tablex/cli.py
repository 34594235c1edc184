"""Command-line entry point: ``tablex {extract,tokenize,render,build,stats,eval}``.

Each stage reads the previous stage's files under the output root::

    snippets/   extract   -> snippets.jsonl, rejected.jsonl
    streams/    tokenize  -> structure.jsonl, content.jsonl, vocab_*.tsv
    images/     render    -> *.jpg, renders.jsonl
    manifests/  build     -> TSD-250.jsonl ... TCD-500.jsonl
    reports/    build/stats/eval
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, PipelineConfig, load_config
from .corpus import category_histogram, scan_corpus
from .dataset import (
    VARIANTS,
    DatasetManifest,
    ManifestEntry,
    build_variants,
    compute_stats,
    format_histogram,
    format_stats_table,
    token_length_histogram,
)
from .extract import Diagnostic, TableSnippet, iter_snippets
from .jsonio import dumps, read_jsonl, write_jsonl, write_text_atomic
from .metrics import METRICS, IntegrityError, evaluate
from .render import RenderedImage, render_snippets
from .tokenize import CONTENT, STRUCTURE, ContentTokenizer, StructureTokenizer, TokenStream, Vocabulary

logger = logging.getLogger("tablex")


class StageError(RuntimeError):
    """Fatal pipeline error; reported on stderr with exit status 1."""


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(f"missing {path}; run `tablex {stage}` first")
    return path


def _paths(cfg: PipelineConfig) -> dict[str, Path]:
    root = cfg.output_root
    return {
        "snippets": root / "snippets" / "snippets.jsonl",
        "extract_rejected": root / "snippets" / "rejected.jsonl",
        "structure": root / "streams" / "structure.jsonl",
        "content": root / "streams" / "content.jsonl",
        "tokenize_rejected": root / "streams" / "rejected.jsonl",
        "vocab_structure": root / "streams" / "vocab_structure.tsv",
        "vocab_content": root / "streams" / "vocab_content.tsv",
        "images": root / "images",
        "renders": root / "images" / "renders.jsonl",
        "manifests": root / "manifests",
        "reports": root / "reports",
    }


def _variants(cfg: PipelineConfig) -> list[str]:
    return [v for v, (_, cap) in VARIANTS.items() if cap in cfg.caps]


def _load_snippets(cfg) -> list[TableSnippet]:
    path = _require(_paths(cfg)["snippets"], "extract")
    return [TableSnippet.from_json(o) for o in read_jsonl(path)]


def cmd_extract(cfg: PipelineConfig, args) -> int:
    if cfg.corpus_root is None:
        raise StageError("extract needs --corpus-root (or corpus_root in the config file)")
    paths = _paths(cfg)
    skipped = []
    try:
        docs = list(scan_corpus(cfg.corpus_root, cfg.max_bytes, on_skip=lambda p, r: skipped.append((p, r))))
    except NotADirectoryError as exc:
        raise StageError(str(exc)) from exc
    for path, reason in skipped:
        logger.warning("skipped %s: %s", path, reason)
    diagnostics: list[Diagnostic] = []
    snippets = list(iter_snippets(docs, diagnostics))
    write_jsonl(paths["snippets"], snippets)
    write_jsonl(paths["extract_rejected"], [vars(d) for d in diagnostics])
    hist = category_histogram(docs)
    write_text_atomic(paths["reports"] / "categories.tsv", "".join(f"{k}\t{v}\n" for k, v in hist.items()))
    logger.info("extract: %d documents, %d snippets, %d warnings, %d files skipped",
                len(docs), len(snippets), len(diagnostics), len(skipped))
    return 0


def cmd_tokenize(cfg: PipelineConfig, args) -> int:
    paths = _paths(cfg)
    snippets = _load_snippets(cfg)
    st = StructureTokenizer()
    structure = st.transform(snippets)
    ct = ContentTokenizer(threshold=cfg.rare_threshold)
    content = ct.fit_transform(snippets)
    write_jsonl(paths["structure"], structure)
    write_jsonl(paths["content"], content)
    write_jsonl(paths["tokenize_rejected"], [vars(r) for r in st.rejected_])
    write_text_atomic(paths["vocab_structure"], Vocabulary.from_streams(STRUCTURE, structure).to_tsv())
    write_text_atomic(paths["vocab_content"], ct.vocabulary_.to_tsv())
    logger.info("tokenize: %d structure streams (%d rejected), %d content streams, %d rare commands replaced",
                len(structure), len(st.rejected_), len(content), len(ct.rare_commands_))
    return 0


def cmd_render(cfg: PipelineConfig, args) -> int:
    paths = _paths(cfg)
    snippets = _load_snippets(cfg)
    records = render_snippets(
        snippets, paths["images"], fonts=cfg.fonts, aspect_modes=cfg.aspect_modes, jobs=cfg.jobs,
        tex_command=cfg.tex_command, raster_command=cfg.raster_command, timeout=cfg.timeout,
    )
    write_jsonl(paths["renders"], records)
    ok = sum(r.ok for r in records)
    logger.info("render: %d of %d images rendered", ok, len(records))
    return 0


def _load_streams(path: Path) -> list[TokenStream]:
    return [TokenStream.from_json(o) for o in read_jsonl(_require(path, "tokenize"))]


def _write_reports(cfg: PipelineConfig, manifests: dict[str, DatasetManifest]) -> None:
    reports = _paths(cfg)["reports"]
    write_text_atomic(reports / "stats.txt", format_stats_table(manifests))
    stats = {name: compute_stats(m).to_json() for name, m in manifests.items()}
    write_text_atomic(reports / "stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    hist = "".join(f"# {name}\n{format_histogram(token_length_histogram(m))}" for name, m in manifests.items())
    write_text_atomic(reports / "histograms.tsv", hist)


def cmd_build(cfg: PipelineConfig, args) -> int:
    paths = _paths(cfg)
    structure = _load_streams(paths["structure"])
    content = _load_streams(paths["content"])
    renders = None
    if paths["renders"].exists():
        renders = [RenderedImage.from_json(o) for o in read_jsonl(paths["renders"])]
    else:
        logger.info("build: no render records found; manifests will carry no images")
    manifests = build_variants(structure, content, renders, variants=_variants(cfg))
    for name, manifest in manifests.items():
        write_jsonl(paths["manifests"] / f"{name}.jsonl", manifest.entries)
    _write_reports(cfg, manifests)
    for name, manifest in manifests.items():
        logger.info("build: %s has %d samples", name, len(manifest.entries))
    return 0


def load_manifest(path: Path) -> DatasetManifest:
    variant = path.stem
    if variant not in VARIANTS:
        raise StageError(f"{path}: manifest file name must be one of {', '.join(VARIANTS)}")
    return DatasetManifest(variant, [ManifestEntry.from_json(o) for o in read_jsonl(path)])


def cmd_stats(cfg: PipelineConfig, args) -> int:
    mdir = _paths(cfg)["manifests"]
    manifests = {}
    for name in _variants(cfg):
        manifests[name] = load_manifest(_require(mdir / f"{name}.jsonl", "build"))
    _write_reports(cfg, manifests)
    sys.stdout.write(format_stats_table(manifests))
    return 0


def cmd_eval(cfg: PipelineConfig, args) -> int:
    manifest = load_manifest(Path(args.manifest))
    gts = manifest.ground_truths()
    preds = {}
    for obj in read_jsonl(args.pred):
        sid = obj["sample_id"]
        if sid in preds:
            raise StageError(f"duplicate prediction for sample_id {sid!r}")
        preds[sid] = obj["tokens"]
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    try:
        report = evaluate(preds, gts, metrics, smooth=args.smooth, tokenize=args.bleu_tokenize)
    except IntegrityError as exc:
        raise StageError(str(exc)) from exc
    missing = len(gts) - report.n
    if missing:
        logger.warning("eval: %d manifest samples have no prediction", missing)
    out = Path(args.out) if args.out else _paths(cfg)["reports"] / f"eval-{manifest.variant}.json"
    write_text_atomic(out, dumps(report.to_json()) + "\n")
    sys.stdout.write(report.summary() + "\n")
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "tokenize": cmd_tokenize,
    "render": cmd_render,
    "build": cmd_build,
    "stats": cmd_stats,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--corpus-root")
    common.add_argument("--output-root")
    common.add_argument("--caps", help="comma-separated subset of 250,500")
    common.add_argument("--rare-threshold", type=int)
    common.add_argument("--log-level", default="INFO")

    parser = argparse.ArgumentParser(prog="tablex", description="Build table-recognition datasets from LaTeX sources and score predictions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("extract", parents=[common], help="extract tabular snippets from a corpus")
    sub.add_parser("tokenize", parents=[common], help="build structure and content token streams")
    render = sub.add_parser("render", parents=[common], help="render snippet images")
    render.add_argument("--fonts", help="comma-separated font packages, or 'all'")
    render.add_argument("--aspect", choices=["conserved", "fixed", "both"])
    render.add_argument("--jobs", type=int)
    render.add_argument("--timeout", type=float, help="seconds per TeX compile")
    render.add_argument("--tex-command")
    render.add_argument("--raster-command")
    sub.add_parser("build", parents=[common], help="assemble dataset manifests and statistics")
    sub.add_parser("stats", parents=[common], help="recompute statistics from manifests")
    ev = sub.add_parser("eval", parents=[common], help="score predictions against a manifest")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--pred", required=True)
    ev.add_argument("--metrics", default=",".join(METRICS))
    ev.add_argument("--smooth", choices=["exp", "none"], default="exp")
    ev.add_argument("--bleu-tokenize", choices=["none", "13a"], default="none")
    ev.add_argument("--out", help="JSON report path")
    return parser


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    for key in ("corpus_root", "output_root", "caps", "rare_threshold", "fonts", "aspect",
                "jobs", "timeout", "tex_command", "raster_command"):
        value = getattr(args, key, None)
        if value is not None:
            cfg.set(key, str(value))
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _config_from_args(args)
        return COMMANDS[args.command](cfg, args)
    except (StageError, ConfigError, IntegrityError, ValueError, OSError) as exc:
        logger.error("%s: %s", args.command, exc)
        return 1
    except KeyboardInterrupt:
        logger.error("%s: interrupted; completed artifacts were written atomically", args.command)
        return 130


if __name__ == "__main__":
    sys.exit(main())
