"""Table structure and content datasets from LaTeX sources."""

__version__ = "0.1.0"

from .corpus import TexDocument, category_histogram, scan_corpus
from .dataset import DatasetManifest, DatasetStats, assign_split, build_manifest, compute_stats, token_length_histogram
from .extract import TableExtractor, TableSnippet, extract_spans, remove_comments, strip_noise
from .metrics import EvalReport, bleu4, ema, evaluate, wer
from .render import RenderedImage, RenderSpec, compile_and_rasterize, emit_tex_document, render_snippets
from .tokenize import (
    STRUCTURE_VOCABULARY,
    ContentTokenizer,
    LengthFilter,
    StructureTokenizer,
    TokenStream,
    Vocabulary,
    filter_rare,
    length_filter,
    lex,
    to_content_stream,
    to_structure_stream,
)

__all__ = [
    "ContentTokenizer", "DatasetManifest", "DatasetStats", "EvalReport", "LengthFilter", "RenderSpec",
    "RenderedImage", "STRUCTURE_VOCABULARY", "StructureTokenizer", "TableExtractor", "TableSnippet",
    "TexDocument", "TokenStream", "Vocabulary", "assign_split", "bleu4", "build_manifest",
    "category_histogram", "compile_and_rasterize", "compute_stats", "ema", "emit_tex_document",
    "evaluate", "extract_spans", "filter_rare", "length_filter", "lex", "remove_comments",
    "render_snippets", "scan_corpus", "strip_noise", "to_content_stream", "to_structure_stream",
    "token_length_histogram", "wer",
]
