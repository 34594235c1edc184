"""Compile snippets into single-table pages and rasterize them to JPG."""

from __future__ import annotations

import logging
import math
import shlex
import shutil
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image

from .extract import TableSnippet

logger = logging.getLogger(__name__)

FONT_PACKAGES = (
    "courier",
    "helvet",
    "palatino",
    "bookman",
    "mathptmx",
    "utopia",
    "tgbonum",
    "tgtermes",
    "tgpagella",
    "tgschola",
    "charter",
    "tgcursor",
)
ASPECT_MODES = ("conserved", "fixed")

DEFAULT_TEX_COMMAND = "pdflatex -interaction=nonstopmode -halt-on-error"
DEFAULT_TIMEOUT = 60.0
JPEG_QUALITY = 95

_TEMPLATE = r"""\documentclass{{article}}
\usepackage[T1]{{fontenc}}
\usepackage{{{font}}}
\usepackage{{amsmath,amssymb}}
\usepackage{{array,booktabs,multirow}}
\usepackage[active,tightpage]{{preview}}
\PreviewEnvironment{{tabular}}
\setlength\PreviewBorder{{4pt}}
\pagestyle{{empty}}
\begin{{document}}
{snippet}
\end{{document}}
"""


@dataclass(frozen=True)
class RenderSpec:
    font_package: str
    aspect_mode: str = "conserved"
    dpi: int = 300
    target_px: int = 400
    blur: float = 0.8

    def __post_init__(self):
        if self.font_package not in FONT_PACKAGES:
            raise ValueError(f"unknown font package {self.font_package!r}")
        if self.aspect_mode not in ASPECT_MODES:
            raise ValueError(f"aspect_mode must be one of {ASPECT_MODES}, got {self.aspect_mode!r}")
        if self.dpi <= 0 or self.target_px <= 0:
            raise ValueError("dpi and target_px must be positive")
        if not 0 < self.blur <= 1:
            raise ValueError(f"blur must be in (0, 1], got {self.blur}")


@dataclass
class RenderedImage:
    doc_id: str
    snippet_index: int
    font_package: str
    aspect_mode: str
    path: Optional[str] = None
    width_px: int = 0
    height_px: int = 0
    source_width_px: int = 0
    source_height_px: int = 0
    status: str = "ok"
    log: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def sample_id(self) -> str:
        return f"{self.doc_id}/{self.snippet_index}/{self.font_package}/{self.aspect_mode}"

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "RenderedImage":
        return cls(**obj)


class RenderError(RuntimeError):
    def __init__(self, message: str, log: str = ""):
        super().__init__(message)
        self.log = log


def emit_tex_document(snippet, font: str) -> str:
    """A standalone document whose only body is the snippet, cropped to the table."""
    if font not in FONT_PACKAGES:
        raise ValueError(f"unknown font package {font!r}")
    code = snippet.code if isinstance(snippet, TableSnippet) else snippet
    return _TEMPLATE.format(font=font, snippet=code)


# --- geometry -----------------------------------------------------------


def target_size(width: int, height: int, spec: RenderSpec) -> tuple[int, int]:
    """Final ``(width, height)`` for a source image under the spec's aspect regime."""
    if spec.aspect_mode == "fixed":
        return spec.target_px, spec.target_px
    if width >= height:
        return spec.target_px, max(1, round(height * spec.target_px / width))
    return max(1, round(width * spec.target_px / height)), spec.target_px


def _lanczos(x: np.ndarray, a: int = 3) -> np.ndarray:
    return np.where(np.abs(x) < a, np.sinc(x) * np.sinc(x / a), 0.0)


def _resample_weights(n_in: int, n_out: int, blur: float) -> np.ndarray:
    """Row-normalised (n_out, n_in) Lanczos-3 weights; ``blur`` < 1 narrows the kernel."""
    scale = n_out / n_in
    stretch = blur * max(1.0, 1.0 / scale)
    centers = (np.arange(n_out) + 0.5) / scale
    src = np.arange(n_in) + 0.5
    w = _lanczos((src[None, :] - centers[:, None]) / stretch)
    sums = w.sum(axis=1, keepdims=True)
    empty = np.abs(sums[:, 0]) < 1e-12
    if empty.any():
        nearest = np.clip(np.floor(centers[empty]).astype(int), 0, n_in - 1)
        w[empty] = 0.0
        w[np.flatnonzero(empty), nearest] = 1.0
        sums = w.sum(axis=1, keepdims=True)
    return w / sums


def resize_with_blur(img: Image.Image, size: tuple[int, int], blur: float = 0.8) -> Image.Image:
    """Separable Lanczos resize of an RGB image with a blur (support scale) factor."""
    arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    h, w = arr.shape[:2]
    out_w, out_h = size
    wy = _resample_weights(h, out_h, blur)
    wx = _resample_weights(w, out_w, blur)
    out = np.tensordot(wy, arr, axes=(1, 0))  # (out_h, w, 3)
    out = np.tensordot(wx, out, axes=(1, 1)).transpose(1, 0, 2)  # (out_h, out_w, 3)
    return Image.fromarray(np.clip(np.rint(out), 0, 255).astype(np.uint8), "RGB")


def flatten_on_white(img: Image.Image) -> Image.Image:
    """Replace transparency with a white background."""
    if img.mode in ("RGBA", "LA") or (img.mode == "P" and "transparency" in img.info):
        rgba = img.convert("RGBA")
        bg = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
        return Image.alpha_composite(bg, rgba).convert("RGB")
    return img.convert("RGB")


def rasterize_pdf(pdf_path, dpi: int) -> Image.Image:
    """First page of a PDF at ``dpi``, alpha removed onto white."""
    import pymupdf

    with pymupdf.open(pdf_path) as doc:
        if doc.page_count == 0:
            raise RenderError(f"{pdf_path}: PDF has no pages")
        pix = doc[0].get_pixmap(dpi=dpi, alpha=True)
        mode = "RGBA" if pix.alpha else "RGB"
        img = Image.frombytes(mode, (pix.width, pix.height), pix.samples)
    return flatten_on_white(img)


def _pdf_pixel_size(pdf_path, dpi: int) -> tuple[int, int]:
    import pymupdf

    with pymupdf.open(pdf_path) as doc:
        rect = doc[0].rect
    return math.ceil(rect.width * dpi / 72 - 1e-6), math.ceil(rect.height * dpi / 72 - 1e-6)


# --- external steps -----------------------------------------------------


def compile_tex(tex: str, scratch: Path, command: str = DEFAULT_TEX_COMMAND, timeout: float = DEFAULT_TIMEOUT) -> Path:
    """Run the TeX engine on ``tex`` inside ``scratch`` and return the PDF path.

    Raises:
        RenderError: engine missing, nonzero exit, timeout, or no PDF produced.
            The engine log is attached as ``.log``.
    """
    scratch.mkdir(parents=True, exist_ok=True)
    src = scratch / "table.tex"
    src.write_text(tex, encoding="utf-8")
    argv = shlex.split(command) + [src.name]
    try:
        proc = subprocess.run(
            argv, cwd=scratch, capture_output=True, timeout=timeout, stdin=subprocess.DEVNULL
        )
    except FileNotFoundError as exc:
        raise RenderError(f"TeX engine not found: {argv[0]}", str(exc)) from exc
    except subprocess.TimeoutExpired as exc:
        raise RenderError(f"TeX engine timed out after {timeout}s", _decode(exc.stdout)) from exc
    log = _decode(proc.stdout) + _decode(proc.stderr)
    texlog = scratch / "table.log"
    if texlog.exists():
        log += texlog.read_text(encoding="utf-8", errors="replace")
    pdf = scratch / "table.pdf"
    if proc.returncode != 0 or not pdf.exists():
        raise RenderError(f"TeX engine failed with exit status {proc.returncode}", log or "(no output)")
    return pdf


def _decode(data) -> str:
    if data is None:
        return ""
    return data.decode("utf-8", errors="replace") if isinstance(data, bytes) else data


def rasterize(
    pdf: Path,
    spec: RenderSpec,
    out_path: Path,
    raster_command: Optional[str] = None,
    timeout: float = DEFAULT_TIMEOUT,
    quality: int = JPEG_QUALITY,
) -> tuple[tuple[int, int], tuple[int, int]]:
    """Write the resized JPG; return ``(source_size, final_size)``.

    With ``raster_command`` set, it is formatted with ``{pdf}``, ``{out}``,
    ``{dpi}``, ``{blur}``, ``{quality}``, ``{width}``, ``{height}`` and
    ``{geometry}`` (ImageMagick-style: ``400x400`` or ``400x400!``) and run
    instead of the built-in rasterizer.
    """
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if raster_command is None:
        img = rasterize_pdf(pdf, spec.dpi)
        source = img.size
        final = target_size(*source, spec)
        resize_with_blur(img, final, spec.blur).save(out_path, "JPEG", quality=quality, dpi=(spec.dpi, spec.dpi))
        return source, final

    source = _pdf_pixel_size(pdf, spec.dpi)
    final = target_size(*source, spec)
    geometry = f"{spec.target_px}x{spec.target_px}" + ("!" if spec.aspect_mode == "fixed" else "")
    argv = [
        part.format(
            pdf=pdf, out=out_path, dpi=spec.dpi, blur=spec.blur, quality=quality,
            width=final[0], height=final[1], geometry=geometry,
        )
        for part in shlex.split(raster_command)
    ]
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=timeout, stdin=subprocess.DEVNULL)
    except (FileNotFoundError, subprocess.TimeoutExpired) as exc:
        raise RenderError(f"rasterizer failed: {exc}") from exc
    if proc.returncode != 0 or not out_path.exists():
        raise RenderError(
            f"rasterizer failed with exit status {proc.returncode}",
            _decode(proc.stdout) + _decode(proc.stderr),
        )
    with Image.open(out_path) as img:
        return source, img.size


def compile_and_rasterize(
    tex: str,
    spec: RenderSpec,
    workdir,
    out_path=None,
    tex_command: str = DEFAULT_TEX_COMMAND,
    raster_command: Optional[str] = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> RenderedImage:
    """Render one document under one spec. Failures come back as a failed record."""
    workdir = Path(workdir)
    out_path = Path(out_path) if out_path else workdir / f"table-{spec.font_package}-{spec.aspect_mode}.jpg"
    record = RenderedImage("", 0, spec.font_package, spec.aspect_mode)
    with tempfile.TemporaryDirectory(dir=workdir) as scratch:
        try:
            pdf = compile_tex(tex, Path(scratch), tex_command, timeout)
            source, final = rasterize(pdf, spec, out_path, raster_command, timeout)
        except RenderError as exc:
            record.status, record.log = "failed", f"{exc}\n{exc.log}".strip()
            return record
    record.path = str(out_path)
    record.source_width_px, record.source_height_px = source
    record.width_px, record.height_px = final
    return record


def image_name(doc_id: str, snippet_index: int, font: str, aspect: str) -> str:
    return f"{doc_id.replace('/', '__')}__{snippet_index}__{font}__{aspect}.jpg"


def _render_job(snippet: TableSnippet, font: str, aspect_modes, out_dir: Path, scratch_root: Path, options: dict):
    """Compile once per (snippet, font) and rasterize every requested aspect mode."""
    tex = emit_tex_document(snippet, font)
    records = []
    with tempfile.TemporaryDirectory(dir=scratch_root) as scratch:
        try:
            pdf = compile_tex(tex, Path(scratch), options["tex_command"], options["timeout"])
        except RenderError as exc:
            log = f"{exc}\n{exc.log}".strip()
            return [
                RenderedImage(snippet.doc_id, snippet.snippet_index, font, mode, status="failed", log=log)
                for mode in aspect_modes
            ]
        for mode in aspect_modes:
            spec = RenderSpec(font, mode, options["dpi"], options["target_px"], options["blur"])
            rec = RenderedImage(snippet.doc_id, snippet.snippet_index, font, mode)
            out = out_dir / image_name(snippet.doc_id, snippet.snippet_index, font, mode)
            try:
                source, final = rasterize(pdf, spec, out, options["raster_command"], options["timeout"])
            except Exception as exc:  # a broken page must not stop the batch
                rec.status, rec.log = "failed", f"{exc}\n{getattr(exc, 'log', '')}".strip()
            else:
                rec.path = out.name
                rec.source_width_px, rec.source_height_px = source
                rec.width_px, rec.height_px = final
            records.append(rec)
    return records


def render_snippets(
    snippets: Iterable[TableSnippet],
    out_dir,
    fonts: Sequence[str] = FONT_PACKAGES,
    aspect_modes: Sequence[str] = ASPECT_MODES,
    jobs: int = 1,
    tex_command: str = DEFAULT_TEX_COMMAND,
    raster_command: Optional[str] = None,
    timeout: float = DEFAULT_TIMEOUT,
    dpi: int = 300,
    target_px: int = 400,
    blur: float = 0.8,
) -> list[RenderedImage]:
    """Render every snippet in every font and aspect mode with a bounded worker pool.

    Returns one record per (snippet, font, aspect mode), successful or failed,
    sorted by sample id. Image paths are relative to ``out_dir``.
    """
    for font in fonts:
        RenderSpec(font, "conserved", dpi, target_px, blur)  # validates all numeric fields too
    for mode in aspect_modes:
        if mode not in ASPECT_MODES:
            raise ValueError(f"unknown aspect mode {mode!r}")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scratch_root = Path(tempfile.mkdtemp(prefix="tablex-render-"))
    options = dict(
        tex_command=tex_command, raster_command=raster_command, timeout=timeout,
        dpi=dpi, target_px=target_px, blur=blur,
    )
    try:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_render_job, snip, font, list(aspect_modes), out_dir, scratch_root, options)
                for snip in snippets
                for font in fonts
            ]
            records = [rec for fut in futures for rec in fut.result()]
    finally:
        shutil.rmtree(scratch_root, ignore_errors=True)
    failed = sum(not r.ok for r in records)
    if failed:
        logger.warning("%d of %d renders failed", failed, len(records))
    records.sort(key=lambda r: (r.doc_id, r.snippet_index, r.font_package, r.aspect_mode))
    return records


def tex_available(command: str = DEFAULT_TEX_COMMAND) -> bool:
    return shutil.which(shlex.split(command)[0]) is not None
