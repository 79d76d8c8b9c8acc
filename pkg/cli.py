"""
Command-line front end

    python cli.py apply pipeline.json input.png -o out/ --seed 7 --metadata out/meta.json
    python cli.py bench audio --iterations 5 --preset full --csv audio_bench.csv
    python cli.py eval dataset.tsv --adapter "python my_classifier.py" -n 250 -o report/
    python cli.py catalog video

Exit codes: 0 success, 1 validation, 2 I/O, 3 adapter failure.
"""

import json
import os
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console
from rich.table import Table

ROOT_DIR = Path(__file__).parent
sys.path.insert(0, str(ROOT_DIR))

from models.media_models import MODALITIES
from services import augmentation_core, benchmark_service, eval_service, media_io
from services.catalog import catalog
from utils import config
from utils.errors import AugmentationError, CatalogError, MediaIOError, ParamValidationError
from utils.rng import Rng

logger = logging.getLogger("cli")

app = typer.Typer(add_completion=False, help="Multimodal data augmentation toolkit")
console = Console()
err_console = Console(stderr=True)


def _fail(e: AugmentationError) -> typer.Exit:
    err_console.print(f"[red]{type(e).__name__}:[/red] {e}")
    return typer.Exit(code=e.exit_code)


@app.callback()
def main(log_level: str = typer.Option(config.LOG_LEVEL, "--log-level", help="Root logger level")):
    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format=config.LOG_FORMAT
    )


# ==================== APPLY ====================

def expand_inputs(inputs: List[Path]) -> List[Path]:
    """Plain directories expand to their sorted entries; clip directories stay whole"""
    expanded = []
    for path in inputs:
        if path.is_dir() and not (path / "manifest.json").exists():
            expanded.extend(sorted(p for p in path.iterdir() if not p.name.startswith(".")))
        else:
            expanded.append(path)
    return expanded


def output_names(paths: List[Path]) -> List[Path]:
    """Output paths relative to the inputs' deepest common directory, so equal basenames stay apart"""
    if len(paths) == 1:
        return [Path(paths[0].name)]
    resolved = [path.resolve() for path in paths]
    common = Path(os.path.commonpath([str(path.parent) for path in resolved]))
    names = [path.relative_to(common) for path in resolved]
    if len(set(names)) != len(names):
        raise ParamValidationError("the same input is listed more than once")
    return names


@app.command()
def apply(
    config_path: Path = typer.Argument(..., help="Pipeline JSON config"),
    inputs: List[Path] = typer.Argument(..., help="Input files, clip directories or directories of inputs"),
    output_dir: Path = typer.Option(Path("augmented"), "--output-dir", "-o"),
    seed: int = typer.Option(0, "--seed"),
    metadata: Optional[Path] = typer.Option(None, "--metadata", help="Write per-input metadata JSON here"),
    sample_rate: Optional[int] = typer.Option(None, "--sample-rate", help="Sample rate of raw .f32le input"),
    channels: int = typer.Option(1, "--channels", help="Channel count of raw .f32le input"),
    workers: int = typer.Option(config.WORKERS, "--workers"),
):
    """Augment every input with the pipeline; one input uses the seed as-is, a batch derives one stream per input"""
    try:
        pipeline = augmentation_core.load_pipeline(config_path)
        paths = expand_inputs(inputs)
        if not paths:
            raise ParamValidationError("no inputs to augment")
        modalities = []
        for path in paths:
            if not path.exists():
                raise MediaIOError(f"input {path} does not exist")
        targets = [output_dir / name for name in output_names(paths)]
        for path, target in zip(paths, targets):
            if target.resolve() == path.resolve():
                raise MediaIOError(f"output {target} would overwrite its own input")
            modality = media_io.infer_modality(path)
            augmentation_core.validate_pipeline(pipeline, modality)
            modalities.append(modality)
    except AugmentationError as e:
        raise _fail(e)

    root = Rng(seed)

    def one(index: int):
        path = paths[index]
        rng = root if len(paths) == 1 else root.derive(index)
        loaded = media_io.load_media(path, sample_rate=sample_rate, channels=channels)
        result, meta = augmentation_core.compose(pipeline, loaded.datum, rng, modalities[index])
        media_io.save_media(result, targets[index], source=loaded)
        logger.info(f"Augmented {path} -> {targets[index]}")
        return targets[index].relative_to(output_dir).as_posix(), [m.to_dict() for m in meta]

    try:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            results = list(pool.map(one, range(len(paths))))
        if metadata:
            metadata.parent.mkdir(parents=True, exist_ok=True)
            metadata.write_text(json.dumps(dict(results), indent=2, ensure_ascii=False), encoding="utf-8")
    except AugmentationError as e:
        raise _fail(e)
    except OSError as e:
        err_console.print(f"[red]MediaIOError:[/red] {e}")
        raise typer.Exit(code=2)
    console.print(f"Augmented {len(results)} input(s) into {output_dir}")


# ==================== BENCH ====================

@app.command()
def bench(
    modality: str = typer.Argument(..., help="image, audio, text or video"),
    iterations: int = typer.Option(benchmark_service.MIN_ITERATIONS, "--iterations", "-i"),
    preset: str = typer.Option("small", "--preset", help="Input size preset: small or full"),
    seed: int = typer.Option(0, "--seed"),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Also write the table as CSV"),
):
    """Time every catalog op of a modality on a standardized input"""
    try:
        if modality not in MODALITIES:
            raise CatalogError(f"unknown modality {modality!r}")
        rows = benchmark_service.run_bench(modality, iterations=iterations, preset=preset, seed=seed)
        if csv_path:
            benchmark_service.write_bench_csv(rows, csv_path)
    except AugmentationError as e:
        raise _fail(e)
    benchmark_service.print_bench(rows, console, title=f"{modality} runtime ({preset})")


# ==================== EVAL ====================

@app.command("eval")
def run_eval(
    manifest: Path = typer.Argument(..., help="Dataset TSV: path<TAB>label"),
    adapter: str = typer.Option(..., "--adapter", help="Classifier command speaking the line protocol"),
    augset: Optional[Path] = typer.Option(None, "--augset", help="Augmentation set JSON (default: bundled preset)"),
    sample_size: int = typer.Option(eval_service.DEFAULT_SAMPLE_SIZE, "-n", "--sample-size"),
    seed: int = typer.Option(0, "--seed"),
    output_dir: Path = typer.Option(Path("eval_report"), "--output-dir", "-o"),
    workers: int = typer.Option(config.WORKERS, "--workers"),
):
    """Top-5 accuracy delta per augmentation on a sampled dataset"""
    try:
        items = eval_service.load_manifest(manifest)
        augmentations = eval_service.load_augset(augset)
        sample = eval_service.sample_dataset(items, sample_size, Rng(seed))
        report = eval_service.run_eval(sample, augmentations, eval_service.SubprocessAdapter(adapter),
                                       seed=seed, workers=workers)
        eval_service.write_report(report, output_dir)
    except AugmentationError as e:
        raise _fail(e)

    table = Table(title=f"Top-5 accuracy delta (n={report.sample_size}, seed={report.seed})")
    table.add_column("augmentation")
    table.add_column("category")
    table.add_column("delta", justify="right")
    for row in report.rows:
        table.add_row(row.name, row.category, "failed" if row.failed else f"{row.delta:+.4f}")
    console.print(table)


# ==================== CATALOG ====================

@app.command("catalog")
def list_catalog(modality: str = typer.Argument(..., help="image, audio, text or video")):
    """List a modality's transforms with category and params"""
    try:
        definitions = catalog.definitions(modality)
    except AugmentationError as e:
        raise _fail(e)
    table = Table(title=f"{modality} transforms ({len(definitions)})")
    table.add_column("name")
    table.add_column("category")
    table.add_column("params")
    for defn in definitions:
        table.add_row(defn.name, defn.category, ", ".join(defn.param_names))
    console.print(table)


if __name__ == "__main__":
    app()
