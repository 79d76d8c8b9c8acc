"""
Robustness eval harness

Samples a labelled image set, runs a classifier adapter on the clean and on
every augmented copy, and reports top-5 accuracy deltas per augmentation and
per category.

Adapter contract (SubprocessAdapter): the command receives one image path per
line on stdin and prints one line per path: `path<TAB>label1,label2,...`
with at least five distinct ranked labels.
"""

import csv
import json
import logging
import shlex
import subprocess
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

from pydantic import ValidationError

from models.eval_models import TOP_K, DatasetItem, EvalAugmentation, EvalReport, EvalRow, Prediction
from services.augmentation_core import apply_with_probability, validate_spec
from services.media_io import load_image, save_image
from utils import config
from utils.errors import AdapterError, AugmentationError, MediaIOError, ParamValidationError
from utils.rng import Rng

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_SIZE = 250

PathLike = Union[str, Path]


# ==================== DATASET ====================

def load_manifest(path: PathLike) -> List[DatasetItem]:
    """
    Read a `path<TAB>label` TSV; relative paths resolve against the manifest's directory

    Blank lines and '#' comments are skipped. The item id is the path as written.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise MediaIOError(f"cannot read dataset manifest {path}: {e}") from None
    items = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ParamValidationError(f"{path} line {line_no}: expected 'path<TAB>label'")
        item_path = Path(parts[0].strip())
        if not item_path.is_absolute():
            item_path = path.parent / item_path
        items.append(DatasetItem(item_id=parts[0].strip(), path=str(item_path), label=parts[1].strip()))
    logger.info(f"Loaded dataset manifest {path} ({len(items)} items)")
    return items


def sample_dataset(items: Sequence[DatasetItem], n: int, rng: Union[Rng, int]) -> List[DatasetItem]:
    """Uniform sample of n items without replacement, in shuffled order"""
    if n <= 0:
        raise ParamValidationError(f"sample size must be >= 1, got {n}")
    if n > len(items):
        raise ParamValidationError(f"sample size {n} exceeds dataset size {len(items)}")
    rng = rng if isinstance(rng, Rng) else Rng(rng)
    return [items[int(i)] for i in rng.permutation(len(items))[:n]]


def top5_accuracy(preds: Sequence[Prediction], truth: Dict[str, Any]) -> float:
    """Fraction of predictions whose true label is among the first five ranked labels"""
    if not preds:
        raise ParamValidationError("top-5 accuracy of an empty prediction list is undefined")
    hits = 0
    for pred in preds:
        if pred.item_id not in truth:
            raise ParamValidationError(f"no true label for item {pred.item_id!r}")
        if str(truth[pred.item_id]) in [str(label) for label in pred.ranked_labels[:TOP_K]]:
            hits += 1
    return hits / len(preds)


# ==================== ADAPTERS ====================

class ClassifierAdapter:
    """Base adapter; predict() is serialized per instance unless batch_safe"""

    batch_safe = False

    def __init__(self, name: str):
        self.name = name
        self._lock = threading.Lock()

    def predict(self, paths: Sequence[PathLike]) -> Dict[str, List[str]]:
        if self.batch_safe:
            return self._predict(paths)
        with self._lock:
            return self._predict(paths)

    def _predict(self, paths: Sequence[PathLike]) -> Dict[str, List[str]]:
        raise NotImplementedError


class SubprocessAdapter(ClassifierAdapter):
    """External classifier speaking the stdin/stdout line protocol"""

    def __init__(self, command: Union[str, List[str]], timeout: float = None):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise AdapterError("adapter command is empty")
        super().__init__(" ".join(self.command))
        self.timeout = timeout or config.ADAPTER_TIMEOUT

    def _predict(self, paths: Sequence[PathLike]) -> Dict[str, List[str]]:
        request = "".join(f"{p}\n" for p in paths)
        try:
            completed = subprocess.run(self.command, input=request, capture_output=True, text=True,
                                       timeout=self.timeout)
        except FileNotFoundError:
            logger.error(f"Adapter binary not found: {self.command[0]}")
            raise AdapterError(f"adapter binary not found: {self.command[0]}") from None
        except subprocess.TimeoutExpired:
            logger.error(f"Adapter timed out after {self.timeout}s: {self.name}")
            raise AdapterError(f"adapter timed out after {self.timeout}s") from None
        except OSError as e:
            raise AdapterError(f"cannot start adapter {self.command[0]}: {e}") from None
        if completed.returncode != 0:
            logger.error(f"Adapter exited with {completed.returncode}: {completed.stderr.strip()}")
            raise AdapterError(f"adapter exited with code {completed.returncode}")
        return parse_adapter_output(completed.stdout, [str(p) for p in paths])


class CallableAdapter(ClassifierAdapter):
    """In-process classifier: fn(path) -> ranked labels"""

    def __init__(self, fn: Callable[[Path], List[str]], name: str = None, batch_safe: bool = False):
        super().__init__(name or getattr(fn, "__name__", "callable"))
        self.fn = fn
        self.batch_safe = batch_safe

    def _predict(self, paths: Sequence[PathLike]) -> Dict[str, List[str]]:
        results = {}
        for path in paths:
            try:
                results[str(path)] = [str(label) for label in self.fn(Path(path))]
            except AugmentationError:
                raise
            except Exception as e:
                raise AdapterError(f"adapter {self.name} failed on {path}: {e}") from None
        return results


def parse_adapter_output(stdout: str, expected: List[str]) -> Dict[str, List[str]]:
    results: Dict[str, List[str]] = {}
    for line in stdout.splitlines():
        if not line.strip():
            continue
        item, sep, labels = line.rstrip("\n").partition("\t")
        if not sep:
            raise AdapterError(f"malformed adapter line (no TAB): {line!r}")
        results[item] = [label.strip() for label in labels.split(",") if label.strip()]
    missing = [p for p in expected if p not in results]
    if missing:
        raise AdapterError(f"adapter returned no prediction for {len(missing)} item(s), e.g. {missing[0]}")
    return results


def predictions_for(adapter: ClassifierAdapter, items: Sequence[DatasetItem],
                    paths: Sequence[PathLike]) -> List[Prediction]:
    raw = adapter.predict(paths)
    preds = []
    for item, path in zip(items, paths):
        try:
            preds.append(Prediction(item_id=item.item_id, ranked_labels=raw[str(path)]))
        except ValidationError as e:
            raise AdapterError(f"bad prediction for {item.item_id}: {e.errors()[0]['msg']}") from None
    return preds


# ==================== AUGMENTATION SETS ====================

def load_augset(source: Union[PathLike, List[Dict[str, Any]], Dict[str, Any], None] = None) -> List[EvalAugmentation]:
    """Augmentation list from a JSON file / object; None loads the bundled default preset"""
    if source is None or isinstance(source, (str, Path)):
        path = Path(source) if source is not None else config.DEFAULT_AUGSET_PATH
        try:
            source = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise MediaIOError(f"cannot read augmentation set {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ParamValidationError(f"augmentation set {path} is not valid JSON: {e}") from None
    entries = source.get("augmentations", []) if isinstance(source, dict) else source
    try:
        return [EvalAugmentation.model_validate(entry) for entry in entries]
    except ValidationError as e:
        raise ParamValidationError(f"invalid augmentation set: {e.errors()[0]['msg']}") from None


# ==================== RUN ====================

def _augment_items(items: Sequence[DatasetItem], aug: EvalAugmentation, rng: Rng, out_dir: Path,
                   workers: int) -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(index: int) -> Path:
        image = load_image(items[index].path)
        result, _ = apply_with_probability(aug.spec, image, rng.derive(index), modality="image")
        return save_image(result, out_dir / f"{index:06d}.png")

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(items))))


def run_eval(items: Sequence[DatasetItem], augmentations: Sequence[EvalAugmentation], adapter: ClassifierAdapter,
             seed: int = 0, workers: int = None, work_dir: Optional[PathLike] = None) -> EvalReport:
    """
    Baseline accuracy on the clean items, then one row per augmentation

    Item i of augmentation j is augmented with Rng(seed).derive(j).derive(i).
    An adapter or augmentation failure marks that row failed; the baseline
    itself must succeed. Rows are sorted by delta ascending, failed rows last.
    """
    if not any(aug.is_baseline for aug in augmentations):
        raise ParamValidationError("augmentation set must include a baseline entry (spec null)")
    for aug in augmentations:
        if not aug.is_baseline:
            validate_spec(aug.spec, "image")
    items = list(items)
    truth = {item.item_id: item.label for item in items}
    workers = workers or config.WORKERS
    root = Rng(seed)

    baseline_acc = top5_accuracy(predictions_for(adapter, items, [item.path for item in items]), truth)
    logger.info(f"Baseline top-5 accuracy {baseline_acc:.4f} on {len(items)} items")

    rows: List[EvalRow] = []
    with tempfile.TemporaryDirectory(prefix="eval-", dir=work_dir) as tmp:
        for index, aug in enumerate(augmentations):
            if aug.is_baseline:
                rows.append(EvalRow(name=aug.name, category=aug.category,
                                    baseline_acc=baseline_acc, augmented_acc=baseline_acc))
                continue
            try:
                paths = _augment_items(items, aug, root.derive(index), Path(tmp) / f"{index:03d}", workers)
                acc = top5_accuracy(predictions_for(adapter, items, paths), truth)
                rows.append(EvalRow(name=aug.name, category=aug.category,
                                    baseline_acc=baseline_acc, augmented_acc=acc))
                logger.info(f"{aug.name}: top-5 {acc:.4f} (delta {acc - baseline_acc:+.4f})")
            except AugmentationError as e:
                logger.warning(f"Eval row {aug.name} failed: {e}")
                rows.append(EvalRow(name=aug.name, category=aug.category, baseline_acc=baseline_acc,
                                    failed=True, error=str(e)))

    rows.sort(key=lambda row: (row.failed, row.delta if row.delta is not None else 0.0))
    return EvalReport(rows=rows, sample_size=len(items), seed=seed, adapter=adapter.name)


# ==================== REPORTS ====================

def write_report(report: EvalReport, out_dir: PathLike) -> Dict[str, Path]:
    """report.csv, report.json and report.dat (gnuplot: index name category delta)"""
    out_dir = Path(out_dir)
    paths = {"csv": out_dir / "report.csv", "json": out_dir / "report.json", "dat": out_dir / "report.dat"}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(paths["csv"], "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["name", "category", "baseline_acc", "augmented_acc", "delta", "failed", "error"])
            for row in report.rows:
                writer.writerow([row.name, row.category, row.baseline_acc, row.augmented_acc,
                                 row.delta, row.failed, row.error or ""])
        paths["json"].write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
        lines = [f"# seed {report.seed} sample_size {report.sample_size}", "# index name category delta"]
        for index, row in enumerate(r for r in report.rows if not r.failed):
            lines.append(f'{index} "{row.name}" "{row.category}" {row.delta:.6f}')
        paths["dat"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise MediaIOError(f"cannot write eval report to {out_dir}: {e}") from None
    logger.info(f"Wrote eval report to {out_dir}")
    return paths
