"""
Test the robustness eval harness
- dataset manifest parsing and sampling
- top-5 accuracy
- subprocess and in-process adapters
- per-augmentation deltas, failed rows, reproducibility
- report files
"""
import json
import sys
from pathlib import Path

import numpy as np
import pytest

from models.eval_models import DatasetItem, Prediction
from models.media_models import Raster
from services import eval_service
from services.media_io import save_image
from utils.errors import AdapterError, MediaIOError, ParamValidationError
from utils.rng import Rng

MOCK_ADAPTER = Path(__file__).parent / "fixtures" / "mock_adapter.py"


def adapter(mode="normal"):
    return eval_service.SubprocessAdapter([sys.executable, str(MOCK_ADAPTER), mode])


def augset(*entries):
    base = [{"name": "baseline", "category": "spatial", "spec": None}]
    return eval_service.load_augset(base + list(entries))


@pytest.fixture
def dataset(tmp_path):
    """Twelve 8x8 images filled with 10 * label; the right column is 250 so a flip changes pixel (0, 0)"""
    lines = []
    for index in range(12):
        label = index % 10
        pixels = np.full((8, 8, 3), 10 * label, dtype=np.uint8)
        pixels[:, -1] = 250
        save_image(Raster(pixels), tmp_path / "images" / f"{index:02d}.png")
        lines.append(f"images/{index:02d}.png\t{label}")
    manifest = tmp_path / "dataset.tsv"
    manifest.write_text("# path\tlabel\n" + "\n".join(lines) + "\n")
    return manifest


class TestDataset:
    """Manifest and sampling"""

    def test_load_manifest(self, dataset):
        items = eval_service.load_manifest(dataset)
        assert len(items) == 12
        assert items[3].item_id == "images/03.png"
        assert Path(items[3].path).exists()
        print("✓ Manifest paths resolve against its directory")

    def test_bad_manifest_line(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("only_a_path\n")
        with pytest.raises(ParamValidationError):
            eval_service.load_manifest(path)
        with pytest.raises(MediaIOError):
            eval_service.load_manifest(tmp_path / "missing.tsv")
        print("✓ Malformed or missing manifest rejected")

    def test_default_sample_size(self):
        items = [DatasetItem(item_id=str(i), path=f"{i}.png", label="0") for i in range(300)]
        sample = eval_service.sample_dataset(items, eval_service.DEFAULT_SAMPLE_SIZE, Rng(0))
        assert len(sample) == 250
        assert len({item.item_id for item in sample}) == 250
        assert sample == eval_service.sample_dataset(items, 250, Rng(0))
        with pytest.raises(ParamValidationError):
            eval_service.sample_dataset(items, 301, Rng(0))
        print("✓ Default sample of 250 without replacement, reproducible")


class TestTop5:
    """Accuracy metric"""

    def test_top5(self):
        preds = [
            Prediction(item_id="a", ranked_labels=["1", "2", "3", "4", "5", "6"]),
            Prediction(item_id="b", ranked_labels=["1", "2", "3", "4", "5", "6"]),
        ]
        assert eval_service.top5_accuracy(preds, {"a": "5", "b": "6"}) == 0.5
        print("✓ Only the first five ranked labels count")

    def test_too_few_labels(self):
        with pytest.raises(ValueError):
            Prediction(item_id="a", ranked_labels=["1", "2"])
        print("✓ Fewer than five labels rejected")


class TestRunEval:
    """Deltas per augmentation"""

    def test_baseline_and_flip(self, dataset):
        items = eval_service.load_manifest(dataset)
        report = eval_service.run_eval(items, augset({"name": "hflip", "category": "spatial", "spec": {"op": "hflip"}}),
                                       adapter(), seed=0, workers=2)
        rows = {row.name: row for row in report.rows}
        assert rows["baseline"].baseline_acc == 1.0
        assert rows["baseline"].delta == 0.0
        assert rows["hflip"].delta == pytest.approx(-rows["hflip"].baseline_acc)
        assert report.category_means()["spatial"] == pytest.approx(-0.5)
        print("✓ Baseline delta 0, hflip delta = -baseline accuracy")

    def test_constant_adapter(self, dataset):
        items = eval_service.load_manifest(dataset)
        report = eval_service.run_eval(items, augset({"name": "vflip", "category": "spatial", "spec": {"op": "vflip"}}),
                                       adapter("constant"))
        assert all(row.baseline_acc == 0.0 and row.delta == 0.0 for row in report.rows)
        print("✓ Constant classifier scores 0 everywhere")

    def test_failed_row_sorted_last(self, dataset):
        items = eval_service.load_manifest(dataset)
        entries = augset({"name": "hflip", "category": "spatial", "spec": {"op": "hflip"}},
                         {"name": "blur", "category": "pixel-level", "spec": {"op": "blur", "params": {"radius": 0}}})
        report = eval_service.run_eval(items, entries, adapter("fail-on-flip"))
        assert report.rows[-1].name == "hflip"
        assert report.rows[-1].failed and "exit" in report.rows[-1].error
        assert not any(row.failed for row in report.rows[:-1])
        print("✓ Adapter failure marks only its row failed")

    def test_reproducible(self, dataset):
        items = eval_service.load_manifest(dataset)
        noise = augset({"name": "noise", "category": "pixel-level", "spec": {"op": "random_noise", "params": {"var": 0.3}}})
        first = eval_service.run_eval(items, noise, adapter(), seed=4)
        second = eval_service.run_eval(items, noise, adapter(), seed=4)
        assert first.to_dict() == second.to_dict()
        print("✓ Same seed gives the same report")

    def test_baseline_required(self, dataset):
        items = eval_service.load_manifest(dataset)
        entries = eval_service.load_augset([{"name": "hflip", "category": "spatial", "spec": {"op": "hflip"}}])
        with pytest.raises(ParamValidationError):
            eval_service.run_eval(items, entries, adapter())
        print("✓ Augmentation set without a baseline rejected")

    def test_callable_adapter(self, dataset):
        items = eval_service.load_manifest(dataset)

        def classify(path):
            return ["0", "1", "2", "3", "4"]

        report = eval_service.run_eval(items, augset(), eval_service.CallableAdapter(classify))
        assert report.rows[0].baseline_acc == pytest.approx(7 / 12)
        print("✓ In-process adapters use the same contract")


class TestAdapters:
    """Adapter failures"""

    def test_missing_binary(self, dataset):
        with pytest.raises(AdapterError):
            eval_service.SubprocessAdapter("no-such-classifier-binary-xyz").predict([str(dataset)])
        print("✓ Missing adapter binary is an adapter error")

    def test_missing_prediction(self):
        with pytest.raises(AdapterError):
            eval_service.parse_adapter_output("a.png\t1,2,3,4,5\n", ["a.png", "b.png"])
        with pytest.raises(AdapterError):
            eval_service.parse_adapter_output("a.png 1,2,3,4,5\n", ["a.png"])
        print("✓ Missing or malformed adapter lines rejected")


class TestReport:
    """Report files"""

    def test_default_augset_loads(self):
        entries = eval_service.load_augset()
        assert entries[0].is_baseline
        assert {e.category for e in entries} == {"spatial", "color", "overlay", "pixel-level"}
        print(f"✓ Bundled preset has {len(entries)} augmentations")

    def test_write_report(self, dataset, tmp_path):
        items = eval_service.load_manifest(dataset)
        report = eval_service.run_eval(items, augset({"name": "hflip", "category": "spatial", "spec": {"op": "hflip"}}),
                                       adapter())
        paths = eval_service.write_report(report, tmp_path / "report")
        rows = paths["csv"].read_text().splitlines()
        assert rows[0].startswith("name,category,baseline_acc")
        assert len(rows) == 3
        data = json.loads(paths["json"].read_text())
        assert data["category_means"]["spatial"] == pytest.approx(-0.5)
        assert paths["dat"].read_text().count('"spatial"') == 2
        print("✓ CSV, JSON and gnuplot reports written")

    def test_bad_augmentation_entry(self):
        with pytest.raises(ParamValidationError):
            eval_service.load_augset([{"name": "x", "category": "audio", "spec": None}])
        print("✓ Unknown eval category rejected")
