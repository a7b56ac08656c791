import json
import sys
from pathlib import Path

import pytest

from accell.cli import main
from accell.io import read_mask
from accell.phantom import load_manifest

FAKE_ADAPTER = Path(__file__).parent / "fake_adapter.py"

SMALL_CONFIG = {
    "phantom": {
        "height": 160, "width": 150,
        "cell_count_range": [6, 10],
        "clutter_count_range": [6, 10],
    },
    "count": 10,
    "seed": 3,
    "cdm": {"alpha_min": 0.7, "alpha_max": 0.9, "alpha_step": 0.1},
    "train": {"max_epochs": 40, "patience": 40, "hidden_dims": [16], "seed": 0},
    "split": {"repeats": 2, "seed": 5},
}


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    path.write_text(json.dumps(SMALL_CONFIG))
    return str(path)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory, config_file):
    out = tmp_path_factory.mktemp("data")
    assert main(["phantom-gen", "--config", config_file, "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def chambers(tmp_path_factory, config_file, dataset):
    out = tmp_path_factory.mktemp("chambers")
    assert main(["segment", "--config", config_file,
                 "--manifest", str(dataset / "manifest.json"),
                 "--out", str(out)]) == 0
    return out


class TestPhantomGen:
    def test_outputs_and_run_record(self, dataset):
        manifest = load_manifest(dataset / "manifest.json")
        assert len(manifest.entries) == 10
        record = json.loads((dataset / "run.json").read_text())
        assert record["command"] == "phantom-gen"
        assert record["config"]["count"] == 10

    def test_rerun_bitwise_identical(self, tmp_path, config_file):
        a, b = tmp_path / "a", tmp_path / "b"
        cfg = json.loads(Path(config_file).read_text())
        cfg["count"] = 3
        small = tmp_path / "cfg.json"
        small.write_text(json.dumps(cfg))
        assert main(["phantom-gen", "--config", str(small), "--out", str(a)]) == 0
        assert main(["phantom-gen", "--config", str(small), "--out", str(b)]) == 0
        for name in sorted(p.name for p in a.iterdir()):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name


class TestSegment:
    def test_masks_and_reports(self, dataset, chambers):
        manifest = load_manifest(dataset / "manifest.json")
        for entry in manifest.entries:
            mask_path = chambers / f"{entry.image_id}_pred_chamber.png"
            assert mask_path.exists()
            assert read_mask(mask_path).any()
        seg_report = json.loads((chambers / "segmentation.json").read_text())
        assert seg_report["mean_iou"] > 0.9
        prompts = json.loads((chambers / "prompts.json").read_text())
        assert len(prompts) == 10

    def test_external_backend_via_env(self, tmp_path, dataset, config_file, monkeypatch):
        out = tmp_path / "ext"
        monkeypatch.setenv("ACCDOR_ADAPTER_CMD",
                           f"{sys.executable} {FAKE_ADAPTER}")
        assert main(["segment", "--config", config_file, "--backend", "external",
                     "--manifest", str(dataset / "manifest.json"),
                     "--out", str(out)]) == 0
        assert (out / "segmentation.json").exists()


@pytest.fixture(scope="module")
def search_dir(tmp_path_factory, config_file, dataset, chambers):
    out = tmp_path_factory.mktemp("search")
    assert main(["alpha-search", "--config", config_file,
                 "--manifest", str(dataset / "manifest.json"),
                 "--chambers", str(chambers), "--out", str(out)]) == 0
    return out


class TestSearchDetectEval:
    def test_alpha_search_outputs(self, search_dir):
        report = json.loads((search_dir / "alpha_report.json").read_text())
        assert (search_dir / "classifier.bin").exists()
        alphas = [row["alpha"] for row in report["per_alpha"]]
        assert alphas == [0.7, 0.8, 0.9]
        assert report["best_alpha"] in alphas

    def test_detect_and_eval(self, tmp_path, config_file, dataset, chambers, search_dir):
        report = json.loads((search_dir / "alpha_report.json").read_text())
        detections = tmp_path / "detections.jsonl"
        assert main(["detect", "--config", config_file,
                     "--manifest", str(dataset / "manifest.json"),
                     "--chambers", str(chambers),
                     "--classifier", str(search_dir / "classifier.bin"),
                     "--alpha", str(report["best_alpha"]),
                     "--out", str(detections)]) == 0
        assert detections.exists()
        out = tmp_path / "eval"
        assert main(["eval", "--manifest", str(dataset / "manifest.json"),
                     "--detections", str(detections), "--out", str(out)]) == 0
        scored = json.loads((out / "report.json").read_text())
        assert 0.0 <= scored["box"]["f1"] <= 1.0

    def test_eval_identity_on_ground_truth(self, tmp_path, dataset):
        manifest = load_manifest(dataset / "manifest.json")
        lines = []
        for e in manifest.entries:
            boxes = [{"row": r, "col": c, "h": 20, "w": 20, "score": 1.0}
                     for (r, c) in e.cells]
            lines.append(json.dumps({"image": e.image_id, "boxes": boxes}))
        det_path = tmp_path / "gt.jsonl"
        det_path.write_text("\n".join(lines) + "\n")
        out = tmp_path / "eval"
        assert main(["eval", "--manifest", str(dataset / "manifest.json"),
                     "--detections", str(det_path), "--out", str(out)]) == 0
        scored = json.loads((out / "report.json").read_text())
        assert scored["box"] == {"precision": 1.0, "recall": 1.0, "f1": 1.0}
        assert scored["image"] == {"precision": 1.0, "recall": 1.0, "f1": 1.0}


class TestFullProtocol:
    def test_protocol_report_and_determinism(self, tmp_path, config_file, dataset):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            assert main(["eval", "--config", config_file,
                         "--manifest", str(dataset / "manifest.json"),
                         "--out", str(out)]) == 0
        report = json.loads((out1 / "report.json").read_text())
        assert set(report) == {"segmentation", "detection", "config"}
        assert len(report["detection"]["repeats"]) == 2
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
        assert (out1 / "run.json").read_bytes() == (out2 / "run.json").read_bytes()


class TestOverlay:
    def test_overlay_written(self, tmp_path, dataset):
        manifest = load_manifest(dataset / "manifest.json")
        image_id = manifest.entries[0].image_id
        out = tmp_path / "overlay.png"
        assert main(["overlay", "--manifest", str(dataset / "manifest.json"),
                     "--image-id", image_id, "--out", str(out)]) == 0
        assert out.exists()

    def test_unknown_image_id(self, tmp_path, dataset):
        assert main(["overlay", "--manifest", str(dataset / "manifest.json"),
                     "--image-id", "nope", "--out", str(tmp_path / "x.png")]) == 1


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["phantom-gen", "--bogus"])
        assert exc.value.code == 2
