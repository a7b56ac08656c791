"""Integration against the external adapter package (adapter/).

These tests run only when node and the built adapter are available;
build with `npm run build` inside adapter/.
"""

import shutil
import subprocess
from pathlib import Path

import pytest

from accell.backends import ExternalProcessSegmenter
from accell.chamber import segment_chamber
from accell.metrics import iou
from accell.phantom import PhantomConfig, generate_phantom

ADAPTER_CLI = Path(__file__).parent.parent / "adapter" / "dist" / "cli.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not ADAPTER_CLI.exists(),
    reason="node or built adapter not available",
)


def adapter_command(*extra):
    return ["node", str(ADAPTER_CLI), *extra]


class TestAdapterRoundTrip:
    def test_candidates_have_image_dimensions(self):
        image, _ = generate_phantom(PhantomConfig(), 42)
        with ExternalProcessSegmenter(adapter_command()) as seg:
            out = seg.segment(image, [(200, 160), (200, 205)])
        assert len(out) >= 1
        for cand in out:
            assert cand.mask.shape == image.shape
            assert 0.0 <= cand.score <= 1.0

    def test_best_mask_contains_chamber_prompts(self):
        image, gt = generate_phantom(PhantomConfig(), 43)
        prompts = [(200, 160), (200, 205)]
        with ExternalProcessSegmenter(adapter_command()) as seg:
            out = seg.segment(image, prompts)
        best = max(out, key=lambda c: c.score)
        for (r, c) in prompts:
            assert best.mask[r, c]

    def test_full_chamber_segmentation(self):
        image, gt = generate_phantom(PhantomConfig(), 44)
        with ExternalProcessSegmenter(adapter_command()) as seg:
            chamber = segment_chamber(image, seg)
        assert iou(chamber.mask, gt.chamber_mask) >= 0.95

    def test_serial_requests(self):
        image, _ = generate_phantom(PhantomConfig(height=200, width=180), 45)
        with ExternalProcessSegmenter(adapter_command()) as seg:
            for _ in range(3):
                out = seg.segment(image, [(100, 80), (100, 100)])
                assert len(out) >= 1

    def test_unsupported_variant_fails_at_startup(self):
        result = subprocess.run(adapter_command("--variant", "vit_h"),
                                capture_output=True, text=True, timeout=30)
        assert result.returncode != 0
        assert "unsupported variant" in result.stderr
        assert result.stdout == ""
