import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from depthprobe.dataset_io import DepthGrid, Sample, SegmentationMap  # noqa: E402
from depthprobe.toy import build_toy_dataset  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def make_sample(ids, depth, classes, image_id="s", scene="bedroom", rgb=None, captions=()):
    ids = np.asarray(ids, dtype=np.uint16)
    depth = np.asarray(depth, dtype=np.float64)
    return Sample(image_id, scene, DepthGrid.from_meters(depth), SegmentationMap(ids, classes), rgb, list(captions))


def random_scene(rng, k, size=24, n_objects=None, duplicate_prob=0.2):
    """Random rectangles of random depth on a far background; some classes repeat."""
    n_objects = n_objects or int(rng.integers(2, 6))
    ids = np.zeros((size, size), dtype=np.uint16)
    depth = rng.uniform(8.0, 9.5, (size, size))
    classes = {}
    names = ["bed", "lamp", "sofa", "tv", "chair", "table", "plant", "picture", "desk", "oven"]
    for iid in range(1, n_objects + 1):
        h, w = rng.integers(1, 7, 2)
        r, c = rng.integers(0, size - h + 1), rng.integers(0, size - w + 1)
        ids[r:r + h, c:c + w] = iid
        base = rng.uniform(0.5, 7.5)
        depth[r:r + h, c:c + w] = base + rng.normal(0, rng.uniform(0.01, 0.6), (h, w))
        if iid > 1 and rng.random() < duplicate_prob:
            classes[iid] = classes[int(rng.integers(1, iid))]
        else:
            classes[iid] = names[(iid - 1) % len(names)]
    # occasional holes in the ground truth
    holes = rng.random((size, size)) < 0.05
    depth[holes] = 0.0
    present = set(np.unique(ids).tolist()) - {0}
    classes = {i: c for i, c in classes.items() if i in present}
    rgb = rng.integers(1, 256, (size, size, 3), dtype=np.uint8)
    return make_sample(ids, depth, classes, f"scene{k:03d}", rgb=rgb)


@pytest.fixture(scope="session")
def synthetic_scenes():
    rng = np.random.default_rng(20240611)
    return [random_scene(rng, k) for k in range(50)]


@pytest.fixture()
def toy_manifest(tmp_path):
    return build_toy_dataset(tmp_path / "toy")


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
