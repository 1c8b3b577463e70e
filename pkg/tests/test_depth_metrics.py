import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depthprobe.dataset_io import DepthGrid
from depthprobe.depth_metrics import (
    METRICS,
    EvalConfig,
    ImageMetrics,
    MetricReport,
    aggregate,
    compare,
    pixel_metrics,
    resize_nearest,
)
from depthprobe.exceptions import ConfigError, DegenerateError, ValidationError
from oracles import naive_metrics


def test_identity():
    gt = np.random.default_rng(0).uniform(0.5, 9, (5, 5))
    m = pixel_metrics(gt, gt)
    assert m.values() == (1.0, 1.0, 1.0, 0.0, 0.0, 0.0)


def test_hand_example():
    m = pixel_metrics(np.array([[1.1, 2.5]]), np.array([[1.0, 2.0]]))
    assert m.abs_rel == pytest.approx(0.175, abs=1e-12)
    assert m.rmse == pytest.approx(math.sqrt(0.13), abs=1e-12)
    assert m.rmse == pytest.approx(0.360555, abs=1e-6)
    assert m.log10 == pytest.approx((math.log10(1.1) + math.log10(1.25)) / 2, abs=1e-12)
    assert (m.delta1, m.delta2, m.delta3) == (0.5, 1.0, 1.0)


def test_delta3_boundary_is_strict():
    gt = np.array([[0.5, 1.0, 2.0, 4.0]])
    m = pixel_metrics(gt * 1.25 ** 3, gt)
    assert m.delta3 == 0.0


def test_invalid_pixels_excluded():
    gt = np.array([[1.0, 0.0, 12.0, np.nan]])
    pred = np.array([[1.0, 5.0, 5.0, 5.0]])
    m = pixel_metrics(pred, gt)
    assert m.valid_pixels == 1 and m.rmse == 0


def test_prediction_clamped():
    m = pixel_metrics(np.array([[0.0, 50.0]]), np.array([[0.001, 10.0]]))
    assert m.rmse == 0


def test_nan_prediction_excluded():
    m = pixel_metrics(np.array([[np.nan, 2.0]]), np.array([[1.0, 2.0]]))
    assert m.valid_pixels == 1


def test_crop():
    gt = np.ones((4, 4))
    pred = np.ones((4, 4)) * 2
    pred[1:3, 1:3] = 1
    assert pixel_metrics(pred, gt, EvalConfig(crop=(1, 3, 1, 3))).rmse == 0


def test_degenerate():
    with pytest.raises(DegenerateError):
        pixel_metrics(np.ones((2, 2)), np.zeros((2, 2)))


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        pixel_metrics(np.ones((2, 2)), np.ones((4, 4)))
    m = pixel_metrics(np.array([[1.0, 2.0], [3.0, 4.0]]), np.repeat(np.repeat([[1.0, 2.0], [3.0, 4.0]], 2, 0), 2, 1),
                      EvalConfig(allow_resize=True))
    assert m.rmse == 0


def test_resize_nearest():
    assert resize_nearest(np.array([[1, 2]]), (1, 4)).tolist() == [[1, 1, 2, 2]]


def test_config_validation():
    with pytest.raises(ConfigError):
        EvalConfig(min_depth=0)
    with pytest.raises(ConfigError):
        EvalConfig(delta_base=1.0)
    with pytest.raises(ConfigError):
        EvalConfig(aggregation="median")


def test_depth_grid_validity_respected():
    values = np.array([[1.0, 2.0]])
    gt = DepthGrid(values, np.array([[True, False]]))
    assert pixel_metrics(values * 2, gt).valid_pixels == 1


grids = st.integers(0, 2**32 - 1)


@settings(max_examples=50, deadline=None)
@given(grids)
def test_matches_naive(seed):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(0.1, 11, (16, 16))
    gt[rng.random((16, 16)) < 0.1] = 0
    pred = gt * rng.uniform(0.5, 2.0, (16, 16))
    got = pixel_metrics(pred, gt)
    ref = naive_metrics(pred.tolist(), gt.tolist())
    for m in METRICS:
        assert getattr(got, m) == pytest.approx(ref[m], rel=1e-9, abs=1e-15)
    assert got.valid_pixels == ref["valid_pixels"]


@settings(max_examples=50, deadline=None)
@given(grids, st.sampled_from([0.5, 0.25, 2.0]))
def test_scale_behaviour(seed, s):
    # stays inside [min_depth, max_depth] after scaling, so clamping never engages
    rng = np.random.default_rng(seed)
    gt = rng.uniform(0.5, 2.5, (8, 8))
    pred = gt * rng.uniform(0.6, 1.6, (8, 8))
    a = pixel_metrics(pred, gt)
    b = pixel_metrics(pred * s, gt * s)
    assert (a.delta1, a.delta2, a.delta3) == (b.delta1, b.delta2, b.delta3)
    assert b.abs_rel == pytest.approx(a.abs_rel, rel=1e-12)
    assert b.log10 == pytest.approx(a.log10, rel=1e-9)
    assert b.rmse == pytest.approx(a.rmse * s, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(grids)
def test_delta_symmetry_and_monotonicity(seed):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(0.5, 9, (8, 8))
    pred = rng.uniform(0.5, 9, (8, 8))
    a, b = pixel_metrics(pred, gt), pixel_metrics(gt, pred)
    assert (a.delta1, a.delta2, a.delta3) == (b.delta1, b.delta2, b.delta3)
    assert 0 <= a.delta1 <= a.delta2 <= a.delta3 <= 1


def _im(d1, rmse=0.1, n=10):
    return ImageMetrics(d1, 1.0, 1.0, rmse, 0.1, 0.05, n)


class TestAggregate:
    def test_single(self):
        r = aggregate({"a": _im(0.3)})
        assert r.aggregate == dict(zip(METRICS, _im(0.3).values()))

    def test_mean(self):
        assert aggregate({"a": _im(0.4), "b": _im(0.6)}).aggregate["delta1"] == pytest.approx(0.5)

    def test_order_independent_bytes(self):
        rng = np.random.default_rng(1)
        items = [(f"i{k}", _im(rng.random(), rng.random(), int(rng.integers(1, 99)))) for k in range(30)]
        a = aggregate(items).dumps()
        b = aggregate(list(reversed(items))).dumps()
        assert a == b

    def test_empty(self):
        with pytest.raises(ValidationError):
            aggregate({})

    def test_pixel_pool(self):
        r = aggregate({"a": _im(0.0, 1.0, 1), "b": _im(1.0, 0.0, 3)}, "pixel_pool")
        assert r.aggregate["delta1"] == 0.75
        assert r.aggregate["rmse"] == pytest.approx(math.sqrt(0.25))

    def test_json_round_trip(self):
        r = aggregate({"a": _im(0.4), "b": _im(0.6)}, degenerate=["c"])
        back = MetricReport.from_json(json.loads(r.dumps()))
        assert back.dumps() == r.dumps()


def _report(**agg):
    base = dict(zip(METRICS, (0.9, 0.99, 0.999, 0.3, 0.1, 0.04)))
    base.update(agg)
    return MetricReport({}, base, 1)


class TestCompare:
    def test_identical(self):
        assert all(r.delta == 0 for r in compare(_report(), _report()))

    def test_zero_shot_rmse_delta(self):
        row = {r.metric: r for r in compare(_report(rmse=0.252), _report(rmse=0.279))}["rmse"]
        assert row.delta == pytest.approx(0.027, abs=1e-12)

    def test_supervised_percent(self):
        row = {r.metric: r for r in compare(_report(rmse=0.382), _report(rmse=0.424))}["rmse"]
        assert round(row.percent, 1) == 11.0

    def test_id_mismatch(self):
        a = aggregate({"x": _im(0.2), "y": _im(0.4)})
        b = aggregate({"y": _im(0.6), "z": _im(0.8)})
        with pytest.raises(ValidationError):
            compare(a, b)
        rows = {r.metric: r for r in compare(a, b, intersect=True)}
        assert rows["delta1"].value_a == 0.4 and rows["delta1"].value_b == 0.6
