"""Series model and preprocessing operations."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resbench.errors import (
    EmptySeries,
    InvalidSegmentation,
    InvalidWindow,
    MalformedSeriesCsv,
    OutOfRange,
)
from resbench.series import (
    Metric,
    MetricSeries,
    Sample,
    dump_series_csv,
    fill_missing,
    integrate,
    latency_series,
    median_filter,
    normalize,
    parse_series_csv,
    segment_variances,
    smooth,
    throughput_series,
)
from oracles import oracle_integrate


def ts(values, cadence_ms=1000, t0=0):
    t = [t0 + i * cadence_ms for i in range(len(values))]
    return throughput_series(cadence_ms, t, values)


class TestModel:
    def test_sample_rejects_negative(self):
        with pytest.raises(ValueError):
            Sample(0, -1.0)

    def test_sample_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Sample(0, float("nan"))

    def test_series_requires_increasing_timestamps(self):
        with pytest.raises(ValueError):
            throughput_series(1000, [0, 0], [1.0, 2.0])


class TestFillMissing:
    def test_linear_gap(self):
        s = throughput_series(1000, [0, 2000], [10.0, 30.0])
        out = fill_missing(s, 1000)
        assert [(x.t_ms, x.value) for x in out] == [(0, 10.0), (1000, 20.0), (2000, 30.0)]

    def test_complete_grid_identity(self):
        s = ts([5.0, 6.0, 7.0])
        assert fill_missing(s, 1000) == s

    def test_three_point_interpolation(self):
        s = throughput_series(1000, [0, 3000], [0.0, 9.0])
        out = fill_missing(s, 1000)
        assert [x.value for x in out] == [0.0, 3.0, 6.0, 9.0]

    def test_too_few_samples(self):
        s = throughput_series(1000, [0], [1.0])
        with pytest.raises(EmptySeries):
            fill_missing(s, 1000)

    @given(
        st.lists(
            st.tuples(st.integers(0, 200), st.floats(0, 1e6, allow_nan=False)),
            min_size=2,
            max_size=40,
            unique_by=lambda p: p[0],
        ),
        st.integers(1, 5),
    )
    @settings(max_examples=60, deadline=None)
    def test_idempotent(self, points, cadence):
        points = sorted(points)
        s = throughput_series(
            cadence, [p[0] * cadence for p in points], [p[1] for p in points]
        )
        once = fill_missing(s, cadence)
        assert fill_missing(once, cadence) == once

    def test_preserves_on_grid_values_exactly(self):
        vals = [1.000000001, 2.7, 3.14159, 9.9]
        s = throughput_series(500, [0, 500, 1500, 2000], vals[:4])
        out = fill_missing(s, 500)
        kept = {x.t_ms: x.value for x in out}
        assert kept[0] == vals[0] and kept[500] == vals[1]
        assert kept[1500] == vals[2] and kept[2000] == vals[3]


class TestSmooth:
    def test_constant_identity(self):
        s = ts([4.0] * 9)
        assert smooth(s, 3).values().tolist() == [4.0] * 9
        assert smooth(s, 7) == s

    def test_linear_interior_unchanged(self):
        s = ts([0.0, 1.0, 2.0, 3.0, 4.0])
        out = smooth(s, 3).values()
        assert out[1:4].tolist() == [1.0, 2.0, 3.0]

    def test_spike_spread(self):
        s = ts([0.0, 0.0, 9.0, 0.0, 0.0])
        assert smooth(s, 3).values().tolist() == [0.0, 3.0, 3.0, 3.0, 0.0]

    def test_even_window_rejected(self):
        with pytest.raises(InvalidWindow):
            smooth(ts([1.0, 2.0, 3.0, 4.0]), 2)

    def test_window_longer_than_series_rejected(self):
        with pytest.raises(InvalidWindow):
            smooth(ts([1.0, 2.0]), 3)

    def test_length_preserved(self):
        s = ts(list(np.linspace(3, 8, 17)))
        assert len(smooth(s, 5)) == 17

    def test_mean_preserved_on_constant(self):
        s = ts([7.25] * 11)
        out = smooth(s, 5)
        assert abs(out.values().mean() - 7.25) < 1e-9 * 7.25


class TestMedianFilter:
    def test_constant_identity(self):
        s = ts([3.0] * 7)
        assert median_filter(s, 3) == s

    def test_spike_removed(self):
        s = ts([10.0, 10.0, 99.0, 10.0, 10.0])
        assert median_filter(s, 3).values().tolist() == [10.0] * 5

    def test_monotone_interior_unchanged(self):
        s = ts([1.0, 2.0, 3.0, 5.0, 8.0])
        out = median_filter(s, 3).values()
        assert out[1:4].tolist() == [2.0, 3.0, 5.0]

    def test_even_window_rejected(self):
        with pytest.raises(InvalidWindow):
            median_filter(ts([1.0, 2.0, 3.0]), 4)

    def test_length_preserved(self):
        s = ts(list(np.linspace(0, 1, 23)))
        assert len(median_filter(s, 7)) == 23


class TestNormalize:
    def test_basic(self):
        s = ts([0.0, 50.0, 100.0])
        assert normalize(s).values().tolist() == [0.0, 0.5, 1.0]

    def test_flat_maps_to_half(self):
        s = ts([7.0, 7.0, 7.0])
        assert normalize(s).values().tolist() == [0.5, 0.5, 0.5]

    def test_two_points(self):
        s = ts([40.0, 100.0])
        assert normalize(s).values().tolist() == [0.0, 1.0]

    def test_empty_rejected(self):
        s = MetricSeries(Metric.THROUGHPUT, "tps", 1000, ())
        with pytest.raises(EmptySeries):
            normalize(s)

    @given(st.lists(st.floats(0, 1e9, allow_nan=False), min_size=2, max_size=50))
    @settings(max_examples=60, deadline=None)
    def test_bounds_and_idempotence(self, values):
        s = ts(values)
        once = normalize(s)
        v = once.values()
        assert (v >= 0).all() and (v <= 1).all()
        if max(values) > min(values):
            assert np.allclose(normalize(once).values(), v)


class TestIntegrate:
    def test_constant_rectangle(self):
        s = ts([5.0] * 11)
        assert integrate(s, 0, 10_000) == pytest.approx(50.0, abs=1e-12)

    def test_linear_triangle(self):
        s = ts([float(i) for i in range(11)])
        assert integrate(s, 0, 10_000) == pytest.approx(50.0, abs=1e-12)

    def test_v_curve(self):
        down = list(np.linspace(100, 40, 11))
        up = list(np.linspace(40, 100, 11))[1:]
        s = ts(down + up)
        assert integrate(s, 0, 20_000) == pytest.approx(1400.0, abs=1e-9)

    def test_out_of_span(self):
        s = ts([1.0, 2.0, 3.0])
        with pytest.raises(OutOfRange):
            integrate(s, 0, 5000)
        with pytest.raises(OutOfRange):
            integrate(s, 1000, 1000)

    def test_endpoint_interpolation(self):
        s = ts([0.0, 10.0])  # slope 10 per second
        assert integrate(s, 250, 750) == pytest.approx(
            oracle_integrate(s, 250, 750), rel=1e-12
        )

    @given(
        st.lists(st.floats(0, 1000, allow_nan=False), min_size=3, max_size=30),
        st.integers(0, 100),
        st.integers(101, 200),
    )
    @settings(max_examples=60, deadline=None)
    def test_additivity(self, values, a_pct, b_pct):
        s = ts(values)
        first, last = s.span_ms()
        span = last - first
        a = first
        c = last
        b = first + span * a_pct // 201 + 1
        if not (a < b < c):
            return
        whole = integrate(s, a, c)
        parts = integrate(s, a, b) + integrate(s, b, c)
        assert whole == pytest.approx(parts, rel=1e-9, abs=1e-9)


class TestSegmentVariances:
    def test_constant_zero(self):
        s = ts([3.0] * 8)
        assert segment_variances(s, 2) == [0.0, 0.0]

    def test_alternating(self):
        s = ts([0.0, 1.0] * 4)
        assert segment_variances(s, 2) == [0.25, 0.25]

    def test_linspace_variance(self):
        s = ts(list(np.linspace(0, 1, 101)))
        (v,) = segment_variances(s, 1)
        assert v == pytest.approx(0.085, abs=1e-12)

    def test_k_too_large(self):
        with pytest.raises(InvalidSegmentation):
            segment_variances(ts([1.0, 2.0]), 3)

    @given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=4, max_size=60), st.integers(1, 4))
    @settings(max_examples=60, deadline=None)
    def test_normalized_sum_bound(self, values, k):
        s = ts(values)
        if k > len(s):
            return
        total = sum(segment_variances(normalize(s), k))
        assert total <= 0.25 * k + 1e-12


class TestCsv:
    def test_round_trip(self):
        thr = ts([1.5, 2.25, 3.125])
        lat = latency_series(1000, [0, 1000, 2000], [10.0, 20.5, 11.0])
        text = dump_series_csv(thr, lat)
        assert text.startswith("timestamp_ms,throughput_tps,latency_ms\n")
        assert "\r" not in text
        thr2, lat2 = parse_series_csv(text)
        assert thr2 == thr and lat2 == lat

    def test_missing_cells(self):
        text = "timestamp_ms,throughput_tps,latency_ms\n0,1.0,\n1000,,5.0\n2000,2.0,6.0\n"
        thr, lat = parse_series_csv(text)
        assert [s.t_ms for s in thr] == [0, 2000]
        assert [s.t_ms for s in lat] == [1000, 2000]

    def test_malformed_reports_line(self):
        text = "timestamp_ms,throughput_tps,latency_ms\n0,1.0,2.0\nx,1.0,2.0\n"
        with pytest.raises(MalformedSeriesCsv) as err:
            parse_series_csv(text)
        assert err.value.line_no == 3

    def test_bad_header(self):
        with pytest.raises(MalformedSeriesCsv):
            parse_series_csv("time,thr,lat\n0,1,2\n")

    def test_byte_stable(self):
        thr = ts([1.0 / 3.0, 2.0 / 7.0])
        assert dump_series_csv(thr, None) == dump_series_csv(thr, None)
