import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from nanopairs.errors import ParseError
from nanopairs.photonstats import (
    MAGIC,
    CoincidenceHistogram,
    ExperimentConfig,
    TimeTagStream,
    analyze,
    correlate,
    correlate_sliced,
    expected_coincidences,
    fit_thermal,
    g2,
    histogram_csv,
    invert_rate,
    merge_histograms,
    peak_significance,
    read_tags_csv,
    read_ttg,
    simulate_timetags,
    write_tags_csv,
    write_ttg,
)

QUIET = ExperimentConfig(pair_rate=0.0, dark_rate=0.0, thermal_rate=0.0, duration_s=1000.0)


def brute_force(t1, t2, lo, width, nbins):
    counts = np.zeros(nbins, dtype=np.int64)
    for a in t1:
        for b in t2:
            d = b - a - lo
            if 0 <= d < width * nbins:
                counts[d // width] += 1
    return counts


def flat(counts, bin_ps=162.0, duration=86400.0, n=10**5):
    return CoincidenceHistogram(np.asarray(counts), bin_ps, 0.0, n, n, duration)


# -- simulation ------------------------------------------------------------------------------


def test_dark_only_counts():
    s1, s2 = simulate_timetags(QUIET.with_(dark_rate=5.0, dead_time_us=0.0))
    for s in (s1, s2):
        assert abs(len(s) - 5000) <= 3 * np.sqrt(5000)
        assert s.times.min() >= 0 and s.times.max() < 1000 * 10**12


def test_all_rates_zero():
    s1, s2 = simulate_timetags(QUIET)
    assert len(s1) == len(s2) == 0


def test_true_coincidence_expectation():
    cfg = QUIET.with_(pair_rate=35.0, eta_arm=0.02, duration_s=86400.0, jitter_ps=50.0)
    assert expected_coincidences(cfg) == pytest.approx(604.8)
    s1, s2 = simulate_timetags(cfg)
    h = correlate(s1, s2, 162.0, 300, cfg.delay_ns, offset_ps=-162.0 * 150)
    got = int(h.counts.sum())
    assert abs(got - 604.8) <= 3 * np.sqrt(604.8)


def test_determinism():
    cfg = ExperimentConfig(duration_s=3600.0, seed=12345)
    a, b = simulate_timetags(cfg), simulate_timetags(cfg)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.times, y.times)
    other = simulate_timetags(cfg.with_(seed=12346))
    assert not np.array_equal(a[0].times, other[0].times)


def test_dead_time_respected():
    s1, _ = simulate_timetags(QUIET.with_(dark_rate=5e4, duration_s=10.0, dead_time_us=10.0))
    assert np.diff(s1.times).min() >= 10 * 10**6


@pytest.mark.parametrize("field,value", [("eta_arm", 1.5), ("split", -0.1), ("bins", 0), ("dark_rate", -1.0)])
def test_config_validation(field, value):
    with pytest.raises(ValueError):
        ExperimentConfig(**{field: value})


# -- correlation --------------------------------------------------------------------------------


def test_single_pair_lands_in_bin_163():
    h = correlate(np.array([1000], dtype=np.int64), np.array([1000 + 26500], dtype=np.int64), 162.0, 300)
    assert h.counts.sum() == 1 and h.counts[163] == 1


def test_empty_streams():
    h = correlate(np.empty(0, np.int64), np.empty(0, np.int64))
    assert h.counts.sum() == 0 and h.bins == 300


def test_unsorted_rejected():
    with pytest.raises(ValueError):
        correlate(np.array([5, 3]), np.array([1, 2]))
    with pytest.raises(ValueError):
        TimeTagStream(1, np.array([5, 3]), 1.0)


def test_delay_is_subtracted():
    t1 = np.array([0, 10**6], dtype=np.int64)
    t2 = t1 + 26500
    h = correlate(t1, t2, 162.0, 300, delay_ns=26.5, offset_ps=-162.0 * 150)
    assert h.counts[150] == 2
    assert h.edges_ps[150] == pytest.approx(26500.0)


@given(st.integers(0, 2**31), st.integers(1, 400), st.integers(-30000, 5000))
def test_brute_force_equality(seed, width, lo):
    rng = np.random.default_rng(seed)
    t1 = np.sort(rng.integers(0, 5 * 10**6, 1000))
    t2 = np.sort(rng.integers(0, 5 * 10**6, 1000))
    h = correlate(t1, t2, float(width), 97, offset_ps=float(lo))
    np.testing.assert_array_equal(h.counts, brute_force(t1, t2, lo, width, 97))


def test_independent_streams_accidentals_and_g2():
    rng = np.random.default_rng(7)
    dur = 1000 * 10**12
    t1 = np.sort(rng.integers(0, dur, rng.poisson(1e6)))
    t2 = np.sort(rng.integers(0, dur, rng.poisson(1e6)))
    h = correlate(TimeTagStream(1, t1, 1000.0), TimeTagStream(2, t2, 1000.0), 162.0, 300, offset_ps=-24300.0)
    level = 1e3 * 1e3 * 162e-12 * 1e3
    assert abs(h.counts.mean() - level) <= 3 * np.sqrt(level / h.bins)
    g = g2(h)
    assert abs(g.mean() - 1.0) <= 3 * np.sqrt(1.0 / (level * h.bins))


def test_g2_definition():
    # R1 = R2 = 1e5 Hz, tau = 162 ps, T = 1000 s: accidental level 1620 per bin
    n, t = 10**8, 1000.0
    counts = np.full(300, 1620)
    counts[10] *= 2
    g = g2(CoincidenceHistogram(counts, 162.0, 0.0, n, n, t))
    assert g[10] == pytest.approx(2.0, rel=1e-12) and g[0] == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        g2(CoincidenceHistogram(np.zeros(5, int), 162.0, 0.0, 0, 4, 1.0))


def test_sliced_histograms_merge_exactly():
    cfg = ExperimentConfig(duration_s=3600.0, eta_arm=0.1, thermal_rate=2000.0, seed=3)
    s1, s2 = simulate_timetags(cfg)
    full = correlate(s1, s2, 162.0, 300)
    edges = np.linspace(0, 3600 * 10**12, 7).astype(np.int64)
    parts = correlate_sliced(s1, s2, edges, 162.0, 300)
    merged = merge_histograms(parts)
    np.testing.assert_array_equal(merged.counts, full.counts)
    assert (merged.n1, merged.n2) == (full.n1, full.n2)
    # associativity: any grouping gives the same total
    left = merge_histograms([merge_histograms(parts[:2]), merge_histograms(parts[2:])])
    np.testing.assert_array_equal(left.counts, merged.counts)
    assert merged.duration_s == pytest.approx(3600.0)


# -- significance, pedestal, inversion --------------------------------------------------------


def test_significance_no_excess():
    z, p, _, mu = peak_significance(flat(np.full(300, 100)))
    assert z == 0.0 and mu == 100.0
    assert p == pytest.approx(stats.poisson.sf(99, 100), rel=1e-12)
    assert p == pytest.approx(0.52, abs=0.01)


def test_significance_peak():
    c = np.full(300, 100)
    c[163] = 200
    z, p, peak, _ = peak_significance(flat(c))
    assert z == pytest.approx(10.0) and p < 1e-15 and peak == 163


def test_significance_zero_background_floor():
    c = np.zeros(300, int)
    c[50] = 3
    z, p, _, mu = peak_significance(flat(c))
    assert mu == pytest.approx(1.0 / 297)
    assert p == pytest.approx(stats.poisson.sf(2, 1.0 / 297))


def test_significance_needs_background_bins():
    with pytest.raises(ValueError):
        peak_significance(flat(np.ones(15, int)))


def test_pedestal_fit_noiseless():
    centers = 162.0 * (np.arange(300) + 0.5)
    counts = 1e4 * np.exp(-0.5 * ((centers - 24000.0) / 850.0) ** 2) + 500.0
    h = flat(np.rint(counts * 100).astype(int))
    fit = fit_thermal(h, (0, 0))
    assert fit.sigma_ps == pytest.approx(850.0, rel=0.01)
    assert fit.fwhm_ps == pytest.approx(2001.6, rel=0.01)


def test_pedestal_fit_flat():
    rng = np.random.default_rng(0)
    h = flat(rng.poisson(400, 300))
    fit = fit_thermal(h)
    assert fit.amplitude * np.sqrt(2 * np.pi) * fit.sigma_ps / 162.0 < 5 * np.sqrt(400 * 300)


def test_invert_example():
    c = np.full(300, 50)
    c[163] += 605
    est = invert_rate(flat(c), 0.02, 0.5, halfwidth=0)
    assert est.rate_hz == pytest.approx(605 / 86400 / (0.02**2 * 0.5), rel=1e-12)
    assert est.rate_hz == pytest.approx(35.0, rel=0.001)
    lo, hi = est.ci_hz
    assert lo < 35.0 < hi


def test_invert_upper_bound():
    est = invert_rate(flat(np.full(300, 50)), 0.02, 0.5)
    assert est.is_upper_bound and est.upper_bound_hz > 0 and est.rate_hz is None


def test_invert_rejects_bad_losses():
    with pytest.raises(ValueError):
        invert_rate(flat(np.full(300, 50)), 0.0)


def round_trip(rate, eta, seed, duration=86400.0):
    cfg = ExperimentConfig(pair_rate=rate, eta_arm=eta, thermal_rate=0.0, seed=seed, duration_s=duration)
    s1, s2 = simulate_timetags(cfg)
    h = correlate(s1, s2, cfg.bin_ps, cfg.bins, 0.0)
    return analyze(h, eta, fit_pedestal=False)


@pytest.mark.parametrize("rate,eta", [(9.0, 0.05), (35.0, 0.02), (500.0, 0.005), (5.0, 0.1)])
def test_round_trip_over_seeds(rate, eta):
    z = []
    for seed in range(20):
        rep = round_trip(rate, eta, seed)
        lo, hi = rep["ci"]
        sigma = (hi - lo) / (2 * 1.96)
        est = rep["inverted_rate_hz"] if rep["inverted_rate_hz"] is not None else 0.0
        z.append((est - rate) / sigma)
    z = np.array(z)
    # each seed lands within 2 sigma with probability 0.954; 16 of 20 is the
    # 1.2% lower tail of that binomial
    assert np.sum(np.abs(z) <= 2) >= 16
    assert abs(z.mean()) <= 3 / np.sqrt(z.size)


def test_analyze_empty():
    rep = analyze(flat(np.zeros(300, int)), 0.01)
    assert rep["total_counts"] == 0 and rep["inverted_rate_hz"] is None and rep["p_value"] == 1.0


# -- file formats --------------------------------------------------------------------------------


def sample_streams():
    s1, s2 = simulate_timetags(ExperimentConfig(duration_s=600.0, eta_arm=0.1, seed=9))
    return s1, s2


def test_ttg_round_trip(tmp_path):
    s1, s2 = sample_streams()
    path = tmp_path / "tags.ttg"
    write_ttg(path, [s1, s2])
    raw = path.read_bytes()
    assert raw[:4] == MAGIC and len(raw) == 4 + 9 * (len(s1) + len(s2))
    streams, _ = read_ttg(path, 600.0)
    np.testing.assert_array_equal(streams[1].times, s1.times)
    np.testing.assert_array_equal(streams[2].times, s2.times)


def test_csv_round_trip(tmp_path):
    s1, s2 = sample_streams()
    path = tmp_path / "tags.csv"
    write_tags_csv(path, [s1, s2])
    assert path.read_text().splitlines()[0] == "channel,time_ps"
    streams, _ = read_tags_csv(path, 600.0)
    np.testing.assert_array_equal(streams[2].times, s2.times)


def test_ttg_parse_errors(tmp_path):
    bad = tmp_path / "bad.ttg"
    bad.write_bytes(b"XXXX")
    with pytest.raises(ParseError) as info:
        read_ttg(bad)
    assert info.value.offset == 0
    rec = np.zeros(3, dtype=[("channel", "u1"), ("time_ps", "<u8")])
    rec["channel"] = 1
    rec["time_ps"] = [10, 5, 20]
    bad.write_bytes(MAGIC + rec.tobytes())
    with pytest.raises(ParseError) as info:
        read_ttg(bad)
    assert info.value.offset == 4 + 9
    bad.write_bytes(MAGIC + rec[:1].tobytes() + b"\x01\x02")
    with pytest.raises(ParseError) as info:
        read_ttg(bad)
    assert info.value.offset == 13


def test_csv_parse_error_offset(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("channel,time_ps\n1,100\n2,abc\n")
    with pytest.raises(ParseError) as info:
        read_tags_csv(bad)
    assert info.value.offset == len("channel,time_ps\n1,100\n")


def test_empty_valid_file(tmp_path):
    path = tmp_path / "empty.ttg"
    path.write_bytes(MAGIC)
    streams, dur = read_ttg(path)
    assert streams == {} and dur == 0.0


def test_histogram_csv():
    h = correlate(np.array([0]), np.array([26500]), 162.0, 300)
    lines = histogram_csv(h).splitlines()
    assert lines[0] == "bin_index,delay_ps,counts"
    assert lines[1 + 163] == "163,26406.0,1"
