"""Monte Carlo of the two-detector coincidence experiment and time-tag analysis.

Times are int64 picoseconds. Channel 2 carries the fixed electronic delay, so
correlated events show up at t2 - t1 = delay in the coincidence histogram.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.optimize import least_squares

from .errors import FitError, ParseError
from .kernels import correlate_counts, dead_time_mask

__all__ = [
    "ExperimentConfig",
    "TimeTagStream",
    "CoincidenceHistogram",
    "ThermalFit",
    "RateEstimate",
    "simulate_timetags",
    "correlate",
    "correlate_sliced",
    "merge_histograms",
    "g2",
    "peak_significance",
    "fit_thermal",
    "invert_rate",
    "analyze",
    "expected_coincidences",
    "write_ttg",
    "read_ttg",
    "write_tags_csv",
    "read_tags_csv",
    "histogram_csv",
]

PS = 1e-12
MAGIC = b"TTG1"
_RECORD = np.dtype([("channel", "u1"), ("time_ps", "<u8")])


@dataclass(frozen=True)
class ExperimentConfig:
    """Source and detection parameters. Rates in Hz, times as named."""

    pair_rate: float = 35.0
    eta_arm: float = 0.01
    split: float = 0.5
    dark_rate: float = 5.0
    delay_ns: float = 26.5
    bin_ps: float = 162.0
    bins: int = 300
    duration_s: float = 86400.0
    thermal_rate: float = 300.0
    thermal_sigma_ns: float = 0.85
    jitter_ps: float = 50.0
    dead_time_us: float = 10.0
    seed: int = 0

    def __post_init__(self):
        for name in ("pair_rate", "dark_rate", "thermal_rate", "duration_s", "jitter_ps", "dead_time_us",
                     "thermal_sigma_ns", "delay_ns"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.eta_arm <= 1:
            raise ValueError("eta_arm must lie in [0, 1]")
        if not 0 <= self.split <= 1:
            raise ValueError("split must lie in [0, 1]")
        if int(self.bins) < 1 or self.bins != int(self.bins):
            raise ValueError("bins must be a positive integer")
        if not self.bin_ps > 0:
            raise ValueError("bin width must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    @property
    def pair_efficiency(self) -> float:
        """Probability that a pair gives one click on each detector."""
        return self.eta_arm**2 * 2.0 * self.split * (1.0 - self.split)


def expected_coincidences(config: ExperimentConfig) -> float:
    """Mean number of true pair coincidences over the run."""
    return config.pair_rate * config.pair_efficiency * config.duration_s


@dataclass(frozen=True, eq=False)
class TimeTagStream:
    channel: int
    times: np.ndarray
    duration_s: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.int64)
        if t.ndim != 1:
            raise ValueError("time tags must be a 1-D array")
        if t.size and (t[0] < 0 or np.any(np.diff(t) < 0)):
            raise ValueError("time tags must be non-negative and sorted")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    @property
    def rate(self) -> float:
        return self.times.size / self.duration_s if self.duration_s > 0 else 0.0


# -- simulation ---------------------------------------------------------------------


def _pair_events(rng, rate, duration_ps, eta, split, offset_sigma_ps):
    """Clicks from a Poisson pair source; returns (times on det 1, times on det 2)."""
    n = rng.poisson(rate * duration_ps * PS)
    if n == 0:
        return np.empty(0), np.empty(0)
    # per photon: detector 1, detector 2 or lost
    probs = np.array([eta * split, eta * (1.0 - split), 1.0 - eta])
    joint = np.outer(probs, probs).ravel()  # (photon a, photon b)
    counts = rng.multinomial(n, joint)
    d1, d2 = [], []
    for idx, c in enumerate(counts):
        if c == 0:
            continue
        a, b = divmod(idx, 3)
        if a == 2 and b == 2:
            continue
        t = rng.uniform(0.0, duration_ps, c)
        tb = t + rng.normal(0.0, offset_sigma_ps, c) if offset_sigma_ps > 0 else t
        for det, tt in ((a, t), (b, tb)):
            if det == 0:
                d1.append(tt)
            elif det == 1:
                d2.append(tt)
    cat = lambda xs: np.concatenate(xs) if xs else np.empty(0)  # noqa: E731
    return cat(d1), cat(d2)


def simulate_timetags(config: ExperimentConfig) -> tuple[TimeTagStream, TimeTagStream]:
    """Event-driven click streams of the two detectors (deterministic for a fixed seed)."""
    rng = np.random.default_rng(int(config.seed))
    dur = config.duration_s / PS
    s1, s2 = _pair_events(rng, config.pair_rate, dur, config.eta_arm, config.split, config.jitter_ps)
    h1, h2 = _pair_events(rng, config.thermal_rate, dur, config.eta_arm, config.split,
                          np.hypot(config.thermal_sigma_ns * 1e3, config.jitter_ps))
    n_dark = rng.poisson(config.dark_rate * config.duration_s, 2)
    k1 = rng.uniform(0.0, dur, n_dark[0])
    k2 = rng.uniform(0.0, dur, n_dark[1])
    delay = config.delay_ns * 1e3
    t1 = np.concatenate([s1, h1, k1])
    t2 = np.concatenate([s2, h2, k2]) + delay
    dead = int(round(config.dead_time_us * 1e6))
    streams = []
    for ch, t in ((1, t1), (2, t2)):
        t = np.sort(np.rint(t[(t >= 0) & (t < dur)]).astype(np.int64))
        if dead > 0 and t.size:
            t = t[dead_time_mask(t, dead)]
        streams.append(TimeTagStream(ch, t, config.duration_s))
    return streams[0], streams[1]


# -- histogramming ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    """Counts of t2 - t1 - delay over [offset, offset + bins * width) ps."""

    counts: np.ndarray
    bin_ps: float
    offset_ps: float
    n1: int
    n2: int
    duration_s: float
    delay_ps: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1 or c.size < 1 or np.any(c < 0):
            raise ValueError("histogram counts must be a non-empty, non-negative 1-D array")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def bins(self) -> int:
        return self.counts.size

    @property
    def edges_ps(self) -> np.ndarray:
        """Left bin edges in t2 - t1 (ps)."""
        return self.delay_ps + self.offset_ps + self.bin_ps * np.arange(self.bins)

    @property
    def centers_ps(self) -> np.ndarray:
        return self.edges_ps + 0.5 * self.bin_ps


def _as_times(s):
    if isinstance(s, TimeTagStream):
        return s.times
    t = np.asarray(s, dtype=np.int64)
    if t.size and np.any(np.diff(t) < 0):
        raise ValueError("time-tag stream is not sorted")
    return t


def correlate(s1, s2, bin_ps: float = 162.0, bins: int = 300, delay_ns: float = 0.0,
              offset_ps: float = 0.0, duration_s: float | None = None) -> CoincidenceHistogram:
    """Histogram of t2 - t1 - delay by a two-pointer sweep."""
    t1, t2 = _as_times(s1), _as_times(s2)
    if bins < 1 or bin_ps <= 0:
        raise ValueError("need bins >= 1 and a positive bin width")
    width = int(round(bin_ps))
    if abs(width - bin_ps) > 1e-9:
        raise ValueError("bin width must be a whole number of ps")
    delay = int(round(delay_ns * 1e3))
    lo = delay + int(round(offset_ps))
    counts = correlate_counts(t1, t2, lo, width, int(bins)) if (t1.size and t2.size) else np.zeros(bins, np.int64)
    if duration_s is None:
        durs = [s.duration_s for s in (s1, s2) if isinstance(s, TimeTagStream)]
        duration_s = max(durs) if durs else 0.0
    return CoincidenceHistogram(counts, float(width), float(offset_ps), int(t1.size), int(t2.size),
                                float(duration_s), float(delay))


def correlate_sliced(s1: TimeTagStream, s2: TimeTagStream, edges_ps, bin_ps: float = 162.0, bins: int = 300,
                     delay_ns: float = 0.0, offset_ps: float = 0.0) -> list[CoincidenceHistogram]:
    """Per-slice histograms whose sum equals the full-stream histogram exactly.

    Channel-1 events are partitioned by ``edges_ps``; each slice sees every channel-2
    event its window can reach. Singles are counted inside the slice only.
    """
    edges = np.asarray(edges_ps, dtype=np.int64)
    t1, t2 = s1.times, s2.times
    lo = int(round(delay_ns * 1e3)) + int(round(offset_ps))
    hi = lo + int(round(bin_ps)) * bins
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        last = a == edges[-2]
        i0, i1 = np.searchsorted(t1, a), (t1.size if last else np.searchsorted(t1, b))
        j0, j1 = np.searchsorted(t2, a + lo), np.searchsorted(t2, b + hi)
        sub1 = t1[i0:i1]
        sub2 = t2[j0:j1]
        h = correlate(sub1, sub2, bin_ps, bins, delay_ns, offset_ps, (b - a) * PS)
        n2 = int((t2.size if last else np.searchsorted(t2, b)) - np.searchsorted(t2, a))
        out.append(replace(h, n2=n2))
    return out


def merge_histograms(hists) -> CoincidenceHistogram:
    """Sum of histograms with identical binning (associative and commutative)."""
    hists = list(hists)
    if not hists:
        raise ValueError("nothing to merge")
    ref = hists[0]
    for h in hists[1:]:
        if (h.bins, h.bin_ps, h.offset_ps, h.delay_ps) != (ref.bins, ref.bin_ps, ref.offset_ps, ref.delay_ps):
            raise ValueError("histograms have different binning")
    return CoincidenceHistogram(
        np.sum([h.counts for h in hists], axis=0),
        ref.bin_ps,
        ref.offset_ps,
        sum(h.n1 for h in hists),
        sum(h.n2 for h in hists),
        sum(h.duration_s for h in hists),
        ref.delay_ps,
    )


# -- statistics --------------------------------------------------------------------


def g2(h: CoincidenceHistogram) -> np.ndarray:
    """g2[b] = (counts[b]/T) / (R1 R2 tau_c)."""
    if h.n1 <= 0 or h.n2 <= 0 or h.duration_s <= 0:
        raise ValueError("g2 needs non-zero singles on both channels and a positive duration")
    t = h.duration_s
    acc = (h.n1 / t) * (h.n2 / t) * h.bin_ps * PS
    return h.counts / t / acc


def _exclude_mask(nbins, exclude):
    mask = np.zeros(nbins, dtype=bool)
    if exclude is not None:
        lo, hi = exclude
        mask[max(0, int(lo)) : min(nbins, int(hi) + 1)] = True
    return mask


def peak_significance(h: CoincidenceHistogram, exclude=None, background: float | None = None):
    """(z, p, peak_bin, mu) for the highest bin.

    ``exclude`` = (first, last) bin range treated as the peak region (default: the
    arg-max bin and its neighbours). The background mean is the median of the
    remaining bins unless given explicitly, floored at 1/(number of background bins).
    z = (peak - mu)/sqrt(mu), p = P(X >= peak | Poisson(mu)).
    """
    counts = h.counts
    if exclude is None:
        i = int(np.argmax(counts))
        exclude = (i - 1, i + 1)
    mask = _exclude_mask(counts.size, exclude)
    lo, hi = max(0, int(exclude[0])), min(counts.size - 1, int(exclude[1]))
    peak_bin = lo + int(np.argmax(counts[lo : hi + 1]))
    peak = int(counts[peak_bin])
    n_bg = int((~mask).sum())
    if n_bg < 20:
        raise ValueError(f"need at least 20 background bins, have {n_bg}")
    mu = float(np.median(counts[~mask])) if background is None else float(background)
    mu = max(mu, 1.0 / n_bg)
    z = (peak - mu) / np.sqrt(mu)
    p = float(stats.poisson.sf(peak - 1, mu))
    return float(z), p, peak_bin, mu


@dataclass(frozen=True)
class ThermalFit:
    center_ps: float
    sigma_ps: float
    amplitude: float
    baseline: float
    residual: float
    covariance: tuple = ()

    @property
    def fwhm_ps(self) -> float:
        return 2.0 * np.sqrt(2.0 * np.log(2.0)) * self.sigma_ps

    def model(self, t_ps):
        return self.amplitude * np.exp(-0.5 * ((np.asarray(t_ps) - self.center_ps) / self.sigma_ps) ** 2) + self.baseline

    def _gradient(self, t_ps):
        t = np.atleast_1d(np.asarray(t_ps, dtype=float))
        u = (t - self.center_ps) / self.sigma_ps
        g = np.exp(-0.5 * u * u)
        a = self.amplitude
        return np.stack([a * g * u / self.sigma_ps, a * g * u * u / self.sigma_ps, g, np.ones_like(t)], axis=-1)

    def sum_std(self, t_ps) -> float:
        """Standard error of the model summed over ``t_ps`` (linearised, from the fit covariance)."""
        if not self.covariance:
            return 0.0
        g = self._gradient(t_ps).sum(axis=0)
        return float(np.sqrt(max(g @ np.asarray(self.covariance) @ g, 0.0)))


def fit_thermal(h: CoincidenceHistogram, exclude=None) -> ThermalFit:
    """Gaussian pedestal plus flat baseline, fitted with the sharp pair peak masked out."""
    counts = h.counts.astype(float)
    x = h.centers_ps
    if exclude is None:
        i = int(np.argmax(counts))
        exclude = (i - 1, i + 1)
    keep = ~_exclude_mask(counts.size, exclude)
    xs, ys = x[keep], counts[keep]
    if xs.size < 5:
        raise FitError("too few bins for a pedestal fit")
    width = min(9, max(1, xs.size // 10))
    smooth = np.convolve(ys, np.ones(width) / width, mode="same")
    base0 = float(np.median(ys))
    j = int(np.argmax(smooth))
    amp0 = max(float(smooth[j] - base0), 1e-9)
    span = x[-1] - x[0] + h.bin_ps
    x0 = np.array([xs[j], min(1000.0, span / 4.0), amp0, base0])
    lb = [x[0], 0.5 * h.bin_ps, 0.0, -np.inf]
    ub = [x[-1] + h.bin_ps, span, np.inf, np.inf]

    def model(v):
        c, s, a, b = v
        return a * np.exp(-0.5 * ((xs - c) / s) ** 2) + b

    # unweighted pass for a start, then Poisson weights from that model
    scale = max(amp0, 1.0)
    sigma = np.full(xs.size, scale)
    for _ in range(2):
        sol = least_squares(lambda v: (model(v) - ys) / sigma, x0, bounds=(lb, ub),
                            x_scale=[h.bin_ps, h.bin_ps, scale, scale])
        x0 = sol.x
        sigma = np.sqrt(np.maximum(model(sol.x), 1.0))
    rms = float(np.sqrt(np.mean((model(sol.x) - ys) ** 2)))
    if not sol.success:
        raise FitError(f"pedestal fit did not converge: {sol.message}", residual=rms)
    c, s, a, b = (float(v) for v in sol.x)
    try:
        cov = tuple(map(tuple, np.linalg.inv(sol.jac.T @ sol.jac)))
    except np.linalg.LinAlgError:
        cov = ()
    return ThermalFit(c, s, a, b, rms, cov)


@dataclass(frozen=True)
class RateEstimate:
    rate_hz: float | None
    ci_hz: tuple
    excess: float
    window_counts: int
    background: float
    upper_bound_hz: float | None = None
    confidence: float = 0.95

    @property
    def is_upper_bound(self) -> bool:
        return self.rate_hz is None


def invert_rate(h: CoincidenceHistogram, eta_arm: float, split: float = 0.5, peak_bin: int | None = None,
                halfwidth: int = 1, background_per_bin=None, confidence: float = 0.95,
                background_std: float = 0.0) -> RateEstimate:
    """Generated pair rate from the excess counts in ``peak_bin +- halfwidth``.

    ``background_per_bin`` is a scalar or an array over the window bins; by default
    the median of the bins outside the window. The interval is the exact
    (Garwood) Poisson interval on the window counts, shifted by the background;
    ``background_std`` (uncertainty of the summed background) widens both sides in
    quadrature. A non-positive excess yields only an upper bound.
    """
    if not (eta_arm > 0 and 0 < split < 1):
        raise ValueError("losses must be positive: eta_arm > 0 and 0 < split < 1")
    if h.duration_s <= 0:
        raise ValueError("histogram duration must be positive")
    counts = h.counts
    if peak_bin is None:
        peak_bin = int(np.argmax(counts))
    lo, hi = max(0, peak_bin - halfwidth), min(counts.size - 1, peak_bin + halfwidth)
    n = int(counts[lo : hi + 1].sum())
    if background_per_bin is None:
        mask = _exclude_mask(counts.size, (lo, hi))
        background_per_bin = float(np.median(counts[~mask])) if (~mask).any() else 0.0
    bg = float(np.sum(np.broadcast_to(np.asarray(background_per_bin, dtype=float), (hi - lo + 1,))))
    eff = eta_arm**2 * 2.0 * split * (1.0 - split) * h.duration_s
    alpha = 1.0 - confidence
    n_lo = 0.0 if n == 0 else 0.5 * stats.chi2.ppf(alpha / 2.0, 2 * n)
    n_hi = 0.5 * stats.chi2.ppf(1.0 - alpha / 2.0, 2 * n + 2)
    excess = n - bg
    zb = stats.norm.ppf(1.0 - alpha / 2.0) * background_std
    if excess <= 0:
        n_ub = 0.5 * stats.chi2.ppf(confidence, 2 * n + 2)
        ub = max(n + np.hypot(n_ub - n, zb) - bg, 0.0) / eff
        return RateEstimate(None, (0.0, ub), excess, n, bg, ub, confidence)
    lo_c = excess - np.hypot(n - n_lo, zb)
    hi_c = excess + np.hypot(n_hi - n, zb)
    ci = (max(lo_c, 0.0) / eff, hi_c / eff)
    return RateEstimate(excess / eff, ci, excess, n, bg, None, confidence)


def analyze(h: CoincidenceHistogram, eta_arm: float, split: float = 0.5, fit_pedestal: bool = True) -> dict:
    """Full analysis record: g2 peak, significance, pedestal fit and inverted rate.

    With a pedestal fit the local background under the pair peak is the fitted
    Gaussian plus baseline; otherwise the median of off-peak bins.
    """
    total = int(h.counts.sum())
    report = {"total_counts": total, "n1": h.n1, "n2": h.n2, "duration_s": h.duration_s,
              "bin_ps": h.bin_ps, "bins": h.bins}
    if total == 0:
        report.update({"peak_bin": None, "g2_peak": None, "z": 0.0, "p_value": 1.0, "inverted_rate_hz": None,
                       "ci": [0.0, 0.0], "upper_bound_hz": None, "thermal_fit": None})
        return report
    peak_bin = int(np.argmax(h.counts))
    bg = None
    thermal = None
    if fit_pedestal:
        try:
            thermal = fit_thermal(h, (peak_bin - 1, peak_bin + 1))
        except FitError:
            thermal = None
    window = np.arange(max(0, peak_bin - 1), min(h.bins, peak_bin + 2))
    bg_std = 0.0
    if thermal is not None:
        bg = thermal.model(h.centers_ps[window])
        bg_std = thermal.sum_std(h.centers_ps[window])
        mu = float(thermal.model(h.centers_ps[peak_bin]))
    else:
        mu = None
    z, p, _, mu_used = peak_significance(h, (peak_bin - 1, peak_bin + 1), background=mu)
    est = invert_rate(h, eta_arm, split, peak_bin, 1, bg, background_std=bg_std)
    try:
        g = g2(h)
        g_peak = float(g[peak_bin])
    except ValueError:
        g_peak = None
    report.update({
        "peak_bin": peak_bin,
        "peak_delay_ps": float(h.edges_ps[peak_bin]),
        "peak_counts": int(h.counts[peak_bin]),
        "g2_peak": g_peak,
        "z": z,
        "p_value": p,
        "background_per_bin": mu_used,
        "inverted_rate_hz": est.rate_hz,
        "ci": list(est.ci_hz),
        "upper_bound_hz": est.upper_bound_hz,
        "excess_counts": est.excess,
        "thermal_fit": None if thermal is None else {
            "center_ps": thermal.center_ps, "sigma_ps": thermal.sigma_ps, "fwhm_ps": thermal.fwhm_ps,
            "amplitude": thermal.amplitude, "baseline": thermal.baseline, "residual": thermal.residual},
    })
    return report


# -- file formats -------------------------------------------------------------------


def write_ttg(path, streams) -> None:
    """Binary time tags: b'TTG1' then little-endian (uint8 channel, uint64 ps) records in time order."""
    chans = [np.full(len(s), s.channel, dtype=np.uint8) for s in streams]
    times = [s.times.astype(np.uint64) for s in streams]
    ch = np.concatenate(chans) if chans else np.empty(0, np.uint8)
    t = np.concatenate(times) if times else np.empty(0, np.uint64)
    order = np.lexsort((ch, t))
    rec = np.empty(t.size, dtype=_RECORD)
    rec["channel"] = ch[order]
    rec["time_ps"] = t[order]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(rec.tobytes())


def _streams_from(ch, t, duration_s, offset_of):
    out = {}
    for c in np.unique(ch):
        sel = np.nonzero(ch == c)[0]
        tt = t[sel]
        bad = np.nonzero(np.diff(tt.astype(np.int64)) < 0)[0]
        if bad.size:
            raise ParseError(f"channel {int(c)} time tags decrease", offset=offset_of(int(sel[bad[0] + 1])))
        out[int(c)] = tt
    if duration_s is None:
        duration_s = (float(t.max()) + 1.0) * PS if t.size else 0.0
    return {c: TimeTagStream(c, tt.astype(np.int64), duration_s) for c, tt in out.items()}, duration_s


def read_ttg(path, duration_s: float | None = None):
    """Parse a TTG1 file into {channel: TimeTagStream}; faults raise ParseError with a byte offset."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ParseError("missing TTG1 magic", offset=0)
    body = data[4:]
    rem = len(body) % _RECORD.itemsize
    if rem:
        raise ParseError("truncated record", offset=4 + len(body) - rem)
    rec = np.frombuffer(body, dtype=_RECORD)
    if rec.size and rec["time_ps"].max() >= 2**63:
        i = int(np.argmax(rec["time_ps"] >= 2**63))
        raise ParseError("time tag exceeds the int64 range", offset=4 + i * _RECORD.itemsize)
    return _streams_from(rec["channel"], rec["time_ps"], duration_s, lambda i: 4 + i * _RECORD.itemsize)


def write_tags_csv(path, streams) -> None:
    rows = sorted((int(t), s.channel) for s in streams for t in s.times)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["channel", "time_ps"])
        for t, c in rows:
            w.writerow([c, t])


def read_tags_csv(path, duration_s: float | None = None):
    """Parse a ``channel,time_ps`` CSV; faults raise ParseError with the byte offset of the line.

    Lines starting with ``#`` are comments; the header may follow them.
    """
    raw = Path(path).read_bytes()
    ch, ts, offsets = [], [], []
    pos = 0
    for lineno, line in enumerate(raw.splitlines(keepends=True)):
        text = line.decode("ascii", errors="replace").strip()
        if text.startswith("#") or (not ch and text.replace(" ", "") == "channel,time_ps"):
            pos += len(line)
            continue
        if text:
            parts = text.split(",")
            try:
                if len(parts) != 2:
                    raise ValueError
                c, t = int(parts[0]), int(parts[1])
                if not (0 <= c < 256 and 0 <= t < 2**63):
                    raise ValueError
            except ValueError:
                raise ParseError(f"malformed time-tag line {lineno + 1}: {text!r}", offset=pos) from None
            ch.append(c)
            ts.append(t)
            offsets.append(pos)
        pos += len(line)
    ch_a = np.array(ch, dtype=np.uint8)
    t_a = np.array(ts, dtype=np.uint64)
    return _streams_from(ch_a, t_a, duration_s, lambda i: offsets[i])


def histogram_csv(h: CoincidenceHistogram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_index", "delay_ps", "counts"])
    for i, (d, c) in enumerate(zip(h.edges_ps, h.counts)):
        w.writerow([i, f"{d:.1f}", int(c)])
    return buf.getvalue()


def config_dict(config: ExperimentConfig) -> dict:
    return asdict(config)


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float)
