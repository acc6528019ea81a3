"""Market data plumbing: profile CSVs, resampling, synthetic days, weights files.

Price series are piecewise-constant over 5-minute market intervals; the
regulation signal arrives at 2-second cadence. Both are aligned onto a single
stepped timeline by :func:`load_profile`. Trained network parameters persist
in a small self-describing binary format with bit-exact round trips.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from battrl.dqn import QNetworkParams

PRICE_CADENCE_S = 300.0
FR_CADENCE_S = 2.0

_WEIGHTS_MAGIC = b"BQNW"
_WEIGHTS_VERSION = 1


class WeightsFormatError(Exception):
    """Base class for weights-file problems."""


class WeightsVersionError(WeightsFormatError):
    """Bad magic bytes or unsupported format version."""


class WeightsShapeError(WeightsFormatError):
    """Stored layer sizes conflict with themselves or the expected network."""


class WeightsTruncatedError(WeightsFormatError):
    """File ends before (or after) the payload the header promises."""


@dataclass(frozen=True)
class MarketProfile:
    """Per-step price ($/MWh) and normalized FR signal on a fixed time step."""

    prices: np.ndarray
    fr_signal: np.ndarray
    dt_seconds: float
    profile_id: str = ""

    def __post_init__(self) -> None:
        prices = np.ascontiguousarray(self.prices, dtype=np.float64)
        fr = np.ascontiguousarray(self.fr_signal, dtype=np.float64)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "fr_signal", fr)
        if prices.ndim != 1 or fr.ndim != 1 or prices.size != fr.size or prices.size == 0:
            raise ValueError("price and FR series must be non-empty and equally long")
        if not (np.all(np.isfinite(prices)) and np.all(np.isfinite(fr))):
            raise ValueError("profile contains non-finite values")
        if fr.min() < -1.0 or fr.max() > 1.0:
            raise ValueError("FR signal must lie in [-1, 1]")
        if self.dt_seconds <= 0.0:
            raise ValueError("dt_seconds must be positive")

    def __len__(self) -> int:
        return int(self.prices.size)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic day.

    The price is a smooth daily shape (trough at midnight, peak at midday)
    plus first-order autoregressive noise, drawn per 5-minute interval. The
    FR signal is independent clipped Gaussian noise per output step.
    """

    seed: int = 0
    day_seconds: float = 86_400.0
    dt_seconds: float = 2.0
    price_mean: float = 40.0
    price_amplitude: float = 15.0
    price_ar_coeff: float = 0.7
    price_noise_scale: float = 3.0
    fr_noise_scale: float = 0.35

    def __post_init__(self) -> None:
        if self.day_seconds <= 0 or self.dt_seconds <= 0:
            raise ValueError("day_seconds and dt_seconds must be positive")
        if self.day_seconds < self.dt_seconds:
            raise ValueError("day shorter than one step")
        if not 0.0 <= self.price_ar_coeff < 1.0:
            raise ValueError("autoregressive coefficient must lie in [0, 1)")
        if self.price_noise_scale < 0.0 or self.fr_noise_scale < 0.0:
            raise ValueError("noise scales must be nonnegative")


def _read_timeseries_csv(path: str | Path, cadence_s: float) -> np.ndarray:
    """Read a ``unix_epoch_seconds,value`` CSV with a one-line header.

    Timestamps must be strictly increasing at the expected cadence; values
    must be finite. Returns the value column.
    """
    times: list[float] = []
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if lineno == 1:
                try:
                    float(row[0])
                except (ValueError, IndexError):
                    continue  # header line, as required
                raise ValueError(f"{path}: line 1: expected a one-line header")
            if len(row) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 'timestamp,value'")
            try:
                t = float(row[0])
                v = float(row[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ValueError(f"{path}: line {lineno}: non-finite entry")
            if times:
                if t <= times[-1]:
                    raise ValueError(f"{path}: line {lineno}: timestamps must strictly increase")
                if t - times[-1] != cadence_s:
                    raise ValueError(
                        f"{path}: line {lineno}: cadence mismatch "
                        f"(expected {cadence_s} s, got {t - times[-1]} s)"
                    )
            times.append(t)
            values.append(v)
    if not values:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(values, dtype=np.float64)


def resample_fr(series: np.ndarray, window: int = 5) -> np.ndarray:
    """Mean over consecutive non-overlapping windows; trailing partial dropped."""
    arr = np.ascontiguousarray(series, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot resample an empty series")
    if window < 1 or window != int(window):
        raise ValueError("window must be a positive integer")
    m = arr.size // window
    return arr[: m * window].reshape(m, window).mean(axis=1)


def load_profile(
    price_csv: str | Path,
    fr_csv: str | Path,
    target_dt: float,
    profile_id: str | None = None,
) -> MarketProfile:
    """Align a 5-minute price CSV and a 2-second FR CSV onto one step grid.

    The price is forward-filled (constant within each market interval); the FR
    signal is averaged over ``target_dt``-sized windows when the target step
    is coarser than its native cadence.
    """
    prices = _read_timeseries_csv(price_csv, PRICE_CADENCE_S)
    fr = _read_timeseries_csv(fr_csv, FR_CADENCE_S)
    if target_dt <= 0:
        raise ValueError("target_dt must be positive")
    window = target_dt / FR_CADENCE_S
    if window != int(window) or int(window) < 1:
        raise ValueError(f"target_dt must be a multiple of {FR_CADENCE_S} s, got {target_dt}")
    window = int(window)
    span = min(prices.size * PRICE_CADENCE_S, fr.size * FR_CADENCE_S)
    n = int(span // target_dt)
    if n < 1:
        raise ValueError("profiles too short for the target step")
    fr_steps = fr[: n * window] if window == 1 else resample_fr(fr, window)[:n]
    if fr_steps.size < n:
        raise ValueError("FR series too short for the target step grid")
    idx = (np.arange(n) * target_dt // PRICE_CADENCE_S).astype(np.intp)
    price_steps = prices[idx]
    if profile_id is None:
        profile_id = Path(price_csv).stem
    return MarketProfile(price_steps, fr_steps, float(target_dt), profile_id)


def load_price_series(price_csv: str | Path, target_dt: float) -> np.ndarray:
    """Forward-fill a 5-minute price CSV onto a ``target_dt`` step grid."""
    prices = _read_timeseries_csv(price_csv, PRICE_CADENCE_S)
    if target_dt <= 0:
        raise ValueError("target_dt must be positive")
    n = int(prices.size * PRICE_CADENCE_S // target_dt)
    if n < 1:
        raise ValueError("price series too short for the target step")
    idx = np.minimum(
        (np.arange(n) * target_dt // PRICE_CADENCE_S).astype(np.intp), prices.size - 1
    )
    return prices[idx]


def _daily_shape(hours: np.ndarray) -> np.ndarray:
    """Zero-mean daily pattern: trough at midnight, peak at midday."""
    return -np.cos(2.0 * np.pi * hours / 24.0)


def synth_price_intervals(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Per-5-minute-interval prices: daily shape plus AR(1) noise."""
    n_intervals = max(int(spec.day_seconds // PRICE_CADENCE_S), 1)
    mid_hours = (np.arange(n_intervals) * PRICE_CADENCE_S + PRICE_CADENCE_S / 2.0) / 3600.0
    base = spec.price_mean + spec.price_amplitude * _daily_shape(mid_hours)
    noise = np.empty(n_intervals)
    x = 0.0
    shocks = rng.standard_normal(n_intervals)
    for i in range(n_intervals):
        x = spec.price_ar_coeff * x + spec.price_noise_scale * shocks[i]
        noise[i] = x
    return base + noise


def synth_profile(spec: SyntheticSpec) -> MarketProfile:
    """Deterministic synthetic day at the spec's own step size."""
    rng = np.random.default_rng(spec.seed)
    intervals = synth_price_intervals(spec, rng)
    n = int(spec.day_seconds // spec.dt_seconds)
    idx = np.minimum(
        (np.arange(n) * spec.dt_seconds // PRICE_CADENCE_S).astype(np.intp),
        intervals.size - 1,
    )
    prices = intervals[idx]
    fr = np.clip(rng.standard_normal(n) * spec.fr_noise_scale, -1.0, 1.0)
    return MarketProfile(prices, fr, float(spec.dt_seconds), f"synth-{spec.seed}")


def write_profile_csvs(profile_2s: MarketProfile, price_path: str | Path, fr_path: str | Path, epoch0: int = 0) -> None:
    """Write a 2-second profile out in the canonical CSV schemas."""
    if profile_2s.dt_seconds != FR_CADENCE_S:
        raise ValueError("canonical CSVs are written from a 2-second profile")
    stride = int(PRICE_CADENCE_S // FR_CADENCE_S)
    with open(price_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unix_epoch_seconds", "price_usd_per_mwh"])
        for i, p in enumerate(profile_2s.prices[::stride]):
            writer.writerow([epoch0 + int(i * PRICE_CADENCE_S), repr(float(p))])
    with open(fr_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unix_epoch_seconds", "fr_normalized"])
        for i, f in enumerate(profile_2s.fr_signal):
            writer.writerow([epoch0 + int(i * FR_CADENCE_S), repr(float(f))])


def save_weights(params: QNetworkParams, path: str | Path) -> None:
    """Persist network parameters: magic, version, layer sizes, row-major f64."""
    sizes = params.layer_sizes()
    with open(path, "wb") as fh:
        fh.write(_WEIGHTS_MAGIC)
        fh.write(struct.pack("<II", _WEIGHTS_VERSION, len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_weights(path: str | Path, expected_sizes: tuple[int, ...] | None = None) -> QNetworkParams:
    """Load parameters saved by :func:`save_weights`, bit-exactly.

    ``expected_sizes`` (input, hidden..., output) is checked against the file
    when given.
    """
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise WeightsTruncatedError(f"{path}: too short for a weights header")
    if blob[:4] != _WEIGHTS_MAGIC:
        raise WeightsVersionError(f"{path}: not a weights file (bad magic)")
    version, n_sizes = struct.unpack_from("<II", blob, 4)
    if version != _WEIGHTS_VERSION:
        raise WeightsVersionError(f"{path}: unsupported version {version}")
    if n_sizes < 2:
        raise WeightsShapeError(f"{path}: needs at least input and output sizes")
    offset = 12
    if len(blob) < offset + 4 * n_sizes:
        raise WeightsTruncatedError(f"{path}: header cut short")
    sizes = struct.unpack_from(f"<{n_sizes}I", blob, offset)
    offset += 4 * n_sizes
    if any(s < 1 for s in sizes):
        raise WeightsShapeError(f"{path}: nonpositive layer size in {sizes}")
    if expected_sizes is not None and tuple(sizes) != tuple(expected_sizes):
        raise WeightsShapeError(
            f"{path}: stored layer sizes {tuple(sizes)} do not match expected {tuple(expected_sizes)}"
        )
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        need = 8 * (fan_in * fan_out + fan_out)
        if len(blob) < offset + need:
            raise WeightsTruncatedError(f"{path}: payload cut short")
        w = np.frombuffer(blob, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.reshape(fan_out, fan_in).copy())
        biases.append(b.copy())
    if offset != len(blob):
        raise WeightsTruncatedError(f"{path}: {len(blob) - offset} trailing bytes")
    return QNetworkParams(tuple(weights), tuple(biases))


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Parse a line-based ``key=value`` UTF-8 config file.

    Blank lines and ``#`` comments are ignored. Values stay strings; the CLI
    converts them with the same types as the flags they override.
    """
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
