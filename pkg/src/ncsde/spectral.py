"""Time-series containers, Fourier frequency grids, and FFT periodograms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .validation import as_float_matrix, readonly

__all__ = [
    "TimeSeriesSet",
    "FrequencyGrid",
    "PeriodogramSet",
    "demean",
    "fourier_grid",
    "periodogram",
    "truncate_band",
    "read_time_series_csv",
    "write_matrix_csv",
]

MIN_LENGTH = 8


@dataclass(frozen=True)
class TimeSeriesSet:
    """A collection of equally long series, one column per series.

    ``values`` has shape (n, m): n observations in time by m series.
    ``sample_rate`` is carried as metadata only (Hz); all frequency grids in
    this package are in cycles per sample.
    """

    values: np.ndarray
    sample_rate: float | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = as_float_matrix(self.values, "time series values")
        if arr.shape[0] < MIN_LENGTH:
            raise ValueError(f"need at least {MIN_LENGTH} observations, got {arr.shape[0]}")
        if self.labels is not None and len(self.labels) != arr.shape[1]:
            raise ValueError("labels length does not match the number of series")
        object.__setattr__(self, "values", readonly(arr))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly positive sub-Nyquist Fourier frequencies j/n, in cycles."""

    omegas: np.ndarray
    source_n: int

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float).ravel()
        if om.size == 0:
            raise ValueError("empty frequency grid")
        if np.any(om <= 0) or np.any(om >= 0.5):
            raise ValueError("frequencies must lie strictly inside (0, 1/2)")
        if np.any(np.diff(om) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "omegas", readonly(om))

    def __len__(self) -> int:
        return self.omegas.size


@dataclass(frozen=True)
class PeriodogramSet:
    """Periodogram ordinates on a shared positive frequency grid.

    ``ordinates`` has shape (n_freq, m), column i holding the periodogram of
    series i evaluated on ``grid``.
    """

    ordinates: np.ndarray
    grid: FrequencyGrid
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = as_float_matrix(self.ordinates, "periodogram ordinates")
        if np.any(arr < 0):
            raise ValueError("periodogram ordinates must be non-negative")
        if arr.shape[0] != len(self.grid):
            raise ValueError(
                f"ordinates have {arr.shape[0]} rows but the grid has {len(self.grid)} frequencies"
            )
        object.__setattr__(self, "ordinates", readonly(arr))

    @property
    def n_freq(self) -> int:
        return self.ordinates.shape[0]

    @property
    def m(self) -> int:
        return self.ordinates.shape[1]


def demean(ts: TimeSeriesSet) -> TimeSeriesSet:
    """Subtract each column's sample mean."""
    centered = ts.values - ts.values.mean(axis=0, keepdims=True)
    return TimeSeriesSet(centered, sample_rate=ts.sample_rate, labels=ts.labels)


def fourier_grid(n: int) -> FrequencyGrid:
    """Positive sub-Nyquist Fourier frequencies j/n, j = 1 .. floor((n-1)/2).

    The zero frequency is excluded (the periodogram of demeaned data vanishes
    there) and so is the Nyquist point for even n; the negative half is
    redundant by evenness of the periodogram.
    """
    if n < MIN_LENGTH:
        raise ValueError(f"series length must be at least {MIN_LENGTH}, got {n}")
    j = np.arange(1, (n - 1) // 2 + 1)
    return FrequencyGrid(j / n, source_n=int(n))


def periodogram(ts: TimeSeriesSet) -> PeriodogramSet:
    """FFT periodogram of each series on the positive Fourier grid.

    Series are demeaned first. Ordinates are I(w_j) = |sum_t x_t e^{-2 pi i w_j t}|^2 / n,
    so Parseval holds with unit constant over the full DFT grid; that identity
    is verified internally before the positive half is returned.
    """
    ts = demean(ts)
    x = ts.values
    n = ts.n
    spec = np.fft.fft(x, axis=0)
    full = (spec.real**2 + spec.imag**2) / n
    energy = np.sum(x * x, axis=0)
    # Parseval over all n DFT ordinates; guards against FFT misuse upstream.
    tot = full.sum(axis=0)
    scale = np.maximum(energy, 1e-300)
    if np.any(np.abs(tot - energy) > 1e-10 * scale + 1e-12):
        raise AssertionError("internal Parseval check failed")
    grid = fourier_grid(n)
    keep = full[1 : len(grid) + 1, :]
    return PeriodogramSet(keep, grid, labels=ts.labels)


def truncate_band(ps: PeriodogramSet, keep: int) -> PeriodogramSet:
    """Keep only the first ``keep`` (lowest) frequencies of a periodogram set."""
    if keep < 1:
        raise ValueError("must keep at least one frequency")
    if keep > ps.n_freq:
        raise ValueError(f"cannot keep {keep} rows of a {ps.n_freq}-row periodogram")
    grid = FrequencyGrid(ps.grid.omegas[:keep], source_n=ps.grid.source_n)
    return PeriodogramSet(ps.ordinates[:keep, :], grid, labels=ps.labels)


class CsvFormatError(ValueError):
    """Raised on malformed input CSV; carries a 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


def read_time_series_csv(source) -> TimeSeriesSet:
    """Read a time-series CSV: header row of labels, one column per series.

    ``source`` may be a path or an open text file. No index column; every cell
    must parse as a float, and missing cells are errors.
    """
    if hasattr(source, "read"):
        return _read_csv_stream(source)
    with open(source, "r", newline="") as fh:
        return _read_csv_stream(fh)


def _read_csv_stream(fh) -> TimeSeriesSet:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError("empty file", line=1) from None
    labels = tuple(name.strip() for name in header)
    if len(labels) == 0 or all(not lab for lab in labels):
        raise CsvFormatError("header row has no column labels", line=1)
    m = len(labels)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != m:
            raise CsvFormatError(f"expected {m} cells, found {len(row)}", line=lineno)
        parsed = []
        for col, cell in enumerate(row):
            text = cell.strip()
            if not text:
                raise CsvFormatError(f"missing value in column '{labels[col]}'", line=lineno)
            try:
                parsed.append(float(text))
            except ValueError:
                raise CsvFormatError(
                    f"cannot parse '{text}' in column '{labels[col]}'", line=lineno
                ) from None
        rows.append(parsed)
    if len(rows) < MIN_LENGTH:
        raise CsvFormatError(f"need at least {MIN_LENGTH} data rows, found {len(rows)}")
    return TimeSeriesSet(np.array(rows, dtype=float), labels=labels)


def write_matrix_csv(path, matrix, header=None):
    """Write a matrix as CSV with 17 significant digits (lossless round-trip)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(list(header))
        for row in matrix:
            writer.writerow([format(v, ".17g") for v in row])


def format_matrix_csv(matrix, header=None) -> str:
    """Like :func:`write_matrix_csv` but returning the CSV text."""
    buf = io.StringIO()
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    writer = csv.writer(buf)
    if header is not None:
        writer.writerow(list(header))
    for row in matrix:
        writer.writerow([format(v, ".17g") for v in row])
    return buf.getvalue()
