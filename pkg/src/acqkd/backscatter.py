"""Frequency-shift backscatter suppression analytics.

Phase error from shifting the returning photons, the resulting misrouting,
a Lorentzian-plus-floor narrowband filter, multi-Lorentzian spectra and their
least-squares fit, and the duty factor of intermittent transmission.
The spectrum code works on any abscissa (frequency offset or wavelength).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError, InvalidParameter


@dataclass(frozen=True)
class ShiftConfig:
    delta_f: float  # Hz
    pmd: float  # s / sqrt(km)
    length_km: float

    def __post_init__(self):
        if self.delta_f < 0 or self.pmd < 0 or self.length_km < 0:
            raise InvalidParameter("delta_f, pmd and length_km must be >= 0")


@dataclass(frozen=True)
class Peak:
    amplitude: float
    center: float
    fwhm: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise InvalidParameter(f"peak amplitude must be >= 0, got {self.amplitude}")
        if not self.fwhm > 0:
            raise InvalidParameter(f"peak fwhm must be > 0, got {self.fwhm}")


@dataclass(frozen=True)
class LorentzianModel:
    peaks: tuple = ()
    background: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))

    def params(self):
        out = []
        for p in self.peaks:
            out += [p.amplitude, p.center, p.fwhm]
        return np.array(out + [self.background], dtype=float)

    @classmethod
    def from_params(cls, v):
        v = np.asarray(v, dtype=float)
        n = (len(v) - 1) // 3
        peaks = tuple(Peak(float(v[3 * i]), float(v[3 * i + 1]), float(v[3 * i + 2])) for i in range(n))
        return cls(peaks, float(v[-1]))


def shift_phase_error(cfg: ShiftConfig) -> float:
    """Round-trip differential phase (rad) from shifting by ``delta_f``:
    2*pi * delta_f * PMD * sqrt(L)."""
    return 2.0 * math.pi * cfg.delta_f * cfg.pmd * math.sqrt(cfg.length_km)


def misroute_fraction(delta_phi_s: float) -> float:
    """Fraction of misrouted photons, small-angle form ``delta_phi_s**2``."""
    if abs(delta_phi_s) > 0.5:
        warnings.warn("misroute_fraction uses the small-angle form; |phase| > 0.5 rad", stacklevel=2)
    return delta_phi_s * delta_phi_s


def _lorentz(x, amp, center, fwhm):
    hw2 = (fwhm / 2.0) ** 2
    return amp * hw2 / ((x - center) ** 2 + hw2)


def synth_spectrum(model: LorentzianModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.full_like(x, model.background)
    for p in model.peaks:
        y += _lorentz(x, p.amplitude, p.center, p.fwhm)
    return y


@dataclass(frozen=True)
class FilterModel:
    """Narrowband transmission filter: one Lorentzian on top of a constant floor."""

    peak: float | None = None
    fwhm: float | None = None
    floor: float | None = None

    @property
    def calibrated(self):
        return None not in (self.peak, self.fwhm, self.floor)


def calibrate_filter(on_peak=0.92, off_peak=0.07, offset=2.0e9, fwhm=1.0e9) -> FilterModel:
    """Choose the floor so that T(0) = ``on_peak`` and T(offset) = ``off_peak``."""
    shape = _lorentz(offset, 1.0, 0.0, fwhm)
    floor = (off_peak - on_peak * shape) / (1.0 - shape)
    if not 0 <= floor < on_peak:
        raise InvalidParameter("anchor values cannot be met by a Lorentzian-plus-floor filter")
    return FilterModel(on_peak, fwhm, floor)


DEFAULT_FILTER = calibrate_filter()


def filter_transmission(offset_hz, model: FilterModel = DEFAULT_FILTER):
    if not model.calibrated:
        raise InvalidParameter("filter model is not calibrated")
    return model.floor + (model.peak - model.floor) * _lorentz(np.asarray(offset_hz, dtype=float), 1.0, 0.0, model.fwhm)


def backscatter_suppression(model: FilterModel = DEFAULT_FILTER, shift_hz=2.0e9):
    """Unshifted-to-shifted transmission ratio T(shift) / T(0)."""
    return float(filter_transmission(shift_hz, model) / filter_transmission(0.0, model))


def duty_factor(link_km, delay_km):
    """Fraction of time signal is carried with a delay line: L_D / (L_T + L_D)."""
    if link_km < 0 or delay_km < 0:
        raise InvalidParameter("lengths must be >= 0")
    if link_km + delay_km == 0:
        raise InvalidParameter("duty factor undefined when both lengths are zero")
    if math.isinf(delay_km):
        return 1.0
    return delay_km / (link_km + delay_km)


@dataclass
class FitResult:
    model: LorentzianModel
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""
    covariance: np.ndarray | None = field(default=None, repr=False)


def fit_spectrum(x, y, n_peaks: int, initial: LorentzianModel | None = None,
                 max_iter: int = 500, rtol: float = 1e-9) -> FitResult:
    """Least-squares fit of ``n_peaks`` Lorentzians plus a flat background.

    Levenberg-Marquardt with relative cost tolerance ``rtol``; peaks in the
    result are ordered by center. A run that
    hits ``max_iter`` raises :class:`FitError` carrying the best-so-far
    result in ``exc.result``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidParameter("x and y must be 1-D arrays of equal length")
    if len(x) < 4 * n_peaks + 1:
        raise InvalidParameter(f"need at least {4 * n_peaks + 1} samples for {n_peaks} peaks")
    if n_peaks == 0:
        bg = float(y.mean())
        return FitResult(LorentzianModel((), bg), float(np.linalg.norm(y - bg)), True, 0)

    if initial is None:
        initial = _initial_guess(x, y, n_peaks)
    if len(initial.peaks) != n_peaks:
        raise InvalidParameter("initial guess has the wrong number of peaks")
    p0 = initial.params()

    def resid(v):
        return synth_spectrum(LorentzianModel.from_params(_clip(v)), x) - y

    res = least_squares(resid, p0, method="lm", ftol=rtol, xtol=rtol, gtol=1e-15,
                        max_nfev=max_iter * (len(p0) + 1))
    fitted = LorentzianModel.from_params(_clip(res.x))
    model = LorentzianModel(tuple(sorted(fitted.peaks, key=lambda p: p.center)), fitted.background)
    out = FitResult(model, float(np.linalg.norm(res.fun)), res.status > 0, int(res.nfev), res.message)
    if res.status == 0:
        err = FitError(f"fit did not converge: {res.message}")
        err.result = out
        raise err
    return out


def _clip(v):
    v = np.array(v, dtype=float)
    n = (len(v) - 1) // 3
    for i in range(n):
        v[3 * i] = abs(v[3 * i])
        v[3 * i + 2] = abs(v[3 * i + 2]) or 1e-300
    return v


def _initial_guess(x, y, n_peaks):
    """Greedy guess: take the tallest remaining sample, subtract its peak, repeat."""
    bg = float(np.percentile(y, 10))
    work = y - bg
    span = float(x.max() - x.min()) or 1.0
    peaks = []
    for _ in range(n_peaks):
        i = int(np.argmax(work))
        amp = max(float(work[i]), 0.0)
        half = work >= amp / 2
        j0 = i
        while j0 > 0 and half[j0 - 1]:
            j0 -= 1
        j1 = i
        while j1 < len(x) - 1 and half[j1 + 1]:
            j1 += 1
        fwhm = max(float(x[j1] - x[j0]), span / len(x))
        peaks.append(Peak(amp, float(x[i]), fwhm))
        work = work - _lorentz(x, amp, float(x[i]), fwhm)
    return LorentzianModel(tuple(peaks), bg)


def read_spectrum_csv(fh):
    """Two-column CSV (abscissa, counts_per_s); a non-numeric first row is a header."""
    xs, ys = [], []
    for lineno, rec in enumerate(csv.reader(fh), start=1):
        if not rec:
            continue
        try:
            xv, yv = float(rec[0]), float(rec[1])
        except (ValueError, IndexError):
            if lineno == 1:
                continue
            raise InvalidParameter(f"line {lineno}: expected two numbers") from None
        xs.append(xv)
        ys.append(yv)
    return np.array(xs), np.array(ys)


def write_spectrum_csv(x, y, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("abscissa", "counts_per_s"))
    for a, b in zip(x, y):
        w.writerow((repr(float(a)), repr(float(b))))


def fit_report(fit: FitResult) -> str:
    buf = io.StringIO()
    buf.write(f"converged: {fit.converged}\n")
    buf.write(f"evaluations: {fit.iterations}\n")
    buf.write(f"residual_norm: {fit.residual_norm:.6g}\n")
    buf.write(f"background: {fit.model.background:.6g}\n")
    buf.write(f"{'peak':>4}  {'amplitude':>12}  {'center':>14}  {'fwhm':>12}\n")
    for i, p in enumerate(fit.model.peaks, start=1):
        buf.write(f"{i:>4}  {p.amplitude:>12.6g}  {p.center:>14.8g}  {p.fwhm:>12.6g}\n")
    return buf.getvalue()
