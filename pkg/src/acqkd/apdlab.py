"""Single-photon APD characterization: the K figure of merit, NEP and sweep reports.

K = (S/D) * QE = 1e3 * QE**2 / D, with QE in percent and D the dark count
rate per second at 1 MHz gating. S = 1e3 * QE is the signal rate at 0.1
photon/pulse. K scales as 1 / NEP**2 at fixed wavelength.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass

from .errors import InfiniteMerit, InvalidInput, InvalidParameter

PLANCK = 6.62607015e-34
LIGHT_SPEED = 299_792_458.0
DEFAULT_WAVELENGTH = 1.31e-6

SWEEP_HEADER = ("device_id", "temperature_K", "dc_bias_V", "qe_percent", "dark_per_s")
REPORT_HEADER = ("device_id", "k_max", "t_max_K", "bias_at_max_V", "nep_at_max_W_per_rtHz")


@dataclass(frozen=True)
class DeviceSweepRow:
    device_id: str
    temperature: float
    dc_bias: float | None
    qe_percent: float
    dark_rate: float

    def __post_init__(self):
        if not 0 <= self.qe_percent <= 100:
            raise InvalidParameter(f"qe_percent must be in [0, 100], got {self.qe_percent}")
        if not self.dark_rate >= 0:
            raise InvalidParameter(f"dark_rate must be >= 0, got {self.dark_rate}")
        if not self.temperature > 0:
            raise InvalidParameter(f"temperature must be > 0, got {self.temperature}")


@dataclass(frozen=True)
class DeviceReport:
    device_id: str
    k_max: float
    t_max: float
    bias_at_max: float | None
    nep_at_max: float


@dataclass
class SweepAnalysis:
    reports: list
    k_vs_bias: dict  # (device_id, temperature) -> [(bias, K), ...] sorted by bias
    kmax_vs_t: dict  # device_id -> [(temperature, max K), ...] sorted by temperature
    unbounded: list  # rows with zero dark rate, excluded


def compute_k(qe_percent, dark_rate):
    if dark_rate < 0:
        raise InvalidParameter("dark_rate must be >= 0")
    if qe_percent == 0:
        return 0.0
    if dark_rate == 0:
        raise InfiniteMerit("K is unbounded at zero dark rate")
    return 1.0e3 * qe_percent ** 2 / dark_rate


def compute_nep(qe_fraction, dark_rate, wavelength=DEFAULT_WAVELENGTH):
    """Noise equivalent power in W/sqrt(Hz): (h*nu / QE) * sqrt(2 D)."""
    if not qe_fraction > 0:
        raise InvalidParameter("qe_fraction must be > 0 for NEP")
    if dark_rate < 0 or not wavelength > 0:
        raise InvalidParameter("dark_rate must be >= 0 and wavelength > 0")
    photon = PLANCK * LIGHT_SPEED / wavelength
    return photon / qe_fraction * math.sqrt(2.0 * dark_rate)


def _key(x):
    return (x is None, x if x is not None else 0.0)


def analyze_sweeps(rows, wavelength=DEFAULT_WAVELENGTH) -> SweepAnalysis:
    """Per-device maximum K and the K-vs-bias / max-K-vs-T curve tables.

    Ties in K are resolved by (temperature, bias) so the result does not
    depend on row order.
    """
    by_dev = defaultdict(list)
    unbounded = []
    for r in rows:
        try:
            k = compute_k(r.qe_percent, r.dark_rate)
        except InfiniteMerit:
            unbounded.append(r)
            continue
        by_dev[r.device_id].append((k, r))

    reports, k_vs_bias, kmax_vs_t = [], {}, {}
    for dev in sorted(by_dev):
        entries = by_dev[dev]
        k, best = max(entries, key=lambda e: (e[0], -e[1].temperature, _neg_bias(e[1].dc_bias)))
        nep = compute_nep(best.qe_percent / 100.0, best.dark_rate, wavelength) if best.qe_percent > 0 else math.inf
        reports.append(DeviceReport(dev, k, best.temperature, best.dc_bias, nep))

        per_t = defaultdict(list)
        for kk, r in entries:
            per_t[r.temperature].append((r.dc_bias, kk))
        for temp, pts in per_t.items():
            k_vs_bias[(dev, temp)] = sorted(pts, key=lambda p: (_key(p[0]), p[1]))
        kmax_vs_t[dev] = sorted((temp, max(kk for _, kk in pts)) for temp, pts in per_t.items())
    return SweepAnalysis(reports, k_vs_bias, kmax_vs_t, unbounded)


def _neg_bias(b):
    return -b if b is not None else -math.inf


def _float_or_none(s):
    s = s.strip()
    if s == "" or s.upper() == "NA":
        return None
    return float(s)


def read_sweep_csv(fh):
    """Parse sweep rows. Returns ``(rows, rejects)``; rejects are ``(line, message)``."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        return [], []
    if tuple(h.strip() for h in header) != SWEEP_HEADER:
        raise InvalidInput(f"expected header {','.join(SWEEP_HEADER)}, got {header!r}")
    rows, rejects = [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        try:
            if len(rec) != 5:
                raise ValueError(f"expected 5 fields, got {len(rec)}")
            rows.append(DeviceSweepRow(
                rec[0].strip(), float(rec[1]), _float_or_none(rec[2]), float(rec[3]), float(rec[4])
            ))
        except (ValueError, InvalidParameter) as exc:
            rejects.append((lineno, str(exc)))
    return rows, rejects


def report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in reports:
        w.writerow([r.device_id, f"{r.k_max:.6g}", f"{r.t_max:g}",
                    "NA" if r.bias_at_max is None else f"{r.bias_at_max:g}", f"{r.nep_at_max:.4e}"])
    return buf.getvalue()


def report_table(reports) -> str:
    """Aligned text table with the columns of the device summary."""
    cols = ("#", "K_max", "T_max(K)", "V_B(V)", "NEP(W/Hz^1/2)")
    body = [
        (r.device_id, f"{r.k_max:.0f}", f"{r.t_max:g}",
         "NA" if r.bias_at_max is None else f"{r.bias_at_max:g}", f"{r.nep_at_max:.2e}")
        for r in reports
    ]
    widths = [max(len(c), *(len(row[i]) for row in body)) if body else len(c) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in body]
    return "\n".join(lines) + "\n"


def load_table1_fixture():
    """Synthetic sweep rows consistent with the published per-device maxima."""
    from importlib.resources import files

    text = files("acqkd").joinpath("data/apd_sweeps_synthetic.csv").read_text()
    rows, rejects = read_sweep_csv(io.StringIO(text))
    assert not rejects, rejects
    return rows
