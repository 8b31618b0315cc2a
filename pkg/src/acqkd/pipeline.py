"""One full key-generation run in a single process and the mu sweep built on it."""

from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .errors import DegenerateConfiguration, EmptyKey, InvalidParameter, QKDError, SessionAborted
from .linkmodel import ChannelParams, DetectorParams, preset
from .protocol import (
    DEFAULT_ROWS,
    KeyBuffer,
    ReconcileConfig,
    privacy_amplify,
    reconcile,
    sift,
    verify_keys,
)
from .rng import derive
from .security import bb84_leak, gilbert_hamrick_leak, lutkenhaus_leak
from .simengine import run_session

ESTIMATORS = ("bb84", "lutkenhaus", "gh")
SWEEP_COLUMNS = (
    "mu", "raw_rate", "sifted_rate", "ber", "corrected_rate", "pa_rate",
    "ec_cost_fraction", "leak_fraction", "status",
)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a sweep.

    ``channel`` holds the link with ``mu`` ignored (each sweep point sets it).
    """

    channel: ChannelParams = field(default_factory=ChannelParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    mu_list: tuple = (0.3,)
    n_pulses: int = 1_000_000
    estimator: str = "bb84"
    row_lengths: tuple = DEFAULT_ROWS
    subset_stop_rounds: int = 20
    n_checks: int = 50
    safety: int = 30
    seed: int = 1
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mu_list", tuple(float(m) for m in self.mu_list))
        object.__setattr__(self, "row_lengths", tuple(int(k) for k in self.row_lengths))
        if self.estimator not in ESTIMATORS:
            raise InvalidParameter(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if not self.mu_list or any(m < 0 for m in self.mu_list):
            raise InvalidParameter("mu list must be non-empty and non-negative")
        if self.n_pulses < 1:
            raise InvalidParameter("n_pulses must be >= 1")
        if self.safety < 0:
            raise InvalidParameter("safety must be >= 0")
        if not 0 <= self.n_checks <= 255:
            raise InvalidParameter("n_checks must be in [0, 255]")
        if self.workers < 1:
            raise InvalidParameter("workers must be >= 1")
        ReconcileConfig(self.row_lengths, self.subset_stop_rounds)
        self.link(self.mu_list[0])

    @classmethod
    def from_preset(cls, name, **kw):
        ch, det = preset(name)
        if name == "20km":
            kw.setdefault("row_lengths", (12, 18, 27))
        return cls(channel=ch, detector=det, **kw)

    def link(self, mu):
        return replace(self.channel, mu=mu), self.detector


@dataclass
class PointResult:
    mu: float
    duration: float
    n_pulses: int
    clicks: int = 0
    sifted: int = 0
    sifted_errors: int = 0
    errors_corrected: int = 0
    corrected: int = 0
    final: int = 0
    leak_fraction: float = float("nan")
    status: str = "ok"

    def row(self):
        d = self.duration
        s = self.sifted
        return {
            "mu": self.mu,
            "raw_rate": self.clicks / d,
            "sifted_rate": s / d,
            "ber": self.sifted_errors / s if s else 0.0,
            "corrected_rate": self.corrected / d,
            "pa_rate": self.final / d,
            "ec_cost_fraction": (s - self.corrected) / s if s else 0.0,
            "leak_fraction": self.leak_fraction,
            "status": self.status,
        }


def estimate_leak(estimator, ch: ChannelParams, det: DetectorParams, ber, n_sifted, n_key, n_pulses):
    """Leak estimate for a run.

    The BB84 fraction is quoted per raw (sifted) bit and is charged against
    ``n_sifted``; the multiphoton estimators give the fraction of the
    surviving key Eve may hold and are charged against ``n_key``.
    """
    ber = min(ber, 0.5)
    if estimator == "bb84":
        return bb84_leak(ber, ch.mu, n_samples=n_sifted, n_pulses=n_pulses, n=n_sifted)
    if estimator == "gh":
        return gilbert_hamrick_leak(ch.mu, det.eta_b, ch.eta_t, ber, n_key)
    if estimator == "lutkenhaus":
        return lutkenhaus_leak(ch.mu, det.eta_b, ch.eta_t, ber, n_key)
    raise InvalidParameter(f"unknown estimator {estimator!r}")


def point_seed(seed, mu):
    return derive(seed, round(mu * 1_000_000))


def run_point(cfg: RunConfig, mu: float) -> PointResult:
    """Simulate, sift, reconcile, verify and amplify at one ``mu``."""
    ch, det = cfg.link(mu)
    seed = point_seed(cfg.seed, mu)
    tr = run_session(ch, det, cfg.n_pulses, seed)
    res = PointResult(mu, tr.duration, cfg.n_pulses, clicks=tr.counts["clicks"])
    alice, bob, _ = sift(tr.alice_view(), tr.bob_view())
    res.sifted = len(alice)
    res.sifted_errors = int((alice.bits != bob.bits).sum())
    if res.sifted < 2:
        res.status = "empty-key"
        return res
    rc = ReconcileConfig(cfg.row_lengths, cfg.subset_stop_rounds, perm_seed=derive(seed, 1))
    try:
        _, _, stats = reconcile(alice, bob, rc)
        res.errors_corrected = stats.errors_corrected
        if not verify_keys(alice, bob, cfg.n_checks, derive(seed, 2)):
            res.status = "verify-failed"
            return res
        res.corrected = len(bob)
        leak = estimate_leak(cfg.estimator, ch, det, stats.errors_corrected / res.sifted,
                             res.sifted, res.corrected, cfg.n_pulses)
        res.leak_fraction = leak.fraction
        final_a = privacy_amplify(alice, leak.bits, cfg.safety, derive(seed, 3))
        final_b = privacy_amplify(bob, leak.bits, cfg.safety, derive(seed, 3))
        if not (final_a.bits == final_b.bits).all():
            res.status = "key-mismatch"
            return res
        res.final = len(final_b)
    except (EmptyKey, DegenerateConfiguration):
        # no detectable signal is the zero-key limit as well
        res.status = "empty-key"
    except SessionAborted as exc:
        res.status = str(exc).split(":")[0]
    except QKDError as exc:
        res.status = re.sub(r"(?<!^)(?=[A-Z])", "-", type(exc).__name__).lower()
    return res


def run_sweep(cfg: RunConfig):
    """Run every mu in ``cfg``; rows come back sorted by mu."""
    mus = sorted(set(cfg.mu_list))
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda m: run_point(cfg, m), mus))
    else:
        results = [run_point(cfg, m) for m in mus]
    return [r.row() for r in results]


def format_float(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(round(x, 10))
    return str(x)


def sweep_csv(rows) -> str:
    """Render sweep rows as CSV text (rates in bits/s, fractions in [0, 1])."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([format_float(r[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()
