"""Leak estimators and secure-rate bounds for weak-pulse BB84."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DegenerateConfiguration, InvalidParameter

BB84 = "BB84"
LUTKENHAUS = "Lutkenhaus"
GILBERT_HAMRICK = "GilbertHamrick"


@dataclass(frozen=True)
class LeakEstimate:
    """Fraction of the key potentially known to an eavesdropper.

    ``bits`` is ``fraction * n`` where ``n`` is the count the fraction was
    applied to. A fraction >= 1 means no secure key can be extracted.
    """

    estimator: str
    fraction: float
    n: int
    inputs: dict = field(default_factory=dict)

    @property
    def bits(self):
        return self.fraction * self.n

    @property
    def secure_possible(self):
        return self.fraction < 1.0


@dataclass(frozen=True)
class LutkenhausBound:
    mu_opt: float
    gain_per_pulse: float
    secure_rate: float


def _check_ber(b):
    if not 0 <= b <= 0.5:
        raise InvalidParameter(f"BER must be in [0, 0.5], got {b}")


def _check_fraction(name, x, allow_zero=False):
    ok = 0 <= x <= 1 if allow_zero else 0 < x <= 1
    if not ok:
        raise InvalidParameter(f"{name} must be in {'[0' if allow_zero else '(0'}, 1], got {x}")


def bb84_leak(ber, mu, n_samples=None, n_pulses=None, n=0):
    """Beam-splitting plus intercept-resend estimate ``2B + mu + 5v``.

    ``v`` is the standard error of the plug-in estimate of ``2B + mu``:
    binomial variance of the BER over ``n_samples`` sifted bits and a
    Poisson-counting variance ``mu / n_pulses`` for the mean photon number.
    With ``n_samples=None`` the analytic value (v = 0) is returned.
    """
    _check_ber(ber)
    if mu < 0:
        raise InvalidParameter(f"mu must be >= 0, got {mu}")
    v = 0.0
    if n_samples:
        var = 4.0 * ber * (1.0 - ber) / n_samples
        if n_pulses:
            var += mu / n_pulses
        v = math.sqrt(var)
    frac = max(0.0, 2.0 * ber + mu + 5.0 * v)
    return LeakEstimate(BB84, frac, n, {"B": ber, "mu": mu, "v": v,
                                        "n_samples": n_samples, "n_pulses": n_pulses})


def lutkenhaus_bound(eta_b, eta_t, pulse_rate=1.0e6) -> LutkenhausBound:
    """Optimum-mu secure rate when every multiphoton pulse is granted to Eve.

    Dark counts and error correction are neglected.
    """
    _check_fraction("eta_b", eta_b)
    _check_fraction("eta_t", eta_t)
    if not pulse_rate > 0:
        raise InvalidParameter("pulse_rate must be > 0")
    eta = eta_b * eta_t
    gain = eta * eta / 4.0
    return LutkenhausBound(eta, gain, gain * pulse_rate)


def multiphoton_probability(mu):
    """Poisson probability of two or more photons in a pulse."""
    return -math.expm1(-mu) - mu * math.exp(-mu)


def _p_det(mu, eta_b, eta_t):
    p = -math.expm1(-mu * eta_t * eta_b)
    if p <= 0:
        raise DegenerateConfiguration("Bob's detection probability is zero")
    return p


def lutkenhaus_leak(mu, eta_b, eta_t, ber, n=0):
    """Leak fraction charging one bit per *transmitted* multiphoton pulse.

    ``p_multi / p_det + 2B``; used as the pessimistic sweep estimator.
    """
    _check_ber(ber)
    _check_fraction("eta_b", eta_b)
    _check_fraction("eta_t", eta_t)
    pm = multiphoton_probability(mu)
    frac = pm / _p_det(mu, eta_b, eta_t) + 2.0 * ber
    return LeakEstimate(LUTKENHAUS, max(0.0, frac), n,
                        {"B": ber, "mu": mu, "eta_b": eta_b, "eta_t": eta_t})


def gilbert_hamrick_leak(mu, eta_b, eta_t, ber, n=0):
    """Approximate two-photon-splitting leak.

    Only multiphoton pulses whose remaining photon Bob actually detects
    count, so the transmitted-multiphoton charge is scaled by Bob's detector
    efficiency: ``p_multi * eta_b / p_det + 2B``.
    """
    _check_ber(ber)
    _check_fraction("eta_b", eta_b)
    _check_fraction("eta_t", eta_t)
    if mu < 0:
        raise InvalidParameter(f"mu must be >= 0, got {mu}")
    pm = multiphoton_probability(mu)
    frac = pm * eta_b / _p_det(mu, eta_b, eta_t) + 2.0 * ber
    return LeakEstimate(GILBERT_HAMRICK, max(0.0, frac), n,
                        {"B": ber, "mu": mu, "eta_b": eta_b, "eta_t": eta_t})
