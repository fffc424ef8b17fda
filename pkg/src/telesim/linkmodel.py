"""Analytic link noise model: SNR, rate and visibility versus attenuation.

The four-fold rate decomposes into a signal term proportional to the link
transmission and a floor set by sender-side three-folds completed by
receiver dark counts:

    rate(eta)       = p_bsm * eta * (1 + s2) + p_bsm * n * tau
    visibility(eta) = (v0 + v2 * s2) * p_bsm * eta / rate(eta)
    SNR             = eta / (n * tau)

p_bsm is the conditioned three-fold rate at the sender, n the receiver dark
rate, tau the coincidence window, v0 the intrinsic visibility and s2 a
dimensionless signal-side excess (higher-order emission) with its own
visibility v2.  Teleportation beats the classical strategy while the
visibility stays above 1/3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq, least_squares

from .errors import ValidationError


class ClassicalBounds:
    """Best classical teleportation: fidelity 2/3, visibility 1/3, exact."""

    F_CLASSICAL = Fraction(2, 3)
    V_CLASSICAL = 2 * Fraction(2, 3) - 1

    @classmethod
    def fidelity(cls) -> float:
        return float(cls.F_CLASSICAL)

    @classmethod
    def visibility(cls) -> float:
        return float(cls.V_CLASSICAL)


@dataclass(frozen=True)
class LinkBudget:
    """Inputs of the analytic model at one operating point."""

    attenuation_db: float
    n_hz: float
    tau_s: float
    p_bsm_hz: float
    v0: float
    s2_frac: float = 0.0
    v2: float = 0.0

    def __post_init__(self):
        if self.attenuation_db < 0.0:
            raise ValidationError("attenuation must be >= 0 dB")
        if self.n_hz < 0.0 or self.p_bsm_hz < 0.0 or self.tau_s < 0.0:
            raise ValidationError("rates and window must be non-negative")
        if not 0.0 <= self.v0 <= 1.0:
            raise ValidationError("v0 must lie in [0, 1]")
        if self.s2_frac < 0.0:
            raise ValidationError("s2_frac must be >= 0")

    @property
    def eta(self) -> float:
        return 10.0 ** (-self.attenuation_db / 10.0)

    def at(self, attenuation_db: float) -> "LinkBudget":
        return replace(self, attenuation_db=attenuation_db)


def snr(budget: LinkBudget) -> float:
    """eta / (n * tau); infinite (flagged by value) when noiseless."""
    denom = budget.n_hz * budget.tau_s
    if denom <= 0.0:
        return float("inf")
    return budget.eta / denom


# mean range of three standard normal draws (Hartley's d2 for n = 3)
_RANGE3_COEFF = 1.6926


def effective_dark_rate_hz(raw_rate_hz: float, window_ps: float,
                           jitter_sigma_ps: float) -> float:
    """Dark rate rescaled for anchor-relative coincidence windows.

    A dark count completes a three-fold of tag span r anywhere in an
    interval of length 2*tau - r (it may precede or follow the genuine
    tags), so against the model's p_bsm * n * tau floor the effective rate
    is raw * (2*tau - E[r]) / tau.
    """
    if window_ps <= 0:
        return raw_rate_hz
    r_bar = min(_RANGE3_COEFF * jitter_sigma_ps, window_ps)
    return raw_rate_hz * (2.0 * window_ps - r_bar) / window_ps


def model_rate_hz(budget: LinkBudget) -> float:
    return budget.p_bsm_hz * (budget.eta * (1.0 + budget.s2_frac)
                              + budget.n_hz * budget.tau_s)


def model_visibility(budget: LinkBudget) -> float:
    rate = model_rate_hz(budget)
    if rate <= 0.0:
        return float("nan")
    signal = budget.p_bsm_hz * budget.eta * (budget.v0 + budget.v2 * budget.s2_frac)
    return signal / rate


@dataclass(frozen=True)
class PredictPoint:
    attenuation_db: float
    rate_hz: float
    visibility: float
    snr: float


def predict_rate_visibility(budget: LinkBudget, attenuation_sweep) -> list[PredictPoint]:
    """Model rate and visibility over a list of attenuations (dB)."""
    points = []
    for db in attenuation_sweep:
        b = budget.at(float(db))
        points.append(PredictPoint(attenuation_db=float(db),
                                   rate_hz=model_rate_hz(b),
                                   visibility=model_visibility(b),
                                   snr=snr(b)))
    return points


def crossover_attenuation_db(budget: LinkBudget) -> float:
    """Attenuation where the model visibility crosses the classical 1/3.

    Closed form eta* = n tau / (3 v0 - 1) when s2_frac = 0; root-found in
    general.  Raises when the model never reaches the bound.
    """
    v_cl = ClassicalBounds.visibility()
    if model_visibility(budget.at(0.0)) <= v_cl:
        raise ValidationError("visibility is below the classical bound already at 0 dB")

    def f(db):
        return model_visibility(budget.at(db)) - v_cl

    hi = 0.0
    while f(hi) > 0.0:
        hi += 10.0
        if hi > 300.0:
            raise ValidationError("visibility never crosses the classical bound")
    return float(brentq(f, max(hi - 10.0, 0.0), hi, xtol=1e-12))


@dataclass(frozen=True)
class FitResult:
    budget: LinkBudget
    residual_norm: float
    n_points: int
    flagged: bool
    message: str


def fit_budget(attenuation_db, rate_hz, visibility, n_hz: float, tau_s: float,
               rate_sigma=None, vis_sigma=None) -> FitResult:
    """Least-squares fit of (p_bsm_hz, v0, s2_frac) to a measured sweep.

    The dark rate and window are held at their configured truth.  Residuals
    are sigma-weighted when uncertainties are given, otherwise scale-
    normalized.  Degenerate designs (for example, points confined to the
    constant-rate floor) are flagged rather than silently reported.
    """
    db = np.asarray(attenuation_db, dtype=float)
    rate = np.asarray(rate_hz, dtype=float)
    vis = np.asarray(visibility, dtype=float)
    if db.size < 4:
        raise ValidationError("fit requires at least 4 sweep points")
    if not (db.size == rate.size == vis.size):
        raise ValidationError("sweep columns must have equal length")
    good = np.isfinite(vis)
    eta = 10.0 ** (-db / 10.0)
    r_sig = np.asarray(rate_sigma, dtype=float) if rate_sigma is not None \
        else np.maximum(np.abs(rate), np.abs(rate).max() * 1e-3)
    v_sig = np.asarray(vis_sigma, dtype=float) if vis_sigma is not None \
        else np.full(vis.shape, max(np.nanstd(vis), 1e-2))
    r_sig = np.maximum(r_sig, 1e-300)
    v_sig = np.maximum(v_sig, 1e-300)

    def residuals(p):
        p_bsm, v0, s2 = p
        model_r = p_bsm * (eta * (1.0 + s2) + n_hz * tau_s)
        model_v = np.divide(p_bsm * eta * v0, model_r,
                            out=np.zeros_like(eta), where=model_r > 0)
        return np.concatenate([(model_r - rate) / r_sig,
                               ((model_v - vis) / v_sig)[good]])

    p_bsm0 = max(float(rate.max() / (eta.max() + n_hz * tau_s)), 1e-12)
    v00 = float(np.clip(np.nanmax(vis) if good.any() else 0.5, 0.05, 1.0))
    scale = [max(p_bsm0, 1e-12), 0.5, 0.5]
    sol = least_squares(residuals, x0=[p_bsm0, v00, 0.0],
                        bounds=([0.0, 0.0, 0.0], [np.inf, 1.0, np.inf]),
                        x_scale=scale, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    p_bsm, v0, s2 = sol.x

    flagged = False
    message = "ok"
    if not sol.success:
        flagged, message = True, f"optimizer: {sol.message}"
    else:
        jac = sol.jac * np.asarray(scale)[None, :]
        sv = np.linalg.svd(jac, compute_uv=False)
        if sv.min() <= 0 or sv.max() / max(sv.min(), 1e-300) > 1e10:
            flagged = True
            message = "degenerate design: parameters not identifiable from these points"
        elif np.ptp(eta) < 1e-3 * (n_hz * tau_s):
            flagged = True
            message = "sweep confined to the noise floor: v0 unidentifiable"

    budget = LinkBudget(attenuation_db=float(db.min()), n_hz=n_hz, tau_s=tau_s,
                        p_bsm_hz=float(p_bsm), v0=float(min(v0, 1.0)),
                        s2_frac=float(s2))
    return FitResult(budget=budget, residual_norm=float(np.linalg.norm(sol.fun)),
                     n_points=int(db.size), flagged=flagged, message=message)
