"""Rayleigh CFAR thresholding and the parameter-convergence detector.

The per-bin test statistic is ``sqrt(r_R^2 + r_I^2)``; under the null
hypothesis each bin's statistic is Rayleigh with per-component variance
``sigma2``, so the threshold achieving false-alarm rate ``pfa`` is
``sqrt(-2 sigma2 ln(pfa))``.

The detector estimates ``sigma2`` without prior knowledge of the noise
power by alternating two steps: compute the sample variance of the
pseudo-measurement entries outside the current support estimate, then
rebuild the support estimate by thresholding at the inner rate
``pfa0``.  With a small ``pfa0`` the null set grows monotonically and
the variance estimate converges; the converged value then sets the
output threshold for the requested rate ``pfa``.

All bin indices in public outputs are 1-based; internal work uses
numpy masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DetectorFailureError,
    DimensionError,
    InsufficientNullSamplesError,
    ThresholdDomainError,
)

__all__ = [
    "PcdConfig",
    "PcdTrace",
    "DetectionResult",
    "test_statistic",
    "rayleigh_threshold",
    "support_set",
    "residual_variance",
    "hard_detect",
    "refine_scene",
    "pcd_variance_estimate",
    "pcd_detect",
    "baseline_vamp_detect",
]


@dataclass(frozen=True)
class PcdConfig:
    """Detector settings.

    pfa : desired output false-alarm rate.
    pfa0 : inner-loop rate used to grow the null set while the variance
        estimate converges.
    c_tol : relative-change convergence tolerance on the variance.
    m_max : iteration cap; the estimate at ``m_max`` is accepted as
        final even if unconverged.
    """

    pfa: float
    pfa0: float = 1e-3
    c_tol: float = 1e-5
    m_max: int = 50

    def __post_init__(self):
        if not (0 < self.pfa0 < 1):
            raise ValueError(f"pfa0 must be in (0, 1), got {self.pfa0}")
        if not (0 < self.pfa < 1):
            raise ValueError(f"pfa must be in (0, 1), got {self.pfa}")
        if not (self.c_tol > 0):
            raise ValueError(f"c_tol must be > 0, got {self.c_tol}")
        if self.m_max < 1:
            raise ValueError(f"m_max must be >= 1, got {self.m_max}")


@dataclass
class PcdTrace:
    """Per-iteration record of the variance-convergence loop.

    The three lists share length ``iterations_used``; the inner
    threshold is recorded for every iteration including the final one
    (where the loop exits before using it).
    """

    sigma2_per_iter: list = field(default_factory=list)
    l_per_iter: list = field(default_factory=list)
    thresholds_per_iter: list = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0


@dataclass(frozen=True)
class DetectionResult:
    """Per-bin detections at one output false-alarm rate.

    ``xhat_pfa`` holds the statistic value on detected bins and exact 0
    elsewhere; ``detected_bins`` are the 1-based indices of its nonzero
    entries; ``sigma2`` is the variance estimate that produced
    ``threshold`` (the detector's own estimate for the convergence
    detector, the engine's closed-form claim for the baseline).
    """

    xhat_pfa: np.ndarray
    detected_bins: frozenset
    threshold: float
    sigma2: float


def test_statistic(r_r: np.ndarray, r_i: np.ndarray) -> np.ndarray:
    """Elementwise magnitude ``sqrt(r_R^2 + r_I^2)`` of the stacked halves."""
    r_r = np.asarray(r_r, dtype=float)
    r_i = np.asarray(r_i, dtype=float)
    if r_r.shape != r_i.shape:
        raise DimensionError(
            f"component lengths differ: {r_r.shape} vs {r_i.shape}"
        )
    return np.hypot(r_r, r_i)


def rayleigh_threshold(sigma2: float, pfa: float) -> float:
    """Threshold with exceedance probability ``pfa`` under
    Rayleigh(sqrt(sigma2)): ``sqrt(-2 sigma2 ln(pfa))``.

    ``pfa = 1`` maps to threshold 0 (everything positive exceeds it);
    ``pfa = 0`` would be infinite and is rejected.
    """
    if not (sigma2 > 0):
        raise ThresholdDomainError(f"sigma2 must be > 0, got {sigma2}")
    if not (0 < pfa <= 1):
        raise ThresholdDomainError(f"pfa must be in (0, 1], got {pfa}")
    return float(np.sqrt(-2.0 * sigma2 * np.log(pfa)))


def support_set(x: np.ndarray) -> frozenset:
    """1-based indices of exactly nonzero entries."""
    x = np.asarray(x)
    return frozenset(int(i) + 1 for i in np.flatnonzero(x != 0))


def residual_variance(r_ri: np.ndarray, excluded) -> tuple:
    """Mean-subtracted unbiased sample variance of the non-excluded entries.

    Parameters
    ----------
    r_ri : np.ndarray
        Stacked pseudo-measurement, length 2N.
    excluded : iterable of int
        1-based indices to leave out (the current support estimate).

    Returns
    -------
    (sigma2, l) : the variance and the count of retained entries.

    Raises
    ------
    InsufficientNullSamplesError
        If one or zero entries remain.
    """
    r_ri = np.asarray(r_ri, dtype=float)
    keep = np.ones(r_ri.size, dtype=bool)
    for idx in excluded:
        if not (1 <= idx <= r_ri.size):
            raise DimensionError(
                f"excluded index {idx} outside 1..{r_ri.size}"
            )
        keep[idx - 1] = False
    return _masked_variance(r_ri, keep)


def _masked_variance(r_ri: np.ndarray, keep: np.ndarray) -> tuple:
    l = int(np.count_nonzero(keep))
    if l <= 1:
        raise InsufficientNullSamplesError(
            f"only {l} null samples remain; variance undefined"
        )
    x_s = r_ri[keep]
    return float(np.var(x_s, ddof=1)), l


def hard_detect(stat: np.ndarray, threshold: float) -> np.ndarray:
    """Keep statistic values strictly above the threshold, zero the rest.

    A statistic exactly at the threshold is not a detection.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    stat = np.asarray(stat, dtype=float)
    return stat * (stat > threshold)


def refine_scene(r_r: np.ndarray, r_i: np.ndarray, detections: np.ndarray) -> np.ndarray:
    """Rebuild a stacked scene estimate from a detection pattern.

    Both halves share the per-bin mask ``detections != 0``:
    ``[r_R * mask; r_I * mask]``.
    """
    r_r = np.asarray(r_r, dtype=float)
    r_i = np.asarray(r_i, dtype=float)
    detections = np.asarray(detections)
    if not (r_r.shape == r_i.shape == detections.shape):
        raise DimensionError(
            f"length mismatch: {r_r.shape}, {r_i.shape}, {detections.shape}"
        )
    mask = detections != 0
    return np.concatenate([r_r * mask, r_i * mask])


def pcd_variance_estimate(xhat_ri: np.ndarray, r_ri: np.ndarray,
                          r_r: np.ndarray, r_i: np.ndarray,
                          cfg: PcdConfig) -> tuple:
    """Run the variance-convergence loop and return ``(sigma2, trace)``.

    Iteration m: take the entries of ``r_ri`` outside the support of
    the current scene estimate (the exact nonzeros of the stacked
    2N-vector), form their sample variance; stop when the relative
    change drops below ``c_tol`` (from m >= 2) or ``m == m_max``;
    otherwise threshold the statistic at the inner rate ``pfa0`` and
    rebuild the scene estimate from the detections.

    This is the expensive part of :func:`pcd_detect`, split out so a
    sweep over many output rates can reuse one converged estimate.

    Raises
    ------
    DetectorFailureError
        If fewer than two null samples remain at some iteration (scene
        too dense to calibrate against).
    ThresholdDomainError
        Propagated when the variance estimate collapses to zero.
    """
    xhat_ri = np.asarray(xhat_ri, dtype=float)
    r_ri = np.asarray(r_ri, dtype=float)
    stat = test_statistic(r_r, r_i)
    if r_ri.shape != xhat_ri.shape or r_ri.size != 2 * stat.size:
        raise DimensionError(
            f"inconsistent lengths: xhat {xhat_ri.shape}, r_ri {r_ri.shape}, "
            f"statistic {stat.shape}"
        )
    trace = PcdTrace()
    x_cur = xhat_ri
    sigma2_prev: Optional[float] = None
    for m in range(1, cfg.m_max + 1):
        null_mask = x_cur == 0
        try:
            sigma2_m, l = _masked_variance(r_ri, null_mask)
        except InsufficientNullSamplesError as exc:
            raise DetectorFailureError(iteration=m, reason=str(exc)) from exc
        t_pfa0 = rayleigh_threshold(sigma2_m, cfg.pfa0)
        trace.sigma2_per_iter.append(sigma2_m)
        trace.l_per_iter.append(l)
        trace.thresholds_per_iter.append(t_pfa0)
        trace.iterations_used = m
        converged = (
            sigma2_prev is not None
            and abs(sigma2_m - sigma2_prev) / sigma2_prev < cfg.c_tol
        )
        if converged or m == cfg.m_max:
            trace.converged = bool(converged)
            return sigma2_m, trace
        detections = hard_detect(stat, t_pfa0)
        x_cur = refine_scene(r_r, r_i, detections)
        sigma2_prev = sigma2_m
    raise AssertionError("unreachable: loop always returns at m_max")


def pcd_detect(xhat_ri: np.ndarray, r_ri: np.ndarray,
               r_r: np.ndarray, r_i: np.ndarray,
               cfg: PcdConfig) -> tuple:
    """Full parameter-convergence detection at the configured rate.

    Returns ``(DetectionResult, PcdTrace)``.  See
    :func:`pcd_variance_estimate` for the failure modes.
    """
    sigma2_pcd, trace = pcd_variance_estimate(xhat_ri, r_ri, r_r, r_i, cfg)
    stat = test_statistic(r_r, r_i)
    threshold = rayleigh_threshold(sigma2_pcd, cfg.pfa)
    xhat_pfa = hard_detect(stat, threshold)
    result = DetectionResult(
        xhat_pfa=xhat_pfa,
        detected_bins=support_set(xhat_pfa),
        threshold=threshold,
        sigma2=sigma2_pcd,
    )
    return result, trace


def baseline_vamp_detect(stat: np.ndarray, sigma2_vamp: float, pfa: float) -> DetectionResult:
    """Threshold the statistic using the engine's closed-form variance
    claim instead of the converged estimate."""
    threshold = rayleigh_threshold(sigma2_vamp, pfa)
    xhat_pfa = hard_detect(np.asarray(stat, dtype=float), threshold)
    return DetectionResult(
        xhat_pfa=xhat_pfa,
        detected_bins=support_set(xhat_pfa),
        threshold=threshold,
        sigma2=sigma2_vamp,
    )
