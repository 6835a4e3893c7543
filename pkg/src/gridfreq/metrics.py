"""COI frequency and the standard primary-frequency-response metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .governor import ufls_crossing
from .storage import estimate_rocof

DEFAULT_SETTLE_WINDOW_S = (20.0, 52.0)
DEFAULT_ROCOF_WINDOW_S = 0.5


@dataclass(frozen=True)
class FrequencyMetrics:
    """Scalar summary of one post-contingency trace.

    ``fr_mw_per_01hz`` is the frequency response in the MW-per-0.1-Hz
    convention (imbalance over start-to-settling deviation); the nadir-based
    variant divides by the start-to-nadir deviation instead.  Both are absent
    when the corresponding deviation is not a decline.
    """

    start_hz: float
    nadir_hz: float
    nadir_time_s: float
    settle_hz: float
    rocof_hz_per_s: float
    ufls_time_s: Optional[float]
    fr_mw_per_01hz: Optional[float]
    frn_mw_per_01hz: Optional[float]

    @property
    def fr_mw_per_hz(self) -> Optional[float]:
        return None if self.fr_mw_per_01hz is None else self.fr_mw_per_01hz * 10.0

    @property
    def frn_mw_per_hz(self) -> Optional[float]:
        return None if self.frn_mw_per_01hz is None else self.frn_mw_per_01hz * 10.0


def coi_frequency(f_hz, inertia_weights_mws) -> float:
    """Inertia-weighted mean of machine frequencies."""
    f = np.asarray(f_hz, dtype=float)
    w = np.asarray(inertia_weights_mws, dtype=float)
    if f.size == 0 or f.shape != w.shape:
        raise ValueError("frequencies and weights must be equal-length and non-empty")
    if np.any(w <= 0):
        raise ValueError("inertia weights must be positive")
    return float(np.dot(w, f) / w.sum())


def compute_metrics(t_s, f_hz, imbalance_mw: float, contingency_time_s: float,
                    ufls_threshold_hz: float,
                    settle_window_s: Tuple[float, float] = DEFAULT_SETTLE_WINDOW_S,
                    rocof_window_s: float = DEFAULT_ROCOF_WINDOW_S,
                    ) -> FrequencyMetrics:
    """Metrics of one COI trace.

    The nadir is the exact minimum of the stored samples from the
    contingency onward (first occurrence).  ROCOF is the least-squares slope
    over the window right after the contingency.  The settling frequency is
    the sample mean over ``settle_window_s`` (relative to the contingency),
    following the averaging convention used for frequency-response-obligation
    B values.
    """
    t = np.asarray(t_s, dtype=float)
    f = np.asarray(f_hz, dtype=float)
    if t.size == 0:
        raise ValueError("trace is empty")
    w0, w1 = settle_window_s
    if t[-1] < contingency_time_s + w1 - 1e-9:
        raise ValueError(
            f"trace ends at {t[-1]:g}s, before the settle window "
            f"[{contingency_time_s + w0:g}, {contingency_time_s + w1:g}]s")

    at = np.searchsorted(t, contingency_time_s + 1e-12) - 1
    at = max(at, 0)
    start = float(f[at])

    post = slice(at, None)
    fp = f[post]
    tp = t[post]
    imin = int(np.argmin(fp))
    nadir = float(fp[imin])
    nadir_time = float(tp[imin])

    rsel = (t >= contingency_time_s - 1e-9) & \
           (t <= contingency_time_s + rocof_window_s + 1e-9)
    rocof = estimate_rocof(t[rsel], f[rsel])

    ssel = (t >= contingency_time_s + w0 - 1e-9) & \
           (t <= contingency_time_s + w1 + 1e-9)
    settle = float(f[ssel].mean())

    fr = None
    if start - settle > 0:
        fr = imbalance_mw * 0.1 / (start - settle)
    frn = None
    if start - nadir > 0:
        frn = imbalance_mw * 0.1 / (start - nadir)
    if fr is not None and frn is not None and nadir <= settle:
        # algebraic consequence of a deeper nadir denominator
        assert frn <= fr * (1 + 1e-12)

    return FrequencyMetrics(
        start_hz=start, nadir_hz=nadir, nadir_time_s=nadir_time,
        settle_hz=settle, rocof_hz_per_s=rocof,
        ufls_time_s=ufls_crossing(t, f, ufls_threshold_hz),
        fr_mw_per_01hz=fr, frn_mw_per_01hz=frn)


def metrics_from_trace(trace, settle_window_s=DEFAULT_SETTLE_WINDOW_S,
                       rocof_window_s=DEFAULT_ROCOF_WINDOW_S) -> FrequencyMetrics:
    """Convenience wrapper reading the event parameters from trace metadata."""
    meta = trace.meta
    return compute_metrics(
        trace.times, trace.f_coi_hz,
        imbalance_mw=meta["contingency_mw"],
        contingency_time_s=meta["contingency_time_s"],
        ufls_threshold_hz=meta["ufls_hz"],
        settle_window_s=settle_window_s,
        rocof_window_s=rocof_window_s)
