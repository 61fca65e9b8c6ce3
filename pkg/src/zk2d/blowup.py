"""Post-processing of blow-up runs.

Power-law fits ln g(t) ~ a*ln(t* - t) + b of diverging diagnostics, the
dynamic-rescaling length L(t) recovered from the sup norm, and extraction
of the rescaled-soliton residual from a near-blow-up snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from zk2d.diagnostics import TimeSeries, sup_norm_and_argmax
from zk2d.errors import (
    ContractViolationError,
    FitDomainError,
    NoBlowupError,
    ResolutionError,
)
from zk2d.grid import Field, derivative, evaluate_on_points, forward, tail_indicator
from zk2d.soliton import SolitonProfile, evaluate_profile

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class FitResult:
    """Parameters of a power-law fit with its window metadata."""

    a: float
    b: float
    t_star: float
    window: tuple[int, int]
    sample_count: int
    rms_residual: float
    series_name: str = ""
    method: str = "profiled"

    def model(self, t: np.ndarray) -> np.ndarray:
        """Fitted values exp(b) * (t* - t)^a."""
        return np.exp(self.b) * (self.t_star - np.asarray(t)) ** self.a


@dataclass
class RescaleTrace:
    """Dynamic-rescaling length L(t) and the frame displacement it rode on."""

    t: np.ndarray
    L: np.ndarray
    xm: np.ndarray
    ym: np.ndarray


def _profiled_rss(s: float, dt_last: np.ndarray, y: np.ndarray):
    """Least-squares (a, b) and residual sum for t* = t_last + s."""
    x = np.log(s + dt_last)
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    denom = np.dot(dx, dx)
    a = np.dot(dx, y - ym) / denom
    b = ym - a * xm
    r = y - a * x - b
    return np.dot(r, r), a, b


def fit_power_law(
    t: np.ndarray,
    g: np.ndarray,
    window: int = 500,
    method: str = "profiled",
    series_name: str = "",
) -> FitResult:
    """Fit ln g ~ a*ln(t* - t) + b on the last `window` samples.

    The profiled method solves (a, b) in closed form for each trial t* and
    locates t* by a golden-section search on (t_last, t_last + 10*span]; a
    search that runs into the upper bracket raises NoBlowupError (the series
    is not consistent with a finite-time power law).  The simplex method
    runs Nelder-Mead on (a, b, t*) seeded from the profiled result.
    """
    t = np.asarray(t, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if t.ndim != 1 or t.shape != g.shape:
        raise ContractViolationError("t and g must be 1D arrays of equal length")
    if window < 3:
        raise ContractViolationError("window must hold at least 3 samples")
    if window > t.size:
        raise ContractViolationError(
            f"window of {window} exceeds the {t.size} available samples"
        )
    i0 = t.size - window
    tw = t[i0:]
    gw = g[i0:]
    if np.any(gw <= 0.0):
        raise FitDomainError("fit window contains non-positive samples")

    t_last = tw[-1]
    span = t_last - tw[0]
    if span <= 0.0:
        raise ContractViolationError("degenerate fit window")
    dt_last = t_last - tw  # >= 0, exact differences keep the fit shift-invariant
    y = np.log(gw)

    lo = 1e-9 * span
    hi = 10.0 * span
    # coarse geometric scan brackets the minimum for the golden section
    grid_s = np.geomspace(lo, hi, 128)
    rss = np.array([_profiled_rss(s, dt_last, y)[0] for s in grid_s])
    best = int(np.argmin(rss))
    if best == grid_s.size - 1:
        raise NoBlowupError(
            "t* search hit the upper bracket; series is not consistent with "
            "a finite-time power law"
        )
    s_lo = grid_s[max(best - 1, 0)]
    s_hi = grid_s[min(best + 1, grid_s.size - 1)]

    # golden-section refinement
    a_br, b_br = s_lo, s_hi
    c_br = b_br - _GOLDEN * (b_br - a_br)
    d_br = a_br + _GOLDEN * (b_br - a_br)
    f_c = _profiled_rss(c_br, dt_last, y)[0]
    f_d = _profiled_rss(d_br, dt_last, y)[0]
    for _ in range(200):
        if b_br - a_br < 1e-14 * max(b_br, 1.0):
            break
        if f_c < f_d:
            b_br, d_br, f_d = d_br, c_br, f_c
            c_br = b_br - _GOLDEN * (b_br - a_br)
            f_c = _profiled_rss(c_br, dt_last, y)[0]
        else:
            a_br, c_br, f_c = c_br, d_br, f_d
            d_br = a_br + _GOLDEN * (b_br - a_br)
            f_d = _profiled_rss(d_br, dt_last, y)[0]
    s_opt = 0.5 * (a_br + b_br)
    rss_opt, a, b = _profiled_rss(s_opt, dt_last, y)

    if method == "profiled":
        pass
    elif method == "simplex":
        def objective(params):
            aa, bb, ss = params
            if ss <= 0.0:
                return np.inf
            r = y - aa * np.log(ss + dt_last) - bb
            return np.dot(r, r)

        opt = scipy.optimize.minimize(
            objective,
            x0=np.array([a, b, s_opt]),
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000, "maxfev": 20000},
        )
        a, b, s_opt = opt.x
        rss_opt = opt.fun
    else:
        raise ContractViolationError(f"unknown fit method {method!r}")

    return FitResult(
        a=float(a),
        b=float(b),
        t_star=float(t_last + s_opt),
        window=(i0, t.size - 1),
        sample_count=window,
        rms_residual=float(np.sqrt(rss_opt / window)),
        series_name=series_name,
        method=method,
    )


def window_sweep(
    t: np.ndarray,
    g: np.ndarray,
    windows=(250, 500, 1000),
    method: str = "profiled",
    series_name: str = "",
) -> list[FitResult]:
    """Sensitivity check: the same fit over several window lengths."""
    return [
        fit_power_law(t, g, window=w, method=method, series_name=series_name)
        for w in windows
        if w <= len(t)
    ]


def estimate_L(series: TimeSeries, p: int, q_sup: float) -> RescaleTrace:
    """Rescaling length L(t) = (Q_sup / sup_u(t))^((p-1)/2).

    The frame displacement columns of the series are carried along so the
    trace records where the collapsing core sat.
    """
    sup_u = series.column("sup_u")
    if np.any(sup_u <= 0.0):
        raise FitDomainError("sup_u must be positive to estimate L")
    L = (q_sup / sup_u) ** ((p - 1) / 2.0)
    return RescaleTrace(
        t=series.column("t"),
        L=L,
        xm=series.column("xm"),
        ym=series.column("ym"),
    )


def band_limited_peak(f: Field) -> tuple[float, float, float]:
    """Peak of the trigonometric interpolant of f, refined by 2D Newton.

    Starts from the quadratically interpolated grid argmax and maximizes the
    Fourier series itself, so the returned value and location are exact to
    the band limit.  Falls back to the starting estimate if the Newton
    refinement leaves the starting cell or stops improving.
    """
    sup0, x, y = sup_norm_and_argmax(f)
    spec = forward(f)
    d = {
        (0, 0): spec,
        (1, 0): derivative(spec, 1, 0),
        (0, 1): derivative(spec, 0, 1),
        (2, 0): derivative(spec, 2, 0),
        (1, 1): derivative(spec, 1, 1),
        (0, 2): derivative(spec, 0, 2),
    }

    def at(mx, my, xx, yy):
        return float(
            evaluate_on_points(d[(mx, my)], np.array([xx]), np.array([yy]))[0, 0]
        )

    g = f.grid
    x_new, y_new = x, y
    for _ in range(12):
        fx = at(1, 0, x_new, y_new)
        fy = at(0, 1, x_new, y_new)
        fxx = at(2, 0, x_new, y_new)
        fxy = at(1, 1, x_new, y_new)
        fyy = at(0, 2, x_new, y_new)
        det = fxx * fyy - fxy * fxy
        if det <= 0.0 or fxx >= 0.0:
            break
        dx = -(fyy * fx - fxy * fy) / det
        dy = -(fxx * fy - fxy * fx) / det
        x_new += dx
        y_new += dy
        if abs(x_new - x) > g.dx or abs(y_new - y) > g.dy:
            return sup0, x, y
        if abs(dx) < 1e-13 * g.dx and abs(dy) < 1e-13 * g.dy:
            break
    value = at(0, 0, x_new, y_new)
    if value < sup0 - 1e-9 * abs(sup0):
        return sup0, x, y
    return value, x_new, y_new


def extract_residual(
    f: Field, profile: SolitonProfile
) -> tuple[Field, float, tuple[float, float]]:
    """Subtract the best-fitting rescaled soliton from a single-peak field.

    The speed is fixed by the amplitude ratio, c = (sup f / sup Q)^(p-1);
    the soliton is rebuilt at that speed, centered on the band-limited
    argmax of f, and the remainder is returned together with the fitted
    speed and center.
    """
    if abs(profile.c - 1.0) > 1e-12:
        raise ContractViolationError("extract_residual expects the c=1 profile")
    sup_f, x0, y0 = band_limited_peak(f)
    sup_q, _, _ = band_limited_peak(profile.field)
    if sup_f <= 0.0:
        raise FitDomainError("field has no positive peak")
    c_fit = (sup_f / sup_q) ** (profile.p - 1)

    g = f.grid
    soliton_vals = evaluate_profile(
        profile, c_fit, g.x_nodes(), g.y_nodes(), center=(x0, y0),
        wrap_periods=(2 * np.pi * g.lx, 2 * np.pi * g.ly),
    )
    sol = Field(g, soliton_vals)
    if tail_indicator(forward(sol)) > 1e-6:
        raise ResolutionError(
            f"rescaled soliton (c={c_fit:.3g}) is not resolved on the field's grid"
        )
    return Field(g, f.values - soliton_vals), float(c_fit), (float(x0), float(y0))


def core_background_ratio(
    residual: Field,
    center: tuple[float, float],
    r_core: float,
    r_background: float,
) -> float:
    """sup |residual| inside r_core over sup |residual| beyond r_background.

    Distances are measured from `center` with periodic wrapping.  Used to
    judge whether a fitted soliton accounts for the core down to the ambient
    radiation level.
    """
    g = residual.grid
    x, y = g.mesh()
    px = 2.0 * np.pi * g.lx
    py = 2.0 * np.pi * g.ly
    dx = (x - center[0] + px / 2) % px - px / 2
    dy = (y - center[1] + py / 2) % py - py / 2
    r2 = dx**2 + dy**2
    mag = np.abs(residual.values)
    core = mag[r2 <= r_core**2]
    background = mag[r2 >= r_background**2]
    if core.size == 0 or background.size == 0:
        raise ContractViolationError("degenerate core/background regions")
    bg = background.max()
    if bg == 0.0:
        return np.inf if core.max() > 0 else 0.0
    return float(core.max() / bg)
