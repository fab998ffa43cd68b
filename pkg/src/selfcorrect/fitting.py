"""Forward prediction of accuracy curves and inverse fitting of (Upp, alpha, Acc_0)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CurveTooShort, LengthMismatch, NonConvergent
from .theory import AccuracyCurve, closed_form_curve, derive_params

NOISE_FLOOR = 1e-6
FALLBACK_BAND = 0.02
SE_BAND = 3.0
# alpha grid for the profile-residual polish; endpoints stay off +-1 where Upp is unidentifiable
ALPHA_GRID = np.linspace(-0.999, 0.999, 401)


@dataclass(frozen=True)
class FitResult:
    """Fitted geometric curve ``upp - alpha**t (upp - acc0)`` and its residuals.

    ``flat`` marks a curve whose first differences are all below the noise
    floor; alpha is then unidentifiable and reported as 0.
    """

    upp: float
    alpha: float
    acc0: float
    rmse: float
    max_abs_residual: float
    flat: bool = False

    @property
    def descending(self):
        return not self.flat and self.upp < self.acc0

    def curve(self, rounds):
        t = np.arange(rounds + 1)
        return self.upp - np.power(self.alpha, t) * (self.upp - self.acc0)


class GoodnessOfFit(NamedTuple):
    rmse: float
    max_abs_residual: float
    within_band: bool


def predict_from_single_round(acc0, cl_hat, cs_hat, rounds):
    """Theoretical curve for rounds 0..``rounds`` from one round's (Acc_0, CL, CS)."""
    if rounds < 1:
        raise ValueError(f"rounds must be positive, got {rounds}")
    return closed_form_curve(derive_params(cl_hat, cs_hat, acc0), rounds)


def _solve_given_alpha(values, alpha):
    """Least-squares (upp, acc0) and residual sum of squares for each alpha.

    Solves the 2x2 normal equations of ``values ~ upp (1 - a**t) + acc0 a**t``
    for every entry of ``alpha`` at once.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    t = np.arange(values.size)
    decay = np.power(alpha[:, None], t[None, :])
    rise = 1.0 - decay
    s11 = np.einsum("ij,ij->i", rise, rise)
    s12 = np.einsum("ij,ij->i", rise, decay)
    s22 = np.einsum("ij,ij->i", decay, decay)
    b1 = rise @ values
    b2 = decay @ values
    det = s11 * s22 - s12 * s12
    with np.errstate(divide="ignore", invalid="ignore"):
        upp = (s22 * b1 - s12 * b2) / det
        acc0 = (s11 * b2 - s12 * b1) / det
    resid = values[None, :] - (upp[:, None] * rise + acc0[:, None] * decay)
    rss = np.einsum("ij,ij->i", resid, resid)
    rss = np.where(np.isfinite(rss), rss, np.inf)
    return upp, acc0, rss


def _profile_alpha(values, start):
    """Minimise the residual over alpha with (upp, acc0) solved exactly at each alpha."""
    _, _, grid_rss = _solve_given_alpha(values, ALPHA_GRID)
    i = int(np.argmin(grid_rss))
    lo = ALPHA_GRID[max(i - 1, 0)]
    hi = ALPHA_GRID[min(i + 1, ALPHA_GRID.size - 1)]
    res = minimize_scalar(
        lambda a: _solve_given_alpha(values, a)[2][0],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    start_rss = _solve_given_alpha(values, start)[2][0] if -1.0 < start < 1.0 else np.inf
    return float(res.x) if res.fun < start_rss else start


def fit_geometric(curve, noise_floor=NOISE_FLOOR, polish=True):
    """Fit ``Acc_t = upp - alpha**t (upp - acc0)`` to an observed curve.

    alpha starts as the least-squares ratio of consecutive first
    differences (``d_{t+1} = alpha d_t``); Upp and Acc_0 then follow from
    linear least squares with alpha fixed.  With ``polish`` the ratio
    estimate is replaced by the alpha minimising the total residual, but
    only when that lowers it, so exact curves keep the ratio solution.
    A flat curve yields ``flat=True``, alpha 0 and Upp = Acc_0 = the mean.
    """
    values = np.asarray(curve.values if isinstance(curve, AccuracyCurve) else curve, dtype=float)
    if values.ndim != 1 or values.size < 4:
        raise CurveTooShort(f"need at least 4 rounds of data, got {values.size}")
    diffs = np.diff(values)
    if np.all(np.abs(diffs) < noise_floor):
        mean = float(values.mean())
        resid = values - mean
        return FitResult(
            upp=mean,
            alpha=0.0,
            acc0=mean,
            rmse=float(np.sqrt(np.mean(resid**2))),
            max_abs_residual=float(np.max(np.abs(resid))),
            flat=True,
        )
    lead, lag = diffs[:-1], diffs[1:]
    alpha = float(np.dot(lead, lag) / np.dot(lead, lead))
    if polish:
        alpha = _profile_alpha(values, alpha)
    if not -1.0 < alpha < 1.0:
        raise NonConvergent(f"fitted alpha={alpha!r} is outside (-1, 1)")
    upp, acc0, _ = _solve_given_alpha(values, alpha)
    upp, acc0 = float(upp[0]), float(acc0[0])
    resid = values - (upp - np.power(alpha, np.arange(values.size)) * (upp - acc0))
    return FitResult(
        upp=upp,
        alpha=alpha,
        acc0=acc0,
        rmse=float(np.sqrt(np.mean(resid**2))),
        max_abs_residual=float(np.max(np.abs(resid))),
    )


def residuals(empirical, theoretical):
    if len(empirical) != len(theoretical):
        raise LengthMismatch(f"curve lengths differ: {len(empirical)} vs {len(theoretical)}")
    return np.asarray(empirical.values) - np.asarray(theoretical.values)


def goodness_of_fit(empirical, theoretical):
    """RMSE, max |residual| and whether every residual sits inside the band.

    The band is ``3 * stderr[t]`` when the empirical curve carries standard
    errors and a flat 0.02 otherwise.
    """
    resid = np.abs(residuals(empirical, theoretical))
    rmse = float(np.sqrt(np.mean(resid**2)))
    worst = float(resid.max())
    if empirical.stderr is not None:
        within = bool(np.all(resid <= SE_BAND * empirical.stderr))
    else:
        within = worst <= FALLBACK_BAND
    return GoodnessOfFit(rmse, worst, within)
