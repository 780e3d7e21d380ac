"""Finite-size extrapolation, log-log power-law fits and Kibble-Zurek exponents."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError, InvalidInputError, SingularFitError


@dataclass
class LinearFit:
    slope: float
    intercept: float
    stderr_slope: float
    stderr_intercept: float
    residuals: np.ndarray
    r_squared: float


def linear_fit(x, y, weights=None, absolute_sigma: bool = False) -> LinearFit:
    """(Weighted) least squares ``y = intercept + slope * x`` with standard errors.

    ``weights`` are inverse variances.  With ``absolute_sigma`` the parameter
    covariance comes from the weights alone; otherwise it is rescaled by the
    reduced chi-square, which is the ordinary regression formula.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    if len(np.unique(x)) < 2:
        raise SingularFitError("linear fit needs at least two distinct abscissae")
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    gram = XtW @ X
    if np.linalg.cond(gram) > 1e14:
        raise SingularFitError("design matrix is singular")
    cov = np.linalg.inv(gram)
    beta = cov @ (XtW @ y)
    resid = y - X @ beta
    dof = len(x) - 2
    if not absolute_sigma:
        chi2 = float(np.sum(w * resid**2))
        cov = cov * (chi2 / dof if dof > 0 else 0.0)
    ss_tot = float(np.sum(w * (y - np.average(y, weights=w)) ** 2))
    ss_res = float(np.sum(w * resid**2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return LinearFit(float(beta[1]), float(beta[0]), float(np.sqrt(cov[1, 1])),
                     float(np.sqrt(cov[0, 0])), resid, r2)


@dataclass
class FiniteSizeFit:
    """f_Q(N) = f_Q_infinity - A / N."""

    f_Q_infinity: float
    A: float
    stderr_intercept: float
    stderr_A: float
    points: list
    residuals: list
    residual_rms: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["intercept"] = self.f_Q_infinity
        d["stderr"] = self.stderr_intercept
        return d


@dataclass
class PowerLawFit:
    """value = exp(log_prefactor) * tau_q ** exponent."""

    exponent: float
    stderr_exponent: float
    log_prefactor: float
    stderr_log_prefactor: float
    points: list
    residuals: list
    r_squared: float

    @property
    def prefactor(self) -> float:
        return float(np.exp(self.log_prefactor))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stderr"] = self.stderr_exponent
        d["intercept"] = self.log_prefactor
        return d


def finite_size_extrapolate(points, weights=None, absolute_sigma=False) -> FiniteSizeFit:
    """Ordinary least squares of f_Q against 1/N; the intercept is the N -> inf value."""
    pts = [(int(n), float(f)) for n, f in points]
    if len({n for n, _ in pts}) < 3:
        raise InsufficientDataError("finite-size extrapolation needs at least 3 distinct sizes")
    if any(n <= 0 for n, _ in pts):
        raise InvalidInputError("system sizes must be positive")
    x = np.array([1.0 / n for n, _ in pts])
    y = np.array([f for _, f in pts])
    fit = linear_fit(x, y, weights, absolute_sigma)
    return FiniteSizeFit(
        f_Q_infinity=fit.intercept,
        A=-fit.slope,
        stderr_intercept=fit.stderr_intercept,
        stderr_A=fit.stderr_slope,
        points=pts,
        residuals=fit.residuals.tolist(),
        residual_rms=float(np.sqrt(np.mean(fit.residuals**2))),
    )


def power_law_fit(points, weights=None, absolute_sigma=False) -> PowerLawFit:
    """Least squares on (log tau_q, log value)."""
    pts = [(float(t), float(v)) for t, v in points]
    if any(v <= 0 or not np.isfinite(v) for _, v in pts) or any(t <= 0 for t, _ in pts):
        raise InvalidInputError("power-law fit needs strictly positive rates and values")
    if len({t for t, _ in pts}) < 4:
        raise InsufficientDataError("power-law fit needs at least 4 distinct rates")
    fit = linear_fit(np.log([t for t, _ in pts]), np.log([v for _, v in pts]), weights, absolute_sigma)
    return PowerLawFit(
        exponent=fit.slope,
        stderr_exponent=fit.stderr_slope,
        log_prefactor=fit.intercept,
        stderr_log_prefactor=fit.stderr_intercept,
        points=pts,
        residuals=fit.residuals.tolist(),
        r_squared=fit.r_squared,
    )


def extrapolated_power_law(rows, value="f_q") -> tuple[PowerLawFit, dict]:
    """Group rows by tau_q, extrapolate each group in 1/N, fit the intercepts.

    ``rows`` are mappings with at least ``N``, ``tau_q`` and ``value`` keys.
    Returns the power-law fit and the per-rate finite-size fits.
    """
    groups: dict[float, list] = {}
    for r in rows:
        groups.setdefault(float(r["tau_q"]), []).append((int(r["N"]), float(r[value])))
    per_rate = {tau: finite_size_extrapolate(pts) for tau, pts in sorted(groups.items())}
    fit = power_law_fit([(tau, f.f_Q_infinity) for tau, f in per_rate.items()])
    return fit, per_rate


@dataclass
class KZPrediction:
    d: int
    nu: float
    z: float
    alpha: float
    nu_lambda: float = field(init=False)
    z_lambda: float = field(init=False)
    defect_exponent: float = field(init=False)
    qfi_exponent: float = field(init=False)
    freezeout_time_exponent: float = field(init=False)
    gap_exponent: float = field(init=False)

    def __post_init__(self):
        # a ramp g - 1 ~ (t/tau)^alpha is a linear ramp of lambda = (g-1)^(1/alpha)
        self.nu_lambda = self.alpha * self.nu
        self.z_lambda = self.z
        self.defect_exponent = -self.d * self.nu_lambda / (self.z_lambda * self.nu_lambda + 1.0)
        self.qfi_exponent = -self.defect_exponent
        zn = self.z * self.nu
        self.freezeout_time_exponent = zn / (zn + 1.0)
        self.gap_exponent = -zn / (zn + 1.0)

    def to_dict(self) -> dict:
        return asdict(self)


def kz_predict(d: int = 1, nu: float = 1.0, z: float = 1.0, alpha: float = 1.0) -> KZPrediction:
    if not (d > 0 and nu > 0 and z > 0 and alpha > 0):
        raise InvalidArgumentError("d, nu, z and alpha must all be positive")
    return KZPrediction(int(d), float(nu), float(z), float(alpha))


def kappa(alpha):
    """Predicted QFI-density exponent alpha / (alpha + 1) of a power-law ramp (d = nu = z = 1)."""
    alpha = np.asarray(alpha, dtype=float)
    return alpha / (alpha + 1.0)
