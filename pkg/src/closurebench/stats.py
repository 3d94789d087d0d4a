"""Multivariate OLS with dummy-coded nominal predictors, one-sample
t-tests, and the exact small-sample distributions behind their p-values.

The t and F survival functions are evaluated through the regularized
incomplete beta function (continued fraction, 1e-12 target), so p-values
are reliable near the decision thresholds the analysis cares about.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# ---------------------------------------------------------------------------
# Regularized incomplete beta and derived survival functions

_BETA_EPS = 1e-14
_BETA_MAX_ITER = 500
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge for a={a}, b={b}, x={x}")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError(f"need a, b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"need 0 <= x <= 1, got x={x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) for Student's t with df degrees."""
    if df < 1:
        raise ValueError(f"need df >= 1, got {df}")
    if t < 0.0:
        return 1.0 - student_t_sf(-t, df)
    x = df / (df + t * t)
    return 0.5 * betainc_reg(df / 2.0, 0.5, x)


def f_sf(f_stat: float, df1: float, df2: float) -> float:
    """Upper-tail probability for the F distribution."""
    if df1 <= 0 or df2 <= 0:
        raise ValueError(f"need positive degrees of freedom, got {df1}, {df2}")
    if f_stat <= 0.0:
        return 1.0
    x = df2 / (df2 + df1 * f_stat)
    return betainc_reg(df2 / 2.0, df1 / 2.0, x)


# ---------------------------------------------------------------------------
# Design construction


@dataclass(frozen=True)
class DesignSpec:
    """Outcome column, continuous predictors, and nominal predictors with
    their reference levels."""

    outcome: str
    continuous: tuple[str, ...] = ()
    nominal: dict[str, object] = field(default_factory=dict)


def dummy_code(values: list, reference_level) -> tuple[list, list[list[float]]]:
    """k-1 indicator columns; the reference level codes as all zeros.

    Returns (non-reference levels in sorted order, columns) where
    columns[j][i] is the indicator of level j for row i.
    """
    levels = sorted(set(values), key=lambda v: (str(type(v)), v))
    if len(levels) < 2:
        raise ValueError(f"nominal column has a single level {levels!r}: non-identifiable")
    if reference_level not in levels:
        raise ValueError(f"reference level {reference_level!r} not among levels {levels!r}")
    others = [lv for lv in levels if lv != reference_level]
    columns = [[1.0 if v == lv else 0.0 for v in values] for lv in others]
    return others, columns


def build_design_matrix(
    design: DesignSpec, rows: list[dict]
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """(X with intercept, y, column names) from a list of row dicts."""
    if not rows:
        raise ValueError("no rows")
    for col in (design.outcome, *design.continuous, *design.nominal):
        if col not in rows[0]:
            raise ValueError(f"column {col!r} missing from rows")
    y = np.array([float(r[design.outcome]) for r in rows], dtype=np.float64)
    names = ["intercept"]
    cols = [np.ones(len(rows), dtype=np.float64)]
    for col in design.continuous:
        names.append(col)
        cols.append(np.array([float(r[col]) for r in rows], dtype=np.float64))
    for col, ref in design.nominal.items():
        values = [r[col] for r in rows]
        levels, indicators = dummy_code(values, ref)
        for lv, ind in zip(levels, indicators):
            names.append(f"{col}[{lv}]")
            cols.append(np.array(ind, dtype=np.float64))
    return np.column_stack(cols), y, names


# ---------------------------------------------------------------------------
# OLS


@dataclass(frozen=True)
class Coefficient:
    name: str
    estimate: float
    std_error: float
    t: float
    p: float


@dataclass(frozen=True)
class RegressionResult:
    coefficients: tuple[Coefficient, ...]
    f_stat: float
    f_p: float
    r_squared: float
    adj_r_squared: float
    n: int
    df_resid: int

    def coef(self, name: str) -> Coefficient:
        for c in self.coefficients:
            if c.name == name:
                return c
        raise KeyError(name)


def _collinear_columns(x: np.ndarray, names: list[str]) -> list[str]:
    # Columns whose QR pivot is (nearly) zero relative to the largest.
    r = np.linalg.qr(x, mode="r")
    diag = np.abs(np.diag(r))
    tol = diag.max() * len(x) * np.finfo(float).eps
    return [names[i] for i in range(len(names)) if diag[i] <= tol]


def ols_fit(design: DesignSpec, rows: list[dict]) -> RegressionResult:
    """Least squares with intercept, coefficient t-tests, overall F-test.

    Solved by QR decomposition; the explicit normal-equations route is
    reserved for independent verification in the tests.
    """
    x, y, names = build_design_matrix(design, rows)
    n, p = x.shape
    if n <= p:
        raise ValueError(f"n={n} rows cannot identify {p} parameters")
    if np.linalg.matrix_rank(x) < p:
        bad = _collinear_columns(x, names)
        raise ValueError(f"design matrix is rank deficient; collinear columns: {bad}")

    q, r = np.linalg.qr(x, mode="reduced")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - x @ beta
    rss = float(resid @ resid)
    df_resid = n - p
    sigma2 = rss / df_resid

    r_inv = np.linalg.solve(r, np.eye(p))
    cov = sigma2 * (r_inv @ r_inv.T)
    se = np.sqrt(np.diag(cov))

    coefs = []
    for i, name in enumerate(names):
        t = beta[i] / se[i]
        coefs.append(
            Coefficient(
                name=name,
                estimate=float(beta[i]),
                std_error=float(se[i]),
                t=float(t),
                p=2.0 * student_t_sf(abs(float(t)), df_resid),
            )
        )

    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        raise ValueError("outcome has zero variance")
    r2 = 1.0 - rss / tss
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / df_resid
    df_model = p - 1
    if df_model > 0:
        f_stat = ((tss - rss) / df_model) / sigma2
        f_p = f_sf(f_stat, df_model, df_resid)
    else:
        f_stat, f_p = float("nan"), 1.0
    return RegressionResult(
        coefficients=tuple(coefs),
        f_stat=float(f_stat),
        f_p=float(f_p),
        r_squared=float(r2),
        adj_r_squared=float(adj_r2),
        n=n,
        df_resid=df_resid,
    )


def effect_size_tier(adj_r_squared: float) -> str:
    """Effect-size label from adjusted R-squared."""
    if adj_r_squared >= 0.40:
        return "moderate"
    if adj_r_squared >= 0.30:
        return "medium"
    return "small"


# ---------------------------------------------------------------------------
# t-tests and group summaries


@dataclass(frozen=True)
class TTestResult:
    mean: float
    std_error: float
    t: float
    df: int
    p: float
    n: int


def one_sample_ttest(values, mu0: float = 0.0) -> TTestResult:
    """Two-sided one-sample t-test against mu0."""
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if n < 2:
        raise ValueError(f"need n >= 2 values, got {n}")
    mean = float(v.mean())
    s = float(v.std(ddof=1))
    if s == 0.0:
        raise ValueError("degenerate sample: zero variance")
    se = s / math.sqrt(n)
    t = (mean - mu0) / se
    df = n - 1
    return TTestResult(
        mean=mean,
        std_error=se,
        t=float(t),
        df=df,
        p=2.0 * student_t_sf(abs(float(t)), df),
        n=n,
    )


def group_mean_stderr(records, key_fn, value_fn=lambda rec: rec.value) -> dict:
    """Per-group mean and standard error of the mean.

    Standard error is None for singleton groups.
    """
    groups: dict = {}
    for rec in records:
        groups.setdefault(key_fn(rec), []).append(value_fn(rec))
    out = {}
    for key in sorted(groups):
        v = np.asarray(groups[key], dtype=np.float64)
        if v.size == 1:
            out[key] = (float(v[0]), None)
        else:
            out[key] = (float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)))
    return out
