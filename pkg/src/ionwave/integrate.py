"""Adaptive Runge-Kutta integration.

Two embedded pairs are provided:

``explicit_rk54``
    Dormand-Prince 5(4), FSAL, with its quartic continuous extension.
``esdirk``
    Kvaerno's stiffly accurate ESDIRK 5(4) with seven stages
    (gamma = 0.26). Implicit stages are solved by modified Newton with one
    LU factorisation of ``I - h*gamma*J`` per step. Dense output is cubic
    Hermite.

Both run under the same PI step-size controller and weighted RMS error
norm, ``sqrt(mean((e / (atol + rtol*max(|y|, |y_new|)))**2))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .model import TimeSeries

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    """Integration stopped early; ``last_time`` is the last accepted time."""

    def __init__(self, message: str, last_time: float, partial: TimeSeries | None = None):
        super().__init__(f"{message} (last valid t={last_time:.17g})")
        self.last_time = last_time
        self.partial = partial


class MaxStepsExceeded(IntegrationError):
    pass


class StepSizeTooSmall(IntegrationError):
    pass


class NonFiniteStateError(IntegrationError):
    def __init__(self, message: str, last_time: float, component: int,
                 partial: TimeSeries | None = None):
        super().__init__(f"{message}; first non-finite component index {component}",
                         last_time, partial)
        self.component = component


class NewtonConvergenceError(ArithmeticError):
    """Implicit stage did not converge; the step must be retried with smaller h."""


class SingularStageMatrix(ArithmeticError):
    pass


# --- tableaus ---------------------------------------------------------------

@dataclass(frozen=True)
class ButcherTableau:
    name: str
    A: np.ndarray
    b: np.ndarray
    b_hat: np.ndarray
    c: np.ndarray
    order: int
    embedded_order: int

    @property
    def stages(self) -> int:
        return self.b.size


def order_condition_residuals(A, b, c, order: int) -> dict[str, float]:
    """Residuals of the classical Runge-Kutta order conditions up to ``order`` (<= 5)."""
    A, b, c = (np.asarray(x, dtype=float) for x in (A, b, c))
    Ac = A @ c
    conds = {
        "b.1": (b.sum(), 1.0),
        "b.c": (b @ c, 1 / 2),
        "b.c2": (b @ c**2, 1 / 3),
        "b.Ac": (b @ Ac, 1 / 6),
        "b.c3": (b @ c**3, 1 / 4),
        "b.cAc": (b @ (c * Ac), 1 / 8),
        "b.Ac2": (b @ (A @ c**2), 1 / 12),
        "b.AAc": (b @ (A @ Ac), 1 / 24),
        "b.c4": (b @ c**4, 1 / 5),
        "b.c2Ac": (b @ (c**2 * Ac), 1 / 10),
        "b.cAc2": (b @ (c * (A @ c**2)), 1 / 15),
        "b.cAAc": (b @ (c * (A @ Ac)), 1 / 30),
        "b.(Ac)2": (b @ Ac**2, 1 / 20),
        "b.Ac3": (b @ (A @ c**3), 1 / 20),
        "b.AcAc": (b @ (A @ (c * Ac)), 1 / 40),
        "b.AAc2": (b @ (A @ (A @ c**2)), 1 / 60),
        "b.AAAc": (b @ (A @ (A @ Ac)), 1 / 120),
    }
    per_order = [1, 1, 2, 4, 9]
    keep = sum(per_order[:order])
    out = {k: abs(v - exact) for k, (v, exact) in list(conds.items())[:keep]}
    out["row_sums"] = float(np.max(np.abs(A.sum(axis=1) - c)))
    return out


def check_tableau(tab: ButcherTableau, tol: float = 1e-12) -> None:
    for weights, p, label in ((tab.b, tab.order, "b"), (tab.b_hat, tab.embedded_order, "b_hat")):
        bad = {k: r for k, r in order_condition_residuals(tab.A, weights, tab.c, p).items() if r > tol}
        if bad:
            raise AssertionError(f"{tab.name}: {label} violates order conditions {bad}")


def _dormand_prince() -> ButcherTableau:
    A = np.zeros((7, 7))
    A[1, :1] = [1 / 5]
    A[2, :2] = [3 / 40, 9 / 40]
    A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
    A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
    A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
    A[6, :6] = [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
    b = A[6].copy()
    b_hat = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
    c = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
    return ButcherTableau("dormand_prince_54", A, b, b_hat, c, 5, 4)


# quartic dense output of Dormand-Prince (Shampine's coefficients)
_DOPRI_DENSE = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


def _kvaerno5() -> ButcherTableau:
    # Kvaerno (BIT 44, 2004), ESDIRK 5(4) with 7 stages; both weights are
    # rows of A (stiffly accurate main and embedded solutions).
    g = 0.26
    A = np.zeros((7, 7))
    A[1, :2] = [g, g]
    A[2, :3] = [0.13, 0.84033320996790809, g]
    A[3, :4] = [0.22371961478320505, 0.47675532319799699, -0.06470895363112615, g]
    A[4, :5] = [0.16648564323248321, 0.10450018841591720, 0.03631482272098715,
                -0.13090704451073998, g]
    A[5, :6] = [0.13855640231268224, 0.0, -0.04245337201752043, 0.02446657898003141,
                0.61943039072480676, g]
    A[6, :7] = [0.13659751177640291, 0.0, -0.05496908796538376, -0.04118626728321046,
                0.62993304899016403, 0.06962479448202728, g]
    c = A.sum(axis=1)
    return ButcherTableau("kvaerno5", A, A[6].copy(), A[5].copy(), c, 5, 4)


DOPRI54 = _dormand_prince()
KVAERNO5 = _kvaerno5()
ESDIRK_GAMMA = KVAERNO5.A[1, 1]

# published coefficients carry ~17 digits; the order conditions hold to roundoff
check_tableau(DOPRI54)
check_tableau(KVAERNO5, tol=1e-13)


# --- settings ---------------------------------------------------------------

METHODS = ("explicit_rk54", "esdirk")


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-9
    atol: float = 1e-11
    h_init: float = 1e-3
    h_min: float = 1e-12
    h_max: float = 1.0
    max_steps: int = 1_000_000
    method: str = "explicit_rk54"
    safety: float = 0.9
    newton_max_iter: int = 10
    sampling: str = "auto"

    def __post_init__(self):
        if not (0 < self.rtol < 1):
            raise ValueError(f"rtol must lie in (0, 1), got {self.rtol}")
        if self.atol <= 0:
            raise ValueError(f"atol must be positive, got {self.atol}")
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.sampling not in ("auto", "dense", "land"):
            raise ValueError(f"sampling must be auto, dense or land, got {self.sampling!r}")

    @property
    def lands_on_samples(self) -> bool:
        """Whether steps end exactly on sample times instead of interpolating.

        ``auto`` lands for the implicit method, whose cubic Hermite
        interpolant is less accurate than its steps.
        """
        if self.sampling == "auto":
            return self.method == "esdirk"
        return self.sampling == "land"


def wrms_norm(err: np.ndarray, y_old: np.ndarray, y_new: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


# --- single steps -----------------------------------------------------------

def _rk_explicit(rhs, t, y, h, f0, tab=DOPRI54):
    """Stages of an explicit FSAL pair. Returns (y_new, K, err_vec)."""
    K = np.empty((tab.stages, y.size))
    K[0] = f0
    for i in range(1, tab.stages):
        yi = y + h * (tab.A[i, :i] @ K[:i])
        K[i] = rhs(t + tab.c[i] * h, yi)
    y_new = y + h * (tab.b @ K)
    err = h * ((tab.b - tab.b_hat) @ K)
    return y_new, K, err


def rk54_step(rhs, t: float, y, h: float, rtol: float = 1e-9, atol: float = 1e-11):
    """One Dormand-Prince step. Returns ``(y5, error_estimate)``.

    ``error_estimate`` is the weighted RMS norm of the embedded difference;
    a non-finite right-hand side yields ``inf``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    y = np.asarray(y, dtype=float)
    with np.errstate(all="ignore"):
        y_new, _, err = _rk_explicit(rhs, t, y, h, np.asarray(rhs(t, y), dtype=float))
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(err))):
            return y_new, math.inf
    return y_new, wrms_norm(err, y, y_new, rtol, atol)


NEWTON_TOL = 1e-2


class _Newton:
    """Modified Newton for the ESDIRK stage equations at fixed (t, h)."""

    def __init__(self, rhs, jac_matrix, h, rtol, atol, max_iter):
        self.rhs = rhs
        self.h_gamma = h * ESDIRK_GAMMA
        n = jac_matrix.shape[0]
        M = np.eye(n) - self.h_gamma * jac_matrix
        with np.errstate(all="ignore"):
            self.lu = lu_factor(M, check_finite=False)
        diag = np.abs(np.diag(self.lu[0]))
        if not np.all(np.isfinite(diag)) or diag.min() <= 1e-14 * max(diag.max(), 1.0):
            raise SingularStageMatrix(f"I - h*gamma*J is singular at h={h:.3e}")
        self.rtol, self.atol, self.max_iter = rtol, atol, max_iter
        self.iterations = 0
        self.eta = 1.0

    def solve(self, t, base, guess, y_scale):
        z = guess.copy()
        scale = self.atol + self.rtol * np.abs(y_scale)
        prev = None
        for it in range(self.max_iter):
            fz = self.rhs(t, z)
            res = z - base - self.h_gamma * fz
            dz = lu_solve(self.lu, -res, check_finite=False)
            z += dz
            self.iterations += 1
            norm = float(np.sqrt(np.mean((dz / scale) ** 2)))
            if not math.isfinite(norm):
                raise NewtonConvergenceError("non-finite Newton increment")
            if prev is not None:
                rate = norm / prev
                if rate >= 1.0:
                    raise NewtonConvergenceError(f"Newton diverging (rate {rate:.2f})")
                if rate > 0.5 and it >= 3:
                    raise NewtonConvergenceError(f"Newton contraction too slow (rate {rate:.2f})")
                self.eta = rate / (1.0 - rate)
            # remaining error ~ eta * |dz|; stop at 1% of the tolerance
            if self.eta * norm <= NEWTON_TOL:
                return z
            prev = norm
        raise NewtonConvergenceError(f"Newton did not converge in {self.max_iter} iterations")


def _esdirk(rhs, jac_matrix, t, y, h, f0, rtol, atol, max_iter, tab=KVAERNO5):
    """One Kvaerno5 step. Returns (y_new, err_vec, newton_iterations)."""
    newton = _Newton(rhs, jac_matrix, h, rtol, atol, max_iter)
    K = np.empty((tab.stages, y.size))
    K[0] = f0
    Z = y.copy()
    for i in range(1, tab.stages):
        base = y + h * (tab.A[i, :i] @ K[:i])
        guess = base + newton.h_gamma * K[i - 1]
        Z = newton.solve(t + tab.c[i] * h, base, guess, y)
        K[i] = (Z - base) / newton.h_gamma
        if i == tab.stages - 2:
            y_embedded = Z
    # stiffly accurate: the last stage value is the solution
    return Z, Z - y_embedded, newton.iterations


def finite_difference_jacobian(rhs, t, y, eps: float = 1e-7):
    y = np.asarray(y, dtype=float)
    J = np.empty((y.size, y.size))
    for j in range(y.size):
        step = eps * max(1.0, abs(y[j]))
        yp, ym = y.copy(), y.copy()
        yp[j] += step
        ym[j] -= step
        J[:, j] = (np.asarray(rhs(t, yp)) - np.asarray(rhs(t, ym))) / (2 * step)
    return J


def esdirk_step(rhs, jacobian, t: float, y, h: float, rtol: float = 1e-9, atol: float = 1e-11,
                max_iter: int = 10):
    """One ESDIRK 5(4) step. Returns ``(y_high, error_estimate)``.

    ``jacobian(t, y)`` returns the dense matrix d(rhs)/dy; ``None`` falls
    back to central finite differences. Raises
    :class:`NewtonConvergenceError` or :class:`SingularStageMatrix`.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    y = np.asarray(y, dtype=float)
    jac = jacobian(t, y) if jacobian is not None else finite_difference_jacobian(rhs, t, y)
    y_new, err, _ = _esdirk(rhs, np.asarray(jac, dtype=float), t, y, h,
                            np.asarray(rhs(t, y), dtype=float), rtol, atol, max_iter)
    return y_new, wrms_norm(err, y, y_new, rtol, atol)


# --- adaptive driver --------------------------------------------------------

@dataclass
class _Stats:
    n_steps: int = 0
    n_accepted: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    n_jac: int = 0
    n_lu: int = 0
    n_newton: int = 0
    n_newton_failures: int = 0

    def as_dict(self):
        return dict(self.__dict__)


def _hermite(y0, f0, y1, f1, h, theta):
    h00 = (1 + 2 * theta) * (1 - theta) ** 2
    h10 = theta * (1 - theta) ** 2
    h01 = theta**2 * (3 - 2 * theta)
    h11 = theta**2 * (theta - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def integrate(rhs, jacobian, y0, t_span, settings: IntegratorSettings | None = None,
              sample_times=None) -> TimeSeries:
    """Integrate ``dy/dt = rhs(t, y)`` and sample the state at ``sample_times``.

    Returns a :class:`TimeSeries` with the record ``"y"`` of shape
    ``(len(sample_times), len(y0))`` and the step statistics in ``stats``.
    Samples between step endpoints come from the method's dense output.
    """
    settings = settings or IntegratorSettings()
    t0, tf = float(t_span[0]), float(t_span[1])
    if not tf > t0:
        raise ValueError("t_span must be increasing")
    ts = np.array([t0, tf] if sample_times is None else sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("sample_times must be a non-empty 1-d sequence")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("sample_times must be strictly increasing")
    if ts[0] < t0 or ts[-1] > tf:
        raise ValueError("sample_times must lie within t_span")

    stats = _Stats()

    def f(t, y):
        stats.n_rhs += 1
        return np.asarray(rhs(t, y), dtype=float)

    implicit = settings.method == "esdirk"
    if implicit:
        if jacobian is None:
            def jac(t, y):
                stats.n_rhs += 2 * y.size
                return finite_difference_jacobian(rhs, t, y)
        else:
            jac = jacobian

    y = np.array(y0, dtype=float)
    out = np.full((ts.size, y.size), np.nan)
    next_sample = 0
    while next_sample < ts.size and ts[next_sample] == t0:
        out[next_sample] = y
        next_sample += 1

    def partial(t_last):
        mask = ts <= t_last
        return TimeSeries(ts[mask], {"y": out[mask]}, stats.as_dict())

    t = t0
    fy = f(t, y)
    h = min(max(settings.h_init, settings.h_min), settings.h_max, tf - t0)
    err_prev = 1e-4
    k_exp = 5.0  # embedded order + 1
    rtol, atol = settings.rtol, settings.atol

    land = settings.lands_on_samples
    while t < tf:
        if stats.n_steps >= settings.max_steps:
            raise MaxStepsExceeded(f"max_steps={settings.max_steps} exceeded", t, partial(t))
        stats.n_steps += 1
        h_proposal = h
        target = ts[next_sample] if land and next_sample < ts.size else tf
        if t + 1.01 * h >= target:
            h = target - t
        t_new = target if h == target - t else t + h

        failed = False
        with np.errstate(all="ignore"):
            try:
                if implicit:
                    stats.n_jac += 1
                    stats.n_lu += 1
                    y_new, err_vec, iters = _esdirk(f, np.asarray(jac(t, y), dtype=float), t, y, h,
                                                    fy, rtol, atol, settings.newton_max_iter)
                    stats.n_newton += iters
                    K = None
                else:
                    y_new, K, err_vec = _rk_explicit(f, t, y, h, fy)
                err = wrms_norm(err_vec, y, y_new, rtol, atol)
            except (NewtonConvergenceError, SingularStageMatrix) as exc:
                stats.n_newton_failures += 1
                log.debug("implicit stage failure at t=%.6g h=%.3e: %s", t, h, exc)
                failed = True
                err = math.inf

        if not failed and not (math.isfinite(err) and np.all(np.isfinite(y_new))):
            bad = int(np.flatnonzero(~np.isfinite(y_new))[0]) if not np.all(np.isfinite(y_new)) else -1
            stats.n_rejected += 1
            h *= 0.25
            if h < settings.h_min:
                raise NonFiniteStateError("non-finite state", t, bad, partial(t))
            continue

        if failed or err > 1.0:
            stats.n_rejected += 1
            factor = 0.5 if failed else max(0.2, settings.safety * err ** (-1.0 / k_exp))
            h *= factor
            if h < settings.h_min:
                raise StepSizeTooSmall(f"step size fell below h_min={settings.h_min:g}", t, partial(t))
            continue

        f_new = K[-1] if K is not None else f(t_new, y_new)
        while next_sample < ts.size and ts[next_sample] <= t_new:
            ts_k = ts[next_sample]
            if ts_k == t_new:
                out[next_sample] = y_new
            else:
                theta = (ts_k - t) / h
                if K is not None:
                    powers = np.cumprod(np.full(4, theta))
                    out[next_sample] = y + h * ((_DOPRI_DENSE @ powers) @ K)
                else:
                    out[next_sample] = _hermite(y, fy, y_new, f_new, h, theta)
            next_sample += 1

        stats.n_accepted += 1
        t, y, fy = t_new, y_new, f_new
        factor = settings.safety * max(err, 1e-10) ** (-0.7 / k_exp) * err_prev ** (0.4 / k_exp)
        factor = min(5.0, max(0.2, factor))
        err_prev = max(err, 1e-4)
        h_next = h * factor
        if h < h_proposal and factor >= 1.0:
            # step was shortened to land on a sample; keep the earlier proposal
            h_next = max(h_next, h_proposal)
        h = min(settings.h_max, max(settings.h_min, h_next))

    series = TimeSeries(ts, {"y": out}, stats.as_dict())
    log.info("%s: %d steps (%d accepted, %d rejected), %d rhs evals, %d newton iters",
             settings.method, stats.n_steps, stats.n_accepted, stats.n_rejected,
             stats.n_rhs, stats.n_newton)
    return series
