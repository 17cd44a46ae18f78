"""Integrate-and-fire oscillator models and their phase-space description.

An integrate-and-fire oscillator carries a scalar state x that grows from a
lower threshold x_lo to an upper threshold x_hi under dx/dt = F(x) > 0 and
resets to x_lo on reaching x_hi (a "firing").  Rescaling the state so the
uncoupled oscillator moves at a constant phase velocity omega gives the
phase coordinate

    theta(x) = omega * integral_{x_lo}^{x} ds / F(s),   theta in [0, 2*pi],

with omega = 2*pi / integral dx/F.  The sensitivity of the phase to a small
state kick is the phase response curve

    Z(theta) = omega / F(x(theta)),

so monotone vector fields produce monotone response curves of the opposite
derivative sign.  Three constructors are provided:

* ``lif_model``        -- leaky integrate-and-fire, F(x) = S - gamma*x, with
                          closed-form phase map and Z(theta) = Z(0)*exp(gamma*theta/omega);
* ``tabulated_model``  -- any positive field given as (x, F) samples, handled
                          through monotone piecewise-cubic interpolation;
* ``homoclinic_model`` -- the near-homoclinic limit-cycle response curve
                          Z(theta) = C*omega*exp(2*pi*lam_u/omega)*exp(-lam_u*theta/omega),
                          which has no underlying scalar field.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .numerics import adaptive_simpson

TWO_PI = 2.0 * math.pi

# Sampling used for classification, extrema scans and tabulated phase maps.
DENSE_GRID_SIZE = 4097
QUAD_TOL = 1e-12
SIGN_DEAD_BAND = 1e-9


class ModelError(ValueError):
    """Invalid model construction or an operation outside a model's domain."""


class Monotonicity(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    NEUTRAL = "neutral"
    MIXED = "mixed"


class Curvature(enum.Enum):
    NONNEGATIVE = "nonnegative"
    NONPOSITIVE = "nonpositive"
    MIXED = "mixed"


@dataclass(frozen=True)
class CouplingSpec:
    """Impulsive coupling strength; K > 0 excitatory, K < 0 inhibitory."""

    K: float

    def __post_init__(self):
        if not math.isfinite(self.K):
            raise ModelError("coupling strength must be finite")


@dataclass(frozen=True)
class SignClassification:
    """Sign classes of Z' and Z'' from dense finite differences.

    A constant response curve has second derivative that is simultaneously
    >= 0 and <= 0; both flags are then true and ``curvature`` reports the
    nonnegative label.
    """

    monotonicity: Monotonicity
    curvature: Curvature
    curvature_nonneg: bool
    curvature_nonpos: bool


def natural_frequency(F, x_lo: float, x_hi: float, tol: float = QUAD_TOL) -> float:
    """omega = 2*pi / integral_{x_lo}^{x_hi} dx/F(x), by adaptive Simpson."""
    if not x_hi > x_lo:
        raise ModelError("need x_hi > x_lo")
    probe = np.linspace(x_lo, x_hi, 257)
    vals = np.asarray([F(float(x)) for x in probe], dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
        raise ModelError("vector field must be positive and finite on [x_lo, x_hi]")
    period = adaptive_simpson(lambda x: 1.0 / F(x), x_lo, x_hi, tol=tol)
    if not (math.isfinite(period) and period > 0.0):
        raise ModelError("non-integrable vector field")
    return TWO_PI / period


class OscillatorModel:
    """Immutable bundle of thresholds, field, frequency and response curve.

    Not constructed directly; use ``lif_model``, ``tabulated_model`` or
    ``homoclinic_model``.  All evaluation methods accept scalars or arrays
    and are pure, so instances can be shared freely across threads.
    """

    def __init__(self, kind, x_lo, x_hi, omega, F, phase_fn, state_inverse,
                 prc_fn, prc_deriv_fn, params):
        self.kind = kind
        self.x_lo = float(x_lo)
        self.x_hi = float(x_hi)
        self.omega = float(omega)
        self.F = F
        self._phase_fn = phase_fn
        self._state_inverse = state_inverse
        self._prc_fn = prc_fn
        self._prc_deriv_fn = prc_deriv_fn
        self.params = dict(params)
        cls = classify_monotonicity(self)
        self.monotonicity = cls.monotonicity
        self.curvature = cls.curvature
        self.classification = cls

    # -- phase map ----------------------------------------------------------

    def phase_of_state(self, x):
        """Phase theta(x) on [0, 2*pi]; strictly increasing in x."""
        if self.F is None:
            raise ModelError(f"{self.kind} model has no vector field")
        xa = np.asarray(x, dtype=float)
        if np.any(xa < self.x_lo - 1e-12) or np.any(xa > self.x_hi + 1e-12):
            raise ModelError("state outside [x_lo, x_hi]")
        xa = np.clip(xa, self.x_lo, self.x_hi)
        out = self._phase_fn(xa)
        return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out

    def state_of_phase(self, theta):
        """Inverse of the phase map by bisection on the monotone theta(x)."""
        if self.F is None:
            raise ModelError(f"{self.kind} model has no vector field")
        ta = np.asarray(theta, dtype=float)
        if np.any(ta < -1e-12) or np.any(ta > TWO_PI + 1e-12):
            raise ModelError("phase outside [0, 2*pi]")
        ta = np.clip(ta, 0.0, TWO_PI)
        lo = np.full_like(ta, self.x_lo)
        hi = np.full_like(ta, self.x_hi)
        # vectorized bisection: theta(x) is strictly increasing
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            too_low = self._phase_fn(mid) < ta
            lo = np.where(too_low, mid, lo)
            hi = np.where(too_low, hi, mid)
        out = 0.5 * (lo + hi)
        out = np.where(ta <= 0.0, self.x_lo, out)
        out = np.where(ta >= TWO_PI, self.x_hi, out)
        return float(out) if np.isscalar(theta) or np.ndim(theta) == 0 else out

    # -- response curve ------------------------------------------------------

    def prc(self, theta):
        """Z(theta); equals omega / F(x(theta)) for integrate-and-fire kinds."""
        ta = np.asarray(theta, dtype=float)
        out = self._prc_fn(ta)
        return float(out) if np.isscalar(theta) or np.ndim(theta) == 0 else out

    def prc_deriv(self, theta):
        """dZ/dtheta; for integrate-and-fire kinds this is -F'(x(theta))/F(x(theta))."""
        ta = np.asarray(theta, dtype=float)
        out = self._prc_deriv_fn(ta)
        return float(out) if np.isscalar(theta) or np.ndim(theta) == 0 else out

    def kz_prime_extrema(self, K: float, n: int = DENSE_GRID_SIZE):
        """(min, max) of K * Z'(theta) over a dense grid on [0, 2*pi]."""
        grid = np.linspace(0.0, TWO_PI, n)
        vals = K * self.prc_deriv(grid)
        return float(vals.min()), float(vals.max())

    def __repr__(self):
        ps = ", ".join(f"{k}={v:.6g}" for k, v in self.params.items())
        return f"OscillatorModel({self.kind}, omega={self.omega:.6g}, {ps})"


def prc_eval(model: OscillatorModel, theta):
    """Evaluate the phase response curve Z at the given phase(s)."""
    return model.prc(theta)


def phase_of_state(model: OscillatorModel, x):
    return model.phase_of_state(x)


def state_of_phase(model: OscillatorModel, theta):
    return model.state_of_phase(theta)


# -- constructors -------------------------------------------------------------


def lif_model(S: float, gamma: float, x_lo: float = 0.0, x_hi: float = 1.0) -> OscillatorModel:
    """Leaky integrate-and-fire oscillator dx/dt = S - gamma*x on [x_lo, x_hi].

    Requires S - gamma*x_hi > 0 so the field stays positive up to threshold.
    Every map has a closed form:

        omega       = 2*pi*gamma / log((S - gamma*x_lo)/(S - gamma*x_hi))
        theta(x)    = (omega/gamma) * log((S - gamma*x_lo)/(S - gamma*x))
        Z(theta)    = (omega/(S - gamma*x_lo)) * exp(gamma*theta/omega)
    """
    if gamma == 0.0:
        raise ModelError("gamma must be nonzero; use tabulated_model for a constant field")
    if not x_hi > x_lo:
        raise ModelError("need x_hi > x_lo")
    F_lo = S - gamma * x_lo
    F_hi = S - gamma * x_hi
    if F_lo <= 0.0 or F_hi <= 0.0:
        raise ModelError("field S - gamma*x must be positive on [x_lo, x_hi]")
    omega = TWO_PI * gamma / math.log(F_lo / F_hi)

    def F(x):
        return S - gamma * np.asarray(x, dtype=float)

    def phase_fn(x):
        return (omega / gamma) * np.log(F_lo / (S - gamma * x))

    def prc_fn(theta):
        return (omega / F_lo) * np.exp(gamma * theta / omega)

    def prc_deriv_fn(theta):
        return (gamma / omega) * prc_fn(theta)

    return OscillatorModel("lif", x_lo, x_hi, omega, F, phase_fn, None,
                           prc_fn, prc_deriv_fn,
                           {"S": S, "gamma": gamma, "x_lo": x_lo, "x_hi": x_hi})


def tabulated_model(x_samples, F_samples=None, *, x_lo=None, x_hi=None,
                    n_samples: int = 1025) -> OscillatorModel:
    """Oscillator with a field given by samples or by a callable.

    ``tabulated_model(x, F_values)`` interpolates the samples; passing a
    callable as the first argument samples it on ``n_samples`` points over
    [x_lo, x_hi].  Interpolation is monotone piecewise cubic (PCHIP), which
    keeps the sign of dF/dx and hence the monotonicity class of Z intact.
    The phase map is precomputed on a dense cumulative-quadrature table.
    """
    if callable(x_samples):
        if x_lo is None or x_hi is None:
            raise ModelError("sampling a callable field needs x_lo and x_hi")
        xs = np.linspace(float(x_lo), float(x_hi), max(int(n_samples), 1025))
        Fs = np.asarray([x_samples(float(x)) for x in xs], dtype=float)
    else:
        xs = np.asarray(x_samples, dtype=float)
        Fs = np.asarray(F_samples, dtype=float)
        if xs.ndim != 1 or xs.shape != Fs.shape or xs.size < 2:
            raise ModelError("need matching 1-D x and F sample arrays")
        order = np.argsort(xs)
        xs, Fs = xs[order], Fs[order]
        if np.any(np.diff(xs) <= 0.0):
            raise ModelError("x samples must be strictly increasing")
    if np.any(~np.isfinite(Fs)) or np.any(Fs <= 0.0):
        raise ModelError("vector field must be positive and finite on [x_lo, x_hi]")

    x_lo, x_hi = float(xs[0]), float(xs[-1])
    F_interp = PchipInterpolator(xs, Fs, extrapolate=True)
    dF = F_interp.derivative()

    # cumulative table of integral dx/F on a dense grid; per-cell adaptive
    # Simpson keeps the absolute error of the total below QUAD_TOL
    xg = np.linspace(x_lo, x_hi, DENSE_GRID_SIZE)
    inv = lambda x: 1.0 / float(F_interp(x))
    cell_tol = QUAD_TOL / (DENSE_GRID_SIZE - 1)
    cells = [adaptive_simpson(inv, xg[i], xg[i + 1], tol=cell_tol, max_depth=30)
             for i in range(DENSE_GRID_SIZE - 1)]
    cum = np.concatenate([[0.0], np.cumsum(cells)])
    omega = TWO_PI / cum[-1]
    theta_table = omega * cum
    theta_table[-1] = TWO_PI
    phase_interp = PchipInterpolator(xg, theta_table)
    state_interp = PchipInterpolator(theta_table, xg)

    def F(x):
        return F_interp(np.asarray(x, dtype=float))

    def phase_fn(x):
        return np.clip(phase_interp(x), 0.0, TWO_PI)

    def prc_fn(theta):
        x = state_interp(np.clip(theta, 0.0, TWO_PI))
        return omega / F_interp(x)

    def prc_deriv_fn(theta):
        x = state_interp(np.clip(theta, 0.0, TWO_PI))
        return -dF(x) / F_interp(x)

    return OscillatorModel("tabulated", x_lo, x_hi, omega, F, phase_fn, state_interp,
                           prc_fn, prc_deriv_fn,
                           {"x_lo": x_lo, "x_hi": x_hi, "n_samples": xs.size})


def homoclinic_model(C: float, lambda_u: float, omega: float) -> OscillatorModel:
    """Response curve of a limit cycle near a homoclinic bifurcation.

    Z(theta) = C*omega*exp(2*pi*lambda_u/omega) * exp(-lambda_u*theta/omega):
    monotone decreasing with nonnegative curvature.  There is no scalar state
    model behind it, so the phase map operations are unavailable.
    """
    if C <= 0.0 or lambda_u <= 0.0 or omega <= 0.0:
        raise ModelError("homoclinic parameters C, lambda_u, omega must be positive")
    amp = C * omega * math.exp(TWO_PI * lambda_u / omega)

    def prc_fn(theta):
        return amp * np.exp(-lambda_u * theta / omega)

    def prc_deriv_fn(theta):
        return -(lambda_u / omega) * prc_fn(theta)

    return OscillatorModel("homoclinic", 0.0, 1.0, omega, None, None, None,
                           prc_fn, prc_deriv_fn,
                           {"C": C, "lambda_u": lambda_u})


def homoclinic_prc(C: float, lambda_u: float, omega: float) -> OscillatorModel:
    """Alias for ``homoclinic_model``."""
    return homoclinic_model(C, lambda_u, omega)


def load_field_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a CSV of (x, F(x)) pairs with header ``x,F``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:2]] != ["x", "F"]:
        raise ModelError(f"{path}: expected CSV header 'x,F'")
    data = np.asarray([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
    if data.shape[0] < 2:
        raise ModelError(f"{path}: need at least two samples")
    return data[:, 0], data[:, 1]


# -- classification ------------------------------------------------------------


def classify_monotonicity(model: OscillatorModel, n: int = DENSE_GRID_SIZE,
                          dead_band: float = SIGN_DEAD_BAND) -> SignClassification:
    """Sign classes of Z' and Z'' via central differences on a dense grid.

    Derivative estimates smaller than ``dead_band * max|Z|`` count as zero so
    that a constant response curve classifies as neutral instead of picking
    up rounding noise.
    """
    grid = np.linspace(0.0, TWO_PI, n)
    z = np.asarray(model.prc(grid), dtype=float)
    h = grid[1] - grid[0]
    band = dead_band * float(np.max(np.abs(z)))

    z1 = (z[2:] - z[:-2]) / (2.0 * h)
    z2 = (z[2:] - 2.0 * z[1:-1] + z[:-2]) / (h * h)

    up = bool(np.any(z1 > band))
    down = bool(np.any(z1 < -band))
    if up and down:
        mono = Monotonicity.MIXED
    elif up:
        mono = Monotonicity.INCREASING
    elif down:
        mono = Monotonicity.DECREASING
    else:
        mono = Monotonicity.NEUTRAL

    nonneg = not bool(np.any(z2 < -band))
    nonpos = not bool(np.any(z2 > band))
    if nonneg:
        curv = Curvature.NONNEGATIVE
    elif nonpos:
        curv = Curvature.NONPOSITIVE
    else:
        curv = Curvature.MIXED

    return SignClassification(mono, curv, nonneg, nonpos)
