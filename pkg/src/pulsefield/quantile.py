"""Quantile transforms and the total-variation Lyapunov distance.

A phase density rho on [0, 2*pi] with unit mass induces a cumulative
distribution P, a quantile function Q = P^{-1} mapping oscillator index
phi in [0, 1] to phase, and a quantile density q = dQ/dphi = 1/rho(Q(phi)).
The Lyapunov functional used throughout is the L1 distance between quantile
densities,

    V = integral_0^1 |q - q_ref| dphi,   0 <= V <= 4*pi,

whose discrete analog for N sorted phases (last entry 2*pi) is

    V_N = |t_1 - s_1| + sum_{k=1}^{N-2} |(t_k - t_{k+1}) - (s_k - s_{k+1})|
          + |t_{N-1} - s_{N-1}|.

Quantile densities are represented piecewise-constant on the knots phi_i =
P(theta_i), with segment value dtheta / dP.  With that representation the
integral of q over [0, 1] is exactly 2*pi, so the bound

    V <= 4*pi - 2*min(q, q_ref)

holds exactly (not merely up to quadrature error), which is what the
blow-up monitor relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


class QuantileDegenerateError(ValueError):
    """Raised when a transform on a density with zero plateaus is required."""


@dataclass(frozen=True)
class QuantileProfile:
    """Sampled quantile description of one density.

    ``phi`` are the knots P(theta_i) (increasing, phi[0]=0, phi[-1]=1),
    ``Q`` the phases at the knots, ``q_seg`` the piecewise-constant quantile
    density on each knot interval and ``q_node`` the pointwise reciprocal
    1/rho at the knots (used for the q * rho(Q) = 1 identity).
    """

    phi: np.ndarray
    Q: np.ndarray
    q_seg: np.ndarray
    q_node: np.ndarray
    degenerate: bool = False

    @property
    def q_min(self) -> float:
        return float(self.q_seg.min())

    def Q_at(self, phi):
        """Quantile function by monotone piecewise-linear inversion."""
        return np.interp(phi, self.phi, self.Q)

    def q_at(self, phi):
        """Piecewise-constant quantile density at the given indices."""
        idx = np.clip(np.searchsorted(self.phi, phi, side="right") - 1,
                      0, self.q_seg.size - 1)
        return self.q_seg[idx]


def quantile_transform(field, rho=None) -> QuantileProfile:
    """Quantile profile of a density given as a field object or (theta, rho).

    P is the normalized cumulative trapezoid of rho, Q its piecewise-linear
    inverse on the grid knots.  Densities with zero plateaus produce a
    profile flagged degenerate (Q still follows the infimum convention
    through ``Q_at``, but q is unusable there).
    """
    if rho is None:
        theta = np.asarray(field.theta, dtype=float)
        rho = np.asarray(field.rho, dtype=float)
    else:
        theta = np.asarray(field, dtype=float)
        rho = np.asarray(rho, dtype=float)
    if theta.ndim != 1 or theta.shape != rho.shape or theta.size < 2:
        raise ValueError("need matching 1-D theta and rho arrays")
    if np.any(rho < 0.0):
        raise ValueError("density must be nonnegative")

    dP = 0.5 * (rho[1:] + rho[:-1]) * np.diff(theta)
    total = float(dP.sum())
    if total <= 0.0:
        raise QuantileDegenerateError("density has zero mass")
    phi = np.concatenate([[0.0], np.cumsum(dP)]) / total
    phi[-1] = 1.0

    dphi = np.diff(phi)
    degenerate = bool(np.any(dphi <= 0.0))
    with np.errstate(divide="ignore"):
        q_seg = np.where(dphi > 0.0, np.diff(theta) / np.where(dphi > 0.0, dphi, 1.0), np.inf)
        q_node = np.where(rho > 0.0, total / np.where(rho > 0.0, rho, 1.0), np.inf)
    return QuantileProfile(phi, theta.copy(), q_seg, q_node, degenerate)


def _as_profile(obj) -> QuantileProfile:
    if isinstance(obj, QuantileProfile):
        return obj
    ref = getattr(obj, "rho_star", obj)  # StationaryState carries its density here
    return quantile_transform(ref)


def lyapunov_tv(state, reference) -> float:
    """Total-variation Lyapunov distance V = integral |q - q_ref| dphi.

    Both arguments may be density fields, quantile profiles or stationary
    states.  The segment values of both profiles are compared on the union
    of their knots, where the piecewise-constant difference is integrated
    exactly; the result is symmetric to machine precision and lies in
    [0, 4*pi].
    """
    a = _as_profile(state)
    b = _as_profile(reference)
    if a.degenerate or b.degenerate:
        raise QuantileDegenerateError("quantile density undefined on a zero plateau")
    v, _ = _tv_and_qmin(a, b)
    return v


def _tv_and_qmin(a: QuantileProfile, b: QuantileProfile) -> tuple[float, float]:
    knots = np.union1d(a.phi, b.phi)
    mid = 0.5 * (knots[1:] + knots[:-1])
    ia = np.clip(np.searchsorted(a.phi, mid, side="right") - 1, 0, a.q_seg.size - 1)
    ib = np.clip(np.searchsorted(b.phi, mid, side="right") - 1, 0, b.q_seg.size - 1)
    v = float(np.sum(np.abs(a.q_seg[ia] - b.q_seg[ib]) * np.diff(knots)))
    return v, min(a.q_min, b.q_min)


def lyapunov_tv_with_qmin(state, reference) -> tuple[float, float]:
    """V together with min(q, q_ref); the pair the trajectory logger records."""
    a = _as_profile(state)
    b = _as_profile(reference)
    if a.degenerate or b.degenerate:
        raise QuantileDegenerateError("quantile density undefined on a zero plateau")
    return _tv_and_qmin(a, b)


def quantile_l2(state, reference) -> float:
    """L2 distance between quantile densities (the rejected candidate norm)."""
    a = _as_profile(state)
    b = _as_profile(reference)
    knots = np.union1d(a.phi, b.phi)
    mid = 0.5 * (knots[1:] + knots[:-1])
    ia = np.clip(np.searchsorted(a.phi, mid, side="right") - 1, 0, a.q_seg.size - 1)
    ib = np.clip(np.searchsorted(b.phi, mid, side="right") - 1, 0, b.q_seg.size - 1)
    return float(np.sqrt(np.sum((a.q_seg[ia] - b.q_seg[ib]) ** 2 * np.diff(knots))))


def density_l1(theta, rho, rho_ref) -> float:
    """Plain L1 distance between densities in phase space (control quantity)."""
    return float(np.trapezoid(np.abs(np.asarray(rho) - np.asarray(rho_ref)), theta))


def discrete_lyapunov(phases, phases_ref) -> float:
    """Distance between two sorted firing configurations (last entry 2*pi).

    The boundary terms pin both ends; the interior sum compares consecutive
    phase gaps.  For two oscillators this collapses to 2*|t_1 - s_1|.
    """
    t = np.asarray(phases, dtype=float)
    s = np.asarray(phases_ref, dtype=float)
    if t.shape != s.shape or t.ndim != 1 or t.size < 2:
        raise ValueError("need two equal-length 1-D phase vectors of size >= 2")
    for name, v in (("phases", t), ("phases_ref", s)):
        if np.any(np.diff(v) < -1e-12):
            raise ValueError(f"{name} must be sorted ascending")
        if abs(v[-1] - TWO_PI) > 1e-9:
            raise ValueError(f"{name} must end at 2*pi")
    gaps = np.diff(t)[:-1] - np.diff(s)[:-1]
    return float(abs(t[0] - s[0]) + np.abs(gaps).sum() + abs(t[-2] - s[-2]))
