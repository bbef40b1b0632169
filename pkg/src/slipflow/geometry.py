"""Obstacle boundary curves and the tubular (t1, t2) coordinate map.

The obstacle is star-shaped about the origin and described by a radius
function rho(theta).  Arc length t1 runs counter-clockwise, the unit normal
``n`` points away from the obstacle into the fluid and ``tau`` is the
counter-clockwise tangent.  Curvature is signed so that
``|p_{,t1}| = 1 + t2 * chi``; a convex obstacle has ``chi > 0``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

TWO_PI = 2.0 * np.pi


class GeometryError(ValueError):
    """Invalid or degenerate obstacle geometry."""


class RadiusFunction:
    """Smooth positive 2*pi-periodic radius rho(theta) with derivatives.

    Derivatives come from a truncated Fourier series fitted to dense samples,
    which is spectrally accurate for the analytic shapes used here.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], n_fit: int = 1024,
                 label: str = "custom"):
        self.fn = fn
        self.label = label
        theta = TWO_PI * np.arange(n_fit) / n_fit
        values = np.asarray(fn(theta), dtype=float) * np.ones_like(theta)
        if not np.all(np.isfinite(values)) or values.min() <= 0.0:
            raise GeometryError("radius function must be finite and strictly positive")
        coef = np.fft.rfft(values) / n_fit
        coef[1:] *= 2.0
        if n_fit % 2 == 0:
            coef[-1] /= 2.0
        significant = np.nonzero(np.abs(coef) > 1e-15 * np.abs(coef[0]))[0]
        keep = int(significant.max()) + 1 if significant.size else 1
        keep = min(keep, n_fit // 2 - 1)
        self._modes = np.arange(keep)
        self._coef = coef[:keep]

    @classmethod
    def from_fourier(cls, cos_coeffs, sin_coeffs=()) -> "RadiusFunction":
        a = np.asarray(cos_coeffs, dtype=float)
        b = np.zeros_like(a) if len(sin_coeffs) == 0 else np.asarray(sin_coeffs, dtype=float)
        m = max(len(a), len(b))
        a = np.pad(a, (0, m - len(a)))
        b = np.pad(b, (0, m - len(b)))

        def rho(theta):
            k = np.arange(m)[:, None]
            t = np.atleast_1d(theta)[None, :]
            out = (a[:, None] * np.cos(k * t) + b[:, None] * np.sin(k * t)).sum(axis=0)
            return out.reshape(np.shape(theta))

        return cls(rho, label="fourier")

    def __call__(self, theta, deriv: int = 0) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        flat, inverse = np.unique(theta.ravel(), return_inverse=True)
        c = self._coef * (1j * self._modes) ** deriv
        z = np.exp(1j * flat)
        acc = np.zeros(flat.shape, dtype=complex)
        for ck in c[::-1]:  # Horner in z = exp(i theta)
            acc = acc * z + ck
        return acc.real[inverse].reshape(theta.shape)

    def max_radius(self) -> float:
        theta = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
        return float(self(theta).max())

    def min_radius(self) -> float:
        theta = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
        return float(self(theta).min())


def circle(r: float) -> RadiusFunction:
    if r <= 0:
        raise GeometryError(f"circle radius must be positive, got {r}")
    return RadiusFunction(lambda t: np.full_like(np.asarray(t, dtype=float), r), label="circle")


def ellipse(a: float, b: float) -> RadiusFunction:
    """Polar radius of the ellipse x = a cos t, y = b sin t."""
    if a <= 0 or b <= 0:
        raise GeometryError(f"ellipse semi-axes must be positive, got {a}, {b}")
    return RadiusFunction(
        lambda t: a * b / np.sqrt((b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2),
        label="ellipse",
    )


def radius_from_config(geom: dict) -> RadiusFunction:
    kind = geom.get("type")
    if kind == "circle":
        return circle(float(geom["r"]))
    if kind == "ellipse":
        return ellipse(float(geom["a"]), float(geom["b"]))
    if kind == "fourier":
        return RadiusFunction.from_fourier(geom["cos"], geom.get("sin", ()))
    raise GeometryError(f"unknown geometry type {kind!r}")


@dataclass(frozen=True)
class BoundaryCurve:
    """Closed obstacle boundary with a unit-speed arc-length parameterization."""

    radius: RadiusFunction
    length: float
    samples: np.ndarray
    _speed_coef: np.ndarray = field(repr=False)

    # --- theta parameterization -------------------------------------------
    def point_at_theta(self, theta):
        rho = self.radius(theta)
        return np.stack([rho * np.cos(theta), rho * np.sin(theta)])

    def derivative_at_theta(self, theta, order: int = 1):
        """d^k X / d theta^k for X(theta) = rho(theta) e_r(theta)."""
        theta = np.asarray(theta, dtype=float)
        out = np.zeros((2,) + theta.shape)
        for k in range(order + 1):
            binom = _binom(order, k)
            rk = self.radius(theta, k)
            m = order - k
            out[0] += binom * rk * _cos_deriv(theta, m)
            out[1] += binom * rk * _sin_deriv(theta, m)
        return out

    def speed_at_theta(self, theta):
        return np.hypot(self.radius(theta), self.radius(theta, 1))

    def tangent_at_theta(self, theta):
        d = self.derivative_at_theta(theta, 1)
        return d / np.hypot(d[0], d[1])

    def normal_at_theta(self, theta):
        tau = self.tangent_at_theta(theta)
        return np.stack([tau[1], -tau[0]])

    def curvature_at_theta(self, theta):
        r0, r1, r2 = self.radius(theta), self.radius(theta, 1), self.radius(theta, 2)
        return (r0 ** 2 + 2.0 * r1 ** 2 - r0 * r2) / (r0 ** 2 + r1 ** 2) ** 1.5

    def t1_of_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        turns = np.floor(theta / TWO_PI)
        base = theta - turns * TWO_PI
        k = np.arange(1, len(self._speed_coef))
        c = self._speed_coef[1:]
        periodic = (np.exp(1j * np.multiply.outer(base, k)) - 1.0) * (c / (1j * k))
        s = self.length / TWO_PI * base + periodic.real.sum(axis=-1)
        return s + turns * self.length

    def theta_of_t1(self, t1, tol: float = 1e-14):
        t1 = np.asarray(t1, dtype=float)
        theta = TWO_PI * t1 / self.length
        for _ in range(50):
            step = (self.t1_of_theta(theta) - t1) / self.speed_at_theta(theta)
            theta = theta - step
            if np.max(np.abs(step), initial=0.0) < tol:
                break
        return theta

    # --- arc-length parameterization ---------------------------------------
    def point(self, t1):
        return self.point_at_theta(self.theta_of_t1(t1))

    def tangent(self, t1):
        return self.tangent_at_theta(self.theta_of_t1(t1))

    def normal(self, t1):
        return self.normal_at_theta(self.theta_of_t1(t1))

    def curvature(self, t1):
        return self.curvature_at_theta(self.theta_of_t1(t1))

    def unit_speed_error(self, h: float = 1e-5) -> float:
        """Max deviation of |s'(t1)| from one at the samples (central differences)."""
        d = (self.point(self.samples + h) - self.point(self.samples - h)) / (2 * h)
        return float(np.max(np.abs(np.hypot(d[0], d[1]) - 1.0)))

    def closure_error(self) -> float:
        return float(np.linalg.norm(self.point(0.0) - self.point(self.length)))

    def dense_polyline(self, n: int = 4096):
        theta = TWO_PI * np.arange(n) / n
        return theta, self.point_at_theta(theta)

    def foot_point(self, x, y, iters: int = 30):
        """Closest boundary parameter theta for each point (Newton on the foot-point condition)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        theta_d, pts = self.dense_polyline()
        tree = _tree_cache(self, pts)
        _, idx = tree.query(np.column_stack([x.ravel(), y.ravel()]))
        theta = theta_d[idx].reshape(x.shape)
        for _ in range(iters):
            X = self.point_at_theta(theta)
            d1 = self.derivative_at_theta(theta, 1)
            d2 = self.derivative_at_theta(theta, 2)
            gx, gy = X[0] - x, X[1] - y
            g = gx * d1[0] + gy * d1[1]
            dg = d1[0] ** 2 + d1[1] ** 2 + gx * d2[0] + gy * d2[1]
            dg = np.where(dg > 0, dg, d1[0] ** 2 + d1[1] ** 2)
            step = g / dg
            theta = theta - step
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return np.mod(theta, TWO_PI)

    def distance(self, x, y):
        theta = self.foot_point(x, y)
        X = self.point_at_theta(theta)
        return np.hypot(np.asarray(x) - X[0], np.asarray(y) - X[1])


def _tree_cache(curve: BoundaryCurve, pts) -> cKDTree:
    tree = curve.__dict__.get("_tree")
    if tree is None:
        tree = cKDTree(pts.T)
        object.__setattr__(curve, "_tree", tree)
    return tree


def _binom(n: int, k: int) -> int:
    from math import comb
    return comb(n, k)


def _cos_deriv(theta, m: int):
    return [np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t), np.sin][m % 4](theta)


def _sin_deriv(theta, m: int):
    return [np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)][m % 4](theta)


def arc_length_parameterize(radius_fn, n_samples: int = 256) -> BoundaryCurve:
    """Build the unit-speed parameterization of the boundary rho(theta) e_r(theta)."""
    if n_samples < 16:
        raise GeometryError("n_samples must be at least 16")
    radius = radius_fn if isinstance(radius_fn, RadiusFunction) else RadiusFunction(radius_fn)

    def speed(t):
        return float(np.hypot(radius(t), radius(t, 1)))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        length, _ = integrate.quad(speed, 0.0, TWO_PI, epsabs=1e-14, epsrel=1e-14, limit=400)

    n_fit = 1024
    theta = TWO_PI * np.arange(n_fit) / n_fit
    sp = np.hypot(radius(theta), radius(theta, 1))
    coef = np.fft.fft(sp) / n_fit
    half = n_fit // 2
    speed_coef = np.concatenate([[coef[0]], 2.0 * coef[1:half]])
    cut = np.nonzero(np.abs(speed_coef) > 1e-17 * abs(speed_coef[0]))[0].max() + 1
    speed_coef = speed_coef[:max(cut, 2)]

    samples = length * np.arange(n_samples) / n_samples
    return BoundaryCurve(radius=radius, length=float(length), samples=samples,
                         _speed_coef=speed_coef)


def curvature(curve: BoundaryCurve, t1):
    return curve.curvature(t1)


def max_abs_curvature(curve: BoundaryCurve) -> float:
    theta = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
    return float(np.max(np.abs(curve.curvature_at_theta(theta))))


def choose_zeta(curve: BoundaryCurve, cap: float = 0.5, max_tries: int = 40) -> float:
    """Strip half-width: ``cap / max|chi|``, shrunk until the sampled strip is injective."""
    zeta = cap / max_abs_curvature(curve)
    t1 = curve.length * np.arange(512) / 512
    for _ in range(max_tries):
        if _strip_is_injective(curve, zeta, t1):
            return float(zeta)
        zeta *= 0.8
    raise GeometryError("no strip width found for which the tubular map is injective")


def _strip_is_injective(curve: BoundaryCurve, zeta: float, t1) -> bool:
    _, poly = curve.dense_polyline(8192)
    tree = cKDTree(poly.T)
    theta = curve.theta_of_t1(t1)
    base = curve.point_at_theta(theta)
    nrm = curve.normal_at_theta(theta)
    chi = curve.curvature_at_theta(theta)
    if np.any(1.0 + zeta * chi <= 0.0):
        return False
    for frac in (0.25, 0.5, 0.75, 1.0):
        t2 = frac * zeta
        p = base + t2 * nrm
        d, _ = tree.query(p.T)
        if np.any(d < t2 * (1.0 - 1e-3)):
            return False
    return True


@dataclass(frozen=True)
class TubularMap:
    """p(t1, t2) = s(t1) + t2 n(s(t1)) on [0, L) x [0, zeta]."""

    curve: BoundaryCurve
    zeta: float

    def __call__(self, t1, t2):
        theta = self.curve.theta_of_t1(t1)
        return self.curve.point_at_theta(theta) + np.asarray(t2) * self.curve.normal_at_theta(theta)

    def jacobian(self, t1, t2):
        """Columns (p_{,t1}, p_{,t2}) = ((1 + t2 chi) tau, n)."""
        theta = self.curve.theta_of_t1(t1)
        tau = self.curve.tangent_at_theta(theta)
        scale = 1.0 + np.asarray(t2) * self.curve.curvature_at_theta(theta)
        return scale * tau, self.curve.normal_at_theta(theta)

    def inverse_jacobian(self, t1, t2):
        """Rows of (grad p)^{-1}: (tau / (1 + t2 chi), n)."""
        theta = self.curve.theta_of_t1(t1)
        tau = self.curve.tangent_at_theta(theta)
        scale = 1.0 + np.asarray(t2) * self.curve.curvature_at_theta(theta)
        return tau / scale, self.curve.normal_at_theta(theta)

    def inverse(self, x, y):
        """Return (t1, t2, inside).  ``inside`` is False off the strip (far field)."""
        theta = self.curve.foot_point(x, y)
        X = self.curve.point_at_theta(theta)
        n = self.curve.normal_at_theta(theta)
        t2 = (np.asarray(x) - X[0]) * n[0] + (np.asarray(y) - X[1]) * n[1]
        t1 = self.curve.t1_of_theta(theta)
        tol = 1e-12 * self.curve.length
        inside = (t2 >= -tol) & (t2 <= self.zeta + tol)
        return t1, t2, inside


def tubular_map(curve: BoundaryCurve, zeta: float | None = None) -> TubularMap:
    return TubularMap(curve, choose_zeta(curve) if zeta is None else float(zeta))
