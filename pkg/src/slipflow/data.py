"""Named body forces and Fourier boundary data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FourierBoundary:
    """b(theta) = sum_k cos[k] cos(k theta) + sin[k] sin(k theta), k = 0, 1, ..."""

    cos: tuple = ()
    sin: tuple = ()

    def __call__(self, theta):
        theta = np.asarray(theta, float)
        out = np.zeros_like(theta)
        for k, a in enumerate(self.cos):
            out = out + a * np.cos(k * theta)
        for k, a in enumerate(self.sin):
            out = out + a * np.sin(k * theta)
        return out

    @property
    def is_zero(self) -> bool:
        return not any(self.cos) and not any(self.sin)


def zero_force(x, y):
    x = np.asarray(x, float)
    return np.zeros_like(x), np.zeros_like(x)


@dataclass(frozen=True)
class GaussianSwirl:
    """F = grad_perp(A exp(-|x - c|^2 / s^2))."""

    amplitude: float = 1.0
    center: tuple = (2.0, 0.0)
    width: float = 1.0

    def __call__(self, x, y):
        dx, dy = np.asarray(x) - self.center[0], np.asarray(y) - self.center[1]
        e = self.amplitude * np.exp(-(dx ** 2 + dy ** 2) / self.width ** 2)
        gx, gy = -2 * dx / self.width ** 2 * e, -2 * dy / self.width ** 2 * e
        return -gy, gx


@dataclass(frozen=True)
class RingMultipole:
    """F = grad_perp(A sin(k theta) exp(-((r - r0)/w)^2)).

    Net force and torque vanish for k >= 2, so the exterior field decays fast
    and truncation effects stay small.
    """

    amplitude: float = 20.0
    mode: int = 3
    r0: float = 1.6
    width: float = 0.5

    def __call__(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        k = self.mode
        e = np.exp(-((r - self.r0) / self.width) ** 2)
        h_r = self.amplitude * np.sin(k * th) * e * (-2 * (r - self.r0) / self.width ** 2)
        h_t = self.amplitude * k * np.cos(k * th) * e / r
        hx = h_r * np.cos(th) - h_t * np.sin(th)
        hy = h_r * np.sin(th) + h_t * np.cos(th)
        return -hy, hx


FORCES = {"zero": lambda **kw: zero_force, "gaussian_swirl": GaussianSwirl,
          "ring_multipole": RingMultipole}


def force_from_config(spec) -> object:
    """``"zero"`` or a table {name = ..., <parameters>}."""
    if spec is None or spec == "zero":
        return zero_force
    if isinstance(spec, str):
        name, params = spec, {}
    else:
        params = dict(spec)
        name = params.pop("name")
    if name not in FORCES:
        raise ValueError(f"unknown body force {name!r}; choose from {sorted(FORCES)}")
    if "center" in params:
        params["center"] = tuple(params["center"])
    return FORCES[name](**params)


__all__ = ["FourierBoundary", "zero_force", "GaussianSwirl", "RingMultipole", "FORCES",
           "force_from_config"]
