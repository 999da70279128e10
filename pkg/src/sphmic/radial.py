"""Radial functions ``b_n(kr)`` for the supported array boundaries.

Each boundary model is a small frozen dataclass; :func:`radial_bn` dispatches
on its type. All functions broadcast over ``n`` (int or int array) and
``r``/``k`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harmonics import spherical_hn_table, spherical_jn_table

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class OpenPressure:
    """Pressure microphones on an open (acoustically transparent) sphere."""

    tag = "open"


@dataclass(frozen=True)
class RigidSphere:
    """Pressure microphones on or around a rigid sphere of radius ``r0``."""

    r0: float
    tag = "rigid"

    def __post_init__(self):
        if not (np.isfinite(self.r0) and self.r0 > 0):
            raise ValueError(f"rigid sphere radius must be positive, got {self.r0}")


@dataclass(frozen=True)
class OpenCardioid:
    """Outward-facing first-order cardioid microphones on an open sphere."""

    tag = "cardioid"


@dataclass(frozen=True)
class DualSphere:
    """Two concentric open spheres with radii ``r`` and ``alpha * r``.

    The sphere used for each order and frequency is picked by a hard switch:
    the one with the larger Bessel magnitude.
    """

    alpha: float
    tag = "dual"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"dual-sphere ratio must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class FreeField:
    """Open-sphere response evaluated at each microphone's own radius.

    Covers spherical-shell and free-sampling layouts.
    """

    tag = "free"


BoundaryModel = OpenPressure | RigidSphere | OpenCardioid | DualSphere | FreeField

_BY_TAG = {
    "open": OpenPressure,
    "rigid": RigidSphere,
    "cardioid": OpenCardioid,
    "dual": DualSphere,
    "free": FreeField,
}


def boundary_to_dict(model: BoundaryModel) -> dict:
    out = {"type": model.tag}
    if isinstance(model, RigidSphere):
        out["r0"] = model.r0
    elif isinstance(model, DualSphere):
        out["alpha"] = model.alpha
    return out


def boundary_from_dict(data: dict) -> BoundaryModel:
    try:
        cls = _BY_TAG[data["type"]]
    except KeyError as exc:
        raise ValueError(f"unknown boundary specification: {data!r}") from exc
    if cls is RigidSphere:
        return RigidSphere(float(data["r0"]))
    if cls is DualSphere:
        return DualSphere(float(data["alpha"]))
    return cls()


def radial_table(model: BoundaryModel, N: int, k, r):
    """``b_n(kr)`` for all ``n <= N``.

    Parameters
    ----------
    model : BoundaryModel
    N : int
        Maximum order.
    k, r : array_like
        Wavenumber (rad/m) and microphone radius (m); broadcast together.

    Returns
    -------
    ndarray of complex, shape ``(N+1,) + broadcast(k, r).shape``
    """
    k, r = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(r, dtype=float))
    if np.any(k <= 0) or np.any(r <= 0):
        raise ValueError("wavenumber and radius must be positive")
    kr = k * r
    n = np.arange(N + 1).reshape((-1,) + (1,) * kr.ndim)
    phase = FOUR_PI * (1j**n)

    if isinstance(model, (OpenPressure, FreeField)):
        return phase * spherical_jn_table(N, kr)
    if isinstance(model, OpenCardioid):
        j = spherical_jn_table(N, kr)
        dj = spherical_jn_table(N, kr, derivative=True)
        return phase * (j - 1j * dj)
    if isinstance(model, RigidSphere):
        if np.any(r < model.r0 * (1 - 1e-12)):
            raise ValueError("microphone radius inside the rigid sphere")
        kr0 = k * model.r0
        dj0 = spherical_jn_table(N, kr0, derivative=True)
        dh0 = spherical_hn_table(N, kr0, derivative=True)
        return phase * (spherical_jn_table(N, kr) - dj0 / dh0 * spherical_hn_table(N, kr))
    if isinstance(model, DualSphere):
        return phase * dual_sphere_bessel(N, kr, model.alpha)
    raise TypeError(f"unsupported boundary model {model!r}")


def dual_sphere_selector(N, kr, alpha):
    """Hard sphere selector ``beta_n``: 0 picks the outer sphere, 1 the inner."""
    j_out = spherical_jn_table(N, kr)
    j_in = spherical_jn_table(N, alpha * np.asarray(kr, dtype=float))
    return np.where(np.abs(j_out) >= np.abs(j_in), 0.0, 1.0)


def dual_sphere_bessel(N, kr, alpha):
    j_out = spherical_jn_table(N, kr)
    j_in = spherical_jn_table(N, alpha * np.asarray(kr, dtype=float))
    return np.where(np.abs(j_out) >= np.abs(j_in), j_out, j_in)


def radial_bn(model: BoundaryModel, n: int, k, r):
    """Radial function ``b_n(kr)`` of a single order for boundary ``model``.

    Open sphere: ``4 pi i^n j_n(kr)``. Rigid sphere:
    ``4 pi i^n (j_n(kr) - j_n'(kr0)/h_n'(kr0) h_n(kr))``. Cardioid:
    ``4 pi i^n (j_n(kr) - i j_n'(kr))``. Dual sphere:
    ``4 pi i^n ((1 - beta_n) j_n(kr) + beta_n j_n(alpha kr))``.
    """
    if int(n) != n or n < 0:
        raise ValueError(f"order must be a nonnegative integer, got {n}")
    out = radial_table(model, int(n), k, r)[int(n)]
    return out.item() if out.ndim == 0 else out


def min_abs_bn(model: BoundaryModel, N: int, kr_grid, r: float = 1.0):
    """Per-order minimum of ``|b_n|`` over a grid of ``kr`` values.

    The grid is interpreted as ``k * r`` with microphones at radius ``r``;
    for a rigid sphere the microphones sit on its surface unless the model's
    ``r0`` differs from ``r``.

    Returns
    -------
    ndarray, shape ``(N+1,)``
    """
    kr_grid = np.atleast_1d(np.asarray(kr_grid, dtype=float))
    if kr_grid.size == 0:
        raise ValueError("empty kr grid")
    b = radial_table(model, N, kr_grid / r, r)
    return np.abs(b).min(axis=1)


def optimal_dual_alpha(N: int, kr_band, alphas=None):
    """Brute-force search for the dual-sphere radius ratio.

    Maximizes the worst-case ``min_n min_kr |b_n|`` over ``kr_band``. This is
    a grid search, not a closed-form optimum.

    Returns
    -------
    best_alpha : float
    alphas : ndarray
    scores : ndarray
        Worst-case ``|b_n|`` for every candidate ratio.
    """
    if alphas is None:
        alphas = np.linspace(0.5, 0.95, 91)
    alphas = np.asarray(alphas, dtype=float)
    scores = np.array([min_abs_bn(DualSphere(a), N, kr_band).min() for a in alphas])
    return float(alphas[np.argmax(scores)]), alphas, scores
