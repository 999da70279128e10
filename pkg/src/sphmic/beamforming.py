"""Beamformer weights in the spherical-harmonics domain.

The array output is ``y = sum_q d_q * a_q`` with ``a_q`` the estimated
plane-wave amplitude coefficients. For a unit plane wave from ``Omega``,
``a_q = conj(Y_q(Omega))`` so the beam pattern is

    pattern(Omega) = sum_q d_q * conj(Y_q(Omega)).

Patterns are not normalized; the physical scale of the output is kept.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .harmonics import (
    Direction,
    EulerAngles,
    num_coeffs,
    sh_degrees,
    sh_matrix,
    wigner_D_matrix,
)
from .radial import radial_table


@dataclass(frozen=True, eq=False)
class GeneralWeights:
    """Arbitrary coefficients ``d_nm`` (linear index ``q = n**2 + n + m``).

    ``look`` is optional metadata (used for directivity and white-noise gain).
    """

    dnm: np.ndarray
    look: Direction | None = None

    def __post_init__(self):
        dnm = np.asarray(self.dnm, dtype=complex).ravel()
        N = math.isqrt(len(dnm)) - 1
        if len(dnm) == 0 or num_coeffs(N) != len(dnm):
            raise ValueError(f"need (N+1)**2 coefficients, got {len(dnm)}")
        object.__setattr__(self, "dnm", dnm)

    @property
    def order(self) -> int:
        return math.isqrt(len(self.dnm)) - 1

    def to_general(self) -> "GeneralWeights":
        return self

    def pattern(self, theta, phi):
        Y = sh_matrix(self.order, theta, phi)
        out = Y.conj() @ self.dnm
        return out.item() if out.ndim == 0 else out

    def __add__(self, other):
        a, b = self.dnm, other.to_general().dnm
        if len(a) != len(b):
            raise ValueError("weights of different orders")
        return GeneralWeights(a + b, self.look)

    def scaled(self, c) -> "GeneralWeights":
        return GeneralWeights(c * self.dnm, self.look)


@dataclass(frozen=True, eq=False)
class AxisymmetricWeights:
    """Per-order weights ``d_n`` of a pattern symmetric about ``look``."""

    dn: np.ndarray
    look: Direction

    def __post_init__(self):
        dn = np.atleast_1d(np.asarray(self.dn, dtype=complex))
        if dn.ndim != 1 or len(dn) == 0:
            raise ValueError("d_n must be a nonempty vector")
        object.__setattr__(self, "dn", dn)

    @property
    def order(self) -> int:
        return len(self.dn) - 1

    def to_general(self) -> GeneralWeights:
        n, _ = sh_degrees(self.order)
        y = sh_matrix(self.order, self.look.theta, self.look.phi)
        return GeneralWeights(self.dn[n] * y, self.look)

    def pattern(self, theta, phi):
        """Closed form ``sum_n d_n (2n+1)/(4 pi) P_n(cos Theta)``."""
        cos_t = np.tensordot(
            self.look.to_vector(), _unit(theta, phi), axes=(0, 0)
        )
        out = axisymmetric_profile(self.dn, np.clip(cos_t, -1.0, 1.0))
        return out.item() if np.ndim(out) == 0 else out

    def __add__(self, other):
        return self.to_general() + other

    def scaled(self, c) -> "AxisymmetricWeights":
        return AxisymmetricWeights(c * self.dn, self.look)


BeamformerWeights = GeneralWeights | AxisymmetricWeights


def _unit(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta) + 0 * phi])


def axisymmetric_profile(dn, cos_theta):
    """Pattern of axisymmetric weights versus the cosine of the look angle."""
    n = np.arange(len(dn))
    return np.polynomial.legendre.legval(cos_theta, dn * (2 * n + 1) / (4 * np.pi))


def pattern_value(w: BeamformerWeights, arrival: Direction) -> complex:
    """Response ``sum_q d_q conj(Y_q(arrival))`` to a unit plane wave."""
    return complex(w.to_general().pattern(arrival.theta, arrival.phi))


def beamformer_output(w: BeamformerWeights, a_hat) -> complex:
    """Array output ``y = sum_q d_q * a_q`` (no conjugation on ``d``).

    ``a_hat`` is a coefficient vector or :class:`ModalCoefficients` of order
    at least that of the weights; higher orders are ignored.
    """
    a = np.asarray(getattr(a_hat, "values", a_hat), dtype=complex)
    d = w.to_general().dnm
    if a.shape[0] < d.shape[0]:
        raise ValueError("modal estimate has lower order than the weights")
    return complex(d @ a[: d.shape[0]])


@dataclass(frozen=True, eq=False)
class BeamPattern:
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    order: int

    def __post_init__(self):
        if not (len(self.theta) == len(self.phi) == len(self.values)):
            raise ValueError("grid and values differ in length")

    def magnitude_db(self, normalize=True):
        mag = np.abs(self.values)
        peak = mag.max() if normalize else 1.0
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(mag / peak)


def beam_pattern(w: BeamformerWeights, theta, phi) -> BeamPattern:
    theta = np.ravel(np.asarray(theta, dtype=float))
    phi = np.ravel(np.asarray(phi, dtype=float))
    vals = np.atleast_1d(w.to_general().pattern(theta, phi))
    return BeamPattern(theta, phi, vals, w.order)


# --------------------------------------------------------------------------
# Designs
# --------------------------------------------------------------------------


def regular_weights(N: int, look: Direction) -> AxisymmetricWeights:
    """Plane-wave decomposition: ``d_n = 1`` for every order."""
    if N < 0:
        raise ValueError("order must be nonnegative")
    return AxisymmetricWeights(np.ones(N + 1), look)


def delay_sum_weights(N: int, look: Direction, geom, k: float) -> AxisymmetricWeights:
    """Delay-and-sum weights ``d_n = |b_n(kr)|**2`` for a single-radius array."""
    if not geom.single_radius():
        raise ValueError("delay-and-sum weights need all microphones at one radius")
    b = radial_table(geom.boundary, N, float(k), float(geom.r[0]))
    return AxisymmetricWeights(np.abs(b) ** 2 + 0j, look)


def dolph_chebyshev_weights(
    N: int, look: Direction, sidelobe_level: float
) -> AxisymmetricWeights:
    """Equiripple Dolph-Chebyshev pattern of order ``N``.

    The target pattern is ``T_{2N}(x0 cos(Theta/2))`` with
    ``x0 = cosh(arccosh(R)/(2N))``, a degree-``N`` polynomial in
    ``cos(Theta)``; its Legendre coefficients are obtained by Gauss-Legendre
    projection, which is exact here. The main-lobe peak is ``R`` and every
    sidelobe peak has magnitude 1.

    Parameters
    ----------
    sidelobe_level : float
        Main-lobe to sidelobe amplitude ratio ``R > 1`` (linear, not dB).
    """
    if N < 1:
        raise ValueError("Dolph-Chebyshev design needs order N >= 1")
    R = float(sidelobe_level)
    if not R > 1.0:
        raise ValueError(f"sidelobe ratio must exceed 1, got {R}")
    x0 = math.cosh(math.acosh(R) / (2 * N))
    x, wx = np.polynomial.legendre.leggauss(N + 2)
    target = np.polynomial.chebyshev.chebval(
        x0 * np.sqrt((1.0 + x) / 2.0), [0] * (2 * N) + [1]
    )
    n = np.arange(N + 1)
    P = np.polynomial.legendre.legvander(x, N)  # (nodes, N+1)
    # pattern = sum_n d_n (2n+1)/(4pi) P_n and target = sum_n c_n P_n
    c = (2 * n + 1) / 2.0 * ((wx * target) @ P)
    return AxisymmetricWeights(4 * np.pi * c / (2 * n + 1) + 0j, look)


def axisymmetric_to_general(w: BeamformerWeights) -> GeneralWeights:
    """Expand ``d_n`` into ``d_nm = d_n Y_n^m(look)``."""
    return w.to_general()


def null_constrained_weights(
    desired: BeamformerWeights, nulls: Sequence[Direction], rcond: float = 1e-10
) -> BeamformerWeights:
    """Closest weights to ``desired`` with exact pattern nulls.

    Minimizes ``||d - d_desired||_2`` subject to ``pattern(d, null) = 0``
    for every null direction, via the closed-form solution of the KKT
    system ``d = d0 - A^H (A A^H)^-1 A d0`` with ``A[i, q] = conj(Y_q(null_i))``.

    Raises
    ------
    ValueError
        Too many nulls, a null at the look direction, or a rank-deficient
        constraint set (for example, coincident nulls).
    """
    nulls = list(nulls)
    if not nulls:
        return desired
    g = desired.to_general()
    N = g.order
    if len(nulls) >= num_coeffs(N):
        raise ValueError(f"at most {num_coeffs(N) - 1} nulls for order {N}")
    look = g.look
    if look is not None:
        lv = look.to_vector()
        for d in nulls:
            if np.dot(lv, d.to_vector()) > 1 - 1e-12:
                raise ValueError("null coincides with the look direction")
    th = np.array([d.theta for d in nulls])
    ph = np.array([d.phi for d in nulls])
    A = sh_matrix(N, th, ph).conj()
    gram = A @ A.conj().T
    s = np.linalg.svd(gram, compute_uv=False)
    if s[-1] < rcond * s[0]:
        raise ValueError("null constraints are rank deficient")
    lam = np.linalg.solve(gram, A @ g.dnm)
    return GeneralWeights(g.dnm - A.conj().T @ lam, look)


def steer_weights(w: BeamformerWeights, angles: EulerAngles) -> GeneralWeights:
    """Rotate a beam pattern by Euler ``angles`` (z-y-z, active).

    The steered pattern at ``R @ Omega`` equals the original at ``Omega``,
    where ``R = Rz(alpha) Ry(beta) Rz(gamma)``. Per order block
    ``d'_nm = sum_m' conj(D^n_{m m'}) d_nm'``.
    """
    g = w.to_general()
    out = np.empty_like(g.dnm)
    for n in range(g.order + 1):
        sl = slice(n * n, (n + 1) ** 2)
        out[sl] = wigner_D_matrix(n, angles).conj() @ g.dnm[sl]
    look = None
    if g.look is not None:
        th, ph = angles.rotate(g.look.theta, g.look.phi)
        look = Direction(float(th), float(ph))
    return GeneralWeights(out, look)


def _quadrature_grid(order):
    x, wx = np.polynomial.legendre.leggauss(order + 1)
    L = 2 * (order + 1)
    ph = 2 * np.pi * np.arange(L) / L
    T, P = np.meshgrid(np.arccos(x), ph, indexing="ij")
    W = np.repeat(wx * (2 * np.pi / L), L).reshape(len(x), L)
    return T.ravel(), P.ravel(), W.ravel()


def directivity_index(w: BeamformerWeights, look: Direction | None = None) -> float:
    """Directivity index in dB.

    ``|pattern(look)|**2`` over the mean of ``|pattern|**2`` on the sphere,
    the mean computed by Gaussian quadrature exact for order ``2N``. Without
    a look direction the pattern maximum (dense-grid search) is used.
    """
    g = w.to_general()
    N = g.order
    th, ph, wq = _quadrature_grid(2 * N + 1)
    power = float(np.sum(wq * np.abs(np.atleast_1d(g.pattern(th, ph))) ** 2)) / (4 * np.pi)
    if power == 0.0:
        raise ValueError("pattern has zero power")
    look = look if look is not None else g.look
    if look is not None:
        peak = abs(g.pattern(look.theta, look.phi)) ** 2
    else:
        peak = _pattern_peak(g) ** 2
    return 10.0 * math.log10(peak / power)


def _pattern_peak(g: GeneralWeights) -> float:
    """Maximum of ``|pattern|``: dense grid, then a shrinking local search."""
    gt, gp, _ = _quadrature_grid(4 * g.order + 16)
    mag = np.abs(np.atleast_1d(g.pattern(gt, gp)))
    i = int(np.argmax(mag))
    best, th, ph = mag[i], gt[i], gp[i]
    h = np.pi / (4 * g.order + 17)
    offs = np.array([(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1) if a or b], dtype=float)
    while h > 1e-9:
        # steps in the local tangent frame; azimuth step scaled by 1/sin(theta)
        ct = th + h * offs[:, 0]
        cp = ph + h * offs[:, 1] / max(math.sin(th), h)
        cm = np.abs(np.atleast_1d(g.pattern(np.abs(ct), cp)))
        j = int(np.argmax(cm))
        if cm[j] > best:
            best, th, ph = cm[j], abs(ct[j]), cp[j]
        else:
            h *= 0.5
    return float(best)


# --------------------------------------------------------------------------
# Weight files
# --------------------------------------------------------------------------

WEIGHTS_SCHEMA = "sphmic.weights/1"


def weights_to_dict(w: BeamformerWeights) -> dict:
    out = {"schema": WEIGHTS_SCHEMA, "order": w.order}
    if isinstance(w, AxisymmetricWeights):
        out["form"] = "axisymmetric"
        out["entries"] = [[float(c.real), float(c.imag)] for c in w.dn]
    else:
        out["form"] = "general"
        out["entries"] = [[float(c.real), float(c.imag)] for c in w.dnm]
    if w.look is not None:
        out["look"] = {"theta": w.look.theta, "phi": w.look.phi}
    return out


def weights_from_dict(data: dict) -> BeamformerWeights:
    try:
        form = data["form"]
        order = int(data["order"])
        entries = np.array([complex(re, im) for re, im in data["entries"]])
        look = data.get("look")
        look = None if look is None else Direction(float(look["theta"]), float(look["phi"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed weight document: {exc}") from exc
    if form == "axisymmetric":
        if look is None:
            raise ValueError("axisymmetric weights need a look direction")
        w = AxisymmetricWeights(entries, look)
    elif form == "general":
        w = GeneralWeights(entries, look)
    else:
        raise ValueError(f"unknown weight form {form!r}")
    if w.order != order:
        raise ValueError(f"declared order {order} does not match {len(entries)} entries")
    return w


def save_weights(w: BeamformerWeights, path) -> None:
    with open(path, "w") as fh:
        json.dump(weights_to_dict(w), fh, indent=2)
        fh.write("\n")


def load_weights(path) -> BeamformerWeights:
    with open(path) as fh:
        return weights_from_dict(json.load(fh))
