"""Array geometry, the sampling matrix B and modal estimation.

The sampling matrix has one row per harmonic ``(n, m)`` (linear index
``q = n**2 + n + m``) and one column per microphone,

    B[q, j] = b_n(k r_j) * Y_n^m(theta_j, phi_j),

and the sampling coefficients solve ``B @ C = I`` in the least-norm sense.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .harmonics import Direction, num_coeffs, sh_degrees, sh_matrix
from .radial import (
    BoundaryModel,
    RigidSphere,
    boundary_from_dict,
    boundary_to_dict,
    radial_table,
)

#: sigma_min below this fraction of the reference scale counts as rank deficient
RANK_TOL = 1e-12


class RankDeficientError(np.linalg.LinAlgError):
    """Raised when an unregularized solve meets a singular sampling matrix."""


@dataclass(frozen=True)
class MicrophonePosition:
    r: float
    dir: Direction

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0):
            raise ValueError(f"microphone radius must be positive, got {self.r}")


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Microphone positions (spherical coordinates) plus a boundary model."""

    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    boundary: BoundaryModel

    def __post_init__(self):
        r, theta, phi = np.broadcast_arrays(
            np.atleast_1d(np.asarray(self.r, dtype=float)),
            np.atleast_1d(np.asarray(self.theta, dtype=float)),
            np.atleast_1d(np.asarray(self.phi, dtype=float)),
        )
        if r.ndim != 1:
            raise ValueError("microphone coordinates must be one-dimensional")
        if not np.all(np.isfinite(r) & (r > 0)):
            raise ValueError("microphone radii must be finite and positive")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(phi))):
            raise ValueError("microphone angles must be finite")
        if isinstance(self.boundary, RigidSphere) and np.any(
            r < self.boundary.r0 * (1 - 1e-12)
        ):
            raise ValueError("microphone placed inside the rigid sphere")
        object.__setattr__(self, "r", r.copy())
        object.__setattr__(self, "theta", np.clip(theta, 0.0, np.pi))
        object.__setattr__(self, "phi", np.mod(phi, 2 * np.pi))
        for a in (self.r, self.theta, self.phi):
            a.flags.writeable = False
        if len(r) > 1:
            xyz = self.cartesian()
            d2 = np.sum((xyz[:, None, :] - xyz[None, :, :]) ** 2, axis=-1)
            d2[np.diag_indices(len(r))] = np.inf
            if d2.min() < 1e-18:
                raise ValueError("two microphones closer than 1e-9 m")

    @classmethod
    def on_sphere(cls, radius, theta, phi, boundary) -> "ArrayGeometry":
        return cls(np.full(np.shape(theta), float(radius)), theta, phi, boundary)

    @classmethod
    def from_positions(
        cls, mics: Iterable[MicrophonePosition], boundary
    ) -> "ArrayGeometry":
        mics = list(mics)
        return cls(
            [m.r for m in mics], [m.dir.theta for m in mics], [m.dir.phi for m in mics],
            boundary,
        )

    @property
    def M(self) -> int:
        return len(self.r)

    @property
    def mics(self) -> list[MicrophonePosition]:
        return [
            MicrophonePosition(float(r), Direction(t, p))
            for r, t, p in zip(self.r, self.theta, self.phi)
        ]

    def cartesian(self) -> np.ndarray:
        st = np.sin(self.theta)
        return self.r[:, None] * np.stack(
            [st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)], axis=1
        )

    def single_radius(self) -> bool:
        return bool(np.ptp(self.r) <= 1e-12 * self.r.max())

    def with_coords(self, r=None, theta=None, phi=None) -> "ArrayGeometry":
        return ArrayGeometry(
            self.r if r is None else r,
            self.theta if theta is None else theta,
            self.phi if phi is None else phi,
            self.boundary,
        )

    def permuted(self, order) -> "ArrayGeometry":
        order = np.asarray(order)
        return self.with_coords(self.r[order], self.theta[order], self.phi[order])

    def to_dict(self) -> dict:
        return {
            "boundary": boundary_to_dict(self.boundary),
            "mics": [
                {"r": float(r), "theta": float(t), "phi": float(p)}
                for r, t, p in zip(self.r, self.theta, self.phi)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArrayGeometry":
        try:
            mics = data["mics"]
            boundary = boundary_from_dict(data["boundary"])
            r = [float(m["r"]) for m in mics]
            theta = [float(m["theta"]) for m in mics]
            phi = [float(m["phi"]) for m in mics]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed geometry document: {exc}") from exc
        if not mics:
            raise ValueError("geometry has no microphones")
        return cls(r, theta, phi, boundary)


def save_geometry(geom: ArrayGeometry, path) -> None:
    """Write a geometry document (JSON, SI units, radians)."""
    with open(path, "w") as fh:
        json.dump(geom.to_dict(), fh, indent=2)
        fh.write("\n")


def load_geometry(path) -> ArrayGeometry:
    with open(path) as fh:
        return ArrayGeometry.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# Sampling matrix and operator
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SamplingMatrixB:
    order: int
    k: float
    entries: np.ndarray
    singular_values: np.ndarray
    radial: np.ndarray | None = field(default=None, repr=False)

    @property
    def condition_number(self) -> float:
        """``sigma_max / sigma_min``, or ``inf`` when rank deficient."""
        return condition_from_singular_values(self.singular_values, self.entries.shape[1])

    @property
    def rank_deficient(self) -> bool:
        return math.isinf(self.condition_number)


def condition_from_singular_values(s, M: int | None = None) -> float:
    """Condition number with a rank-deficiency flag.

    ``inf`` is returned when ``sigma_min < RANK_TOL * scale``, where ``scale``
    is ``sigma_max`` or, if larger, ``sqrt(4 pi M)``: the singular value of
    a row whose radial function has the plane-wave magnitude ``4 pi``. The
    absolute floor catches vanishing rows even when B has a single row.
    """
    s = np.asarray(s)
    if s.size == 0 or s[0] == 0:
        return math.inf
    scale = s[0] if M is None else max(s[0], math.sqrt(4 * math.pi * M))
    if s[-1] < RANK_TOL * scale:
        return math.inf
    return float(s[0] / s[-1])


def _check_order_vs_mics(N, M):
    if N < 0 or int(N) != N:
        raise ValueError(f"order must be a nonnegative integer, got {N}")
    if num_coeffs(N) > M:
        raise ValueError(f"order {N} needs at least {num_coeffs(N)} microphones, got {M}")


def matrix_entries(geom: ArrayGeometry, N: int, k, return_radial=False):
    """Raw entries of B; with array ``k`` the result has shape ``k.shape + (Q, M)``."""
    k = np.asarray(k, dtype=float)
    n, _ = sh_degrees(N)
    Y = sh_matrix(N, geom.theta, geom.phi).T  # (Q, M)
    b = radial_table(geom.boundary, N, k[..., None], geom.r)  # (N+1, ..., M)
    b = np.moveaxis(b, 0, -2)  # (..., N+1, M)
    entries = b[..., n, :] * Y
    return (entries, b) if return_radial else entries


def build_matrix_B(geom: ArrayGeometry, N: int, k: float) -> SamplingMatrixB:
    """Assemble the sampling matrix for ``geom`` at wavenumber ``k``."""
    _check_order_vs_mics(N, geom.M)
    entries, radial = matrix_entries(geom, N, float(k), return_radial=True)
    s = np.linalg.svd(entries, compute_uv=False)
    return SamplingMatrixB(int(N), float(k), entries, s, radial)


def condition_numbers(geom: ArrayGeometry, N: int, k_list) -> np.ndarray:
    """cond(B) for every wavenumber in ``k_list`` (``inf`` when singular)."""
    _check_order_vs_mics(N, geom.M)
    k_list = np.atleast_1d(np.asarray(k_list, dtype=float))
    s = np.linalg.svd(matrix_entries(geom, N, k_list), compute_uv=False)
    return np.array([condition_from_singular_values(row, geom.M) for row in s])


class ModalRole(str, Enum):
    PRESSURE = "pressure_modal"
    AMPLITUDE = "amplitude_modal"


@dataclass(frozen=True, eq=False)
class ModalCoefficients:
    """Order-limited harmonic coefficients indexed by ``q = n**2 + n + m``."""

    order: int
    values: np.ndarray
    role: ModalRole = ModalRole.AMPLITUDE

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (num_coeffs(self.order),):
            raise ValueError(
                f"order {self.order} needs {num_coeffs(self.order)} coefficients, "
                f"got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    def truncate(self, N: int) -> "ModalCoefficients":
        if N > self.order:
            raise ValueError("cannot truncate to a higher order")
        return replace(self, order=N, values=self.values[: num_coeffs(N)])

    def __getitem__(self, nm):
        n, m = nm
        return self.values[n * n + n + m]


@dataclass(frozen=True, eq=False)
class SamplingOperator:
    """Sampling coefficients; row ``q`` holds ``c_nm^j`` over microphones ``j``."""

    order: int
    k: float
    coefficients: np.ndarray
    matrix: SamplingMatrixB | None = field(default=None, repr=False)
    role: ModalRole = ModalRole.AMPLITUDE

    @property
    def M(self) -> int:
        return self.coefficients.shape[1]

    def orthogonality_residual(self) -> np.ndarray:
        """``C @ B.T - I``; zero when the orthogonality conditions hold."""
        if self.matrix is None:
            raise ValueError("operator was built without its sampling matrix")
        prod = self.coefficients @ self.matrix.entries.T
        return prod - np.eye(prod.shape[0])


def solve_sampling_operator(
    B: SamplingMatrixB, reg: float = 0.0, role=ModalRole.AMPLITUDE
) -> SamplingOperator:
    """Least-norm (Tikhonov) sampling coefficients ``C = B^H (B B^H + reg I)^-1``.

    With ``role="pressure_modal"`` the radial functions are not compensated
    and the estimates are ``p_nm`` instead of ``a_nm``.

    Raises
    ------
    RankDeficientError
        If ``reg == 0`` and ``sigma_min < 1e-12 * sigma_max``.
    """
    if reg < 0:
        raise ValueError("regularization must be nonnegative")
    entries = B.entries
    if not np.all(np.isfinite(entries)):
        raise ValueError("sampling matrix has non-finite entries")
    role = ModalRole(role)
    U, s, Vh = np.linalg.svd(entries, full_matrices=False)
    if reg == 0 and math.isinf(condition_from_singular_values(s, entries.shape[1])):
        raise RankDeficientError(
            f"sampling matrix is rank deficient at k={B.k:g} "
            f"(sigma_min/sigma_max = {s[-1] / s[0] if s[0] else 0:.3g})"
        )
    inv = s / (s * s + reg)
    # C_mat (M x Q) solves B @ C_mat = I; store its transpose
    C_mat = (Vh.conj().T * inv) @ U.conj().T
    coeffs = C_mat.T.copy()
    if role is ModalRole.PRESSURE:
        coeffs *= _common_radial(B)[:, None]
    return SamplingOperator(B.order, B.k, coeffs, B, role)


def _common_radial(B: SamplingMatrixB) -> np.ndarray:
    """Per-row ``b_n`` shared by all microphones (single-radius arrays only)."""
    if B.radial is None:
        raise ValueError("sampling matrix carries no radial factors")
    n, _ = sh_degrees(B.order)
    b = B.radial[n]
    ref = b[:, :1]
    if not np.allclose(b, ref, rtol=1e-12, atol=0.0):
        raise ValueError("pressure_modal estimates need a single-radius array")
    return ref[:, 0]


def estimate_modal(op: SamplingOperator, pressures) -> ModalCoefficients:
    """Modal estimates ``sum_j c_nm^j p_j`` from microphone pressures."""
    p = np.asarray(pressures, dtype=complex)
    if p.shape != (op.M,):
        raise ValueError(f"expected {op.M} pressures, got shape {p.shape}")
    return ModalCoefficients(op.order, op.coefficients @ p, op.role)


# --------------------------------------------------------------------------
# Standard sphere samplings
# --------------------------------------------------------------------------

MAX_SCHEME_ORDER = 10


@dataclass(frozen=True, eq=False)
class SphereSampling:
    """Sample directions plus quadrature weights (``None`` when not defined).

    Weights, when present, integrate over the unit sphere and sum to ``4 pi``.
    """

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray | None = None

    def __len__(self):
        return len(self.theta)

    @property
    def directions(self) -> list[Direction]:
        return [Direction(t, p) for t, p in zip(self.theta, self.phi)]


def _equal_angle(N):
    L = 2 * (N + 1)
    j = np.arange(L)
    th = np.pi * (j + 0.5) / L
    # colatitude weights integrating cos-polynomials up to degree L-1 exactly
    # (Fejer's first rule on the midpoint grid)
    l = np.arange(1, L // 2 + 1)
    w = (2.0 / L) * (
        1.0 - 2.0 * np.sum(np.cos(2 * np.outer(th, l)) / (4 * l * l - 1), axis=1)
    )
    ph = 2 * np.pi * np.arange(L) / L
    T, P = np.meshgrid(th, ph, indexing="ij")
    W = np.repeat(w * (2 * np.pi / L), L).reshape(L, L)
    return SphereSampling(T.ravel(), P.ravel(), W.ravel())


def _gaussian(N):
    x, wx = np.polynomial.legendre.leggauss(N + 1)
    th = np.arccos(x)
    L = 2 * (N + 1)
    ph = 2 * np.pi * np.arange(L) / L
    T, P = np.meshgrid(th, ph, indexing="ij")
    W = np.repeat(wx * (2 * np.pi / L), L).reshape(N + 1, L)
    return SphereSampling(T.ravel(), P.ravel(), W.ravel())


def fibonacci_sphere(M: int) -> SphereSampling:
    """Deterministic spiral (Fibonacci lattice) of ``M`` nearly uniform points."""
    if M < 1:
        raise ValueError("need at least one point")
    i = np.arange(M) + 0.5
    th = np.arccos(1.0 - 2.0 * i / M)
    ph = np.mod(np.pi * (1.0 + math.sqrt(5.0)) * i, 2 * np.pi)
    return SphereSampling(th, ph, None)


def sphere_sampling(scheme: str, N: int, M: int | None = None) -> SphereSampling:
    """Standard sampling schemes of order ``N``.

    ``equal_angle`` is a ``2(N+1) x 2(N+1)`` grid, ``gaussian`` uses ``N+1``
    Gauss-Legendre colatitudes times ``2(N+1)`` azimuths and ``near_uniform``
    is a spiral of ``M`` points (default ``ceil(1.3 (N+1)**2)``).
    """
    if int(N) != N or not 0 <= N <= MAX_SCHEME_ORDER:
        raise ValueError(f"built-in schemes support orders 0..{MAX_SCHEME_ORDER}, got {N}")
    if scheme == "equal_angle":
        return _equal_angle(N)
    if scheme == "gaussian":
        return _gaussian(N)
    if scheme == "near_uniform":
        if M is None:
            M = math.ceil(1.3 * num_coeffs(N))
        if M < num_coeffs(N):
            raise ValueError(f"near_uniform order {N} needs M >= {num_coeffs(N)}")
        return fibonacci_sphere(M)
    raise ValueError(f"unknown sampling scheme {scheme!r}")


# --------------------------------------------------------------------------
# Free-position optimization
# --------------------------------------------------------------------------


def jitter_directions(geom: ArrayGeometry, angle: float, rng_seed: int = 0) -> ArrayGeometry:
    """Move every microphone by the geodesic ``angle`` in a random direction."""
    rng = np.random.default_rng(rng_seed)
    st, ct = np.sin(geom.theta), np.cos(geom.theta)
    sp, cp = np.sin(geom.phi), np.cos(geom.phi)
    u = np.stack([st * cp, st * sp, ct], axis=1)
    e_theta = np.stack([ct * cp, ct * sp, -st], axis=1)
    e_phi = np.stack([-sp, cp, np.zeros_like(sp)], axis=1)
    psi = rng.uniform(0.0, 2 * np.pi, geom.M)
    t = np.cos(psi)[:, None] * e_theta + np.sin(psi)[:, None] * e_phi
    v = np.cos(angle) * u + np.sin(angle) * t
    theta = np.arctan2(np.hypot(v[:, 0], v[:, 1]), v[:, 2])
    phi = np.arctan2(v[:, 1], v[:, 0])
    return geom.with_coords(theta=theta, phi=phi)


def conditioning_objective(geom: ArrayGeometry, N: int, k_list) -> float:
    """Worst-case condition number of B over the wavenumbers in ``k_list``."""
    return float(np.max(condition_numbers(geom, N, k_list)))


def optimize_positions(
    geom0: ArrayGeometry,
    N: int,
    k_list,
    moveable: Sequence[int] = (),
    iters: int = 2000,
    rng_seed: int = 0,
    radius_bounds: tuple[float, float] | None = None,
    restarts: int = 10,
    step: float = 0.25,
    min_step: float = 1e-3,
):
    """Move microphones to minimize the worst-case condition number of B.

    Random-restart coordinate descent over ``(theta, phi)`` of every moveable
    microphone, plus its radius when ``radius_bounds`` is given. A coordinate
    move is kept only if it lowers the objective; the step halves after a
    sweep without improvement, and once it falls below ``min_step`` the search
    restarts from a random kick around the best layout found.

    Parameters
    ----------
    geom0 : ArrayGeometry
        Starting layout.
    N : int
        Array order.
    k_list : array_like
        Wavenumbers whose worst-case condition number is minimized.
    moveable : sequence of int
        Indices of microphones allowed to move.
    iters : int
        Budget of objective evaluations.
    rng_seed : int
        Seed for the coordinate order and restart kicks.
    radius_bounds : (float, float), optional
        Radius range for moveable microphones; radii stay fixed when omitted.

    Returns
    -------
    geom : ArrayGeometry
        Best layout found; never worse than ``geom0``.
    history : dict
        ``initial`` and ``final`` objective plus ``evaluations`` used.
    """
    moveable = sorted({int(i) for i in moveable})
    if any(i < 0 or i >= geom0.M for i in moveable):
        raise ValueError("moveable index out of range")
    k_list = np.atleast_1d(np.asarray(k_list, dtype=float))
    _check_order_vs_mics(N, geom0.M)
    if radius_bounds is not None:
        lo, hi = radius_bounds
        if not 0 < lo <= hi:
            raise ValueError("invalid radius bounds")
        if isinstance(geom0.boundary, RigidSphere) and lo < geom0.boundary.r0:
            raise ValueError("radius bounds reach inside the rigid sphere")

    start_val = conditioning_objective(geom0, N, k_list)
    history = {"initial": start_val, "final": start_val, "evaluations": 0}
    if not moveable or iters <= 0:
        return geom0, history

    rng = np.random.default_rng(rng_seed)
    kinds = ("theta", "phi") + (("r",) if radius_bounds is not None else ())
    coords = [(i, kind) for i in moveable for kind in kinds]
    r_span = 0.0 if radius_bounds is None else radius_bounds[1] - radius_bounds[0]

    def evaluate(r, th, ph):
        try:
            g = geom0.with_coords(r, th, ph)
        except ValueError:  # coincident microphones
            return math.inf
        return conditioning_objective(g, N, k_list)

    def moved(r, th, ph, i, kind, delta):
        r, th, ph = r.copy(), th.copy(), ph.copy()
        if kind == "r":
            r[i] = np.clip(r[i] + delta * r_span, *radius_bounds)
        elif kind == "phi":
            ph[i] = (ph[i] + delta) % (2 * np.pi)
        else:
            t = th[i] + delta
            if t < 0 or t > np.pi:
                t = -t if t < 0 else 2 * np.pi - t
                ph[i] = (ph[i] + np.pi) % (2 * np.pi)
            th[i] = t
        return r, th, ph

    best = (np.array(geom0.r), np.array(geom0.theta), np.array(geom0.phi))
    best_val = start_val
    cur, cur_val = best, best_val
    h = step
    evals = 0
    restarts_left = restarts
    while evals < iters:
        improved = False
        for idx in rng.permutation(len(coords)):
            i, kind = coords[idx]
            for sign in rng.permutation([1.0, -1.0]):
                cand = moved(*cur, i, kind, sign * h)
                val = evaluate(*cand)
                evals += 1
                if val < cur_val:
                    cur, cur_val = cand, val
                    improved = True
                    if val < best_val:
                        best, best_val = cand, val
                    break
                if evals >= iters:
                    break
            if evals >= iters:
                break
        if improved:
            continue
        h *= 0.5
        if h >= min_step:
            continue
        if restarts_left == 0:
            break
        restarts_left -= 1
        h = step
        cur = best
        for i, kind in coords:
            cur = moved(*cur, i, kind, rng.uniform(-step, step))
        cur_val = evaluate(*cur)
        evals += 1

    history.update(final=best_val, evaluations=evals)
    return geom0.with_coords(*best), history


# --------------------------------------------------------------------------
# Robustness
# --------------------------------------------------------------------------


def microphone_weights(op: SamplingOperator, weights) -> np.ndarray:
    """Microphone-domain weights ``w_j = sum_q d_q c_q^j``."""
    dnm = weights.to_general().dnm
    if len(dnm) > op.coefficients.shape[0]:
        raise ValueError(
            f"weights of order {weights.order} exceed operator order {op.order}"
        )
    return dnm @ op.coefficients[: len(dnm)]


def white_noise_gain(op: SamplingOperator, weights, look=None, reference="array"):
    """White-noise gain in dB.

    ``reference="free_field"`` gives ``|pattern(look)|**2 / sum_j |w_j|**2``,
    i.e. the gain relative to a unit-amplitude incident wave. The default
    ``"array"`` divides by the mean microphone power of a unit plane wave
    from ``look`` as seen through B, so the gain is measured against the
    average sensor SNR. Both coincide on an open sphere once the order covers
    ``kr``; only the latter stays meaningful on a rigid sphere, where the
    surface pressure itself depends on frequency.
    """
    if look is None:
        look = getattr(weights, "look", None)
        if look is None:
            raise ValueError("look direction required for general weights")
    w = microphone_weights(op, weights)
    denom = float(np.sum(np.abs(w) ** 2))
    if denom == 0.0 or not np.isfinite(denom):
        raise ValueError("degenerate microphone weights")
    gain = abs(weights.pattern(look.theta, look.phi)) ** 2
    wng = gain / denom
    if reference == "array":
        if op.matrix is None:
            raise ValueError("operator was built without its sampling matrix")
        Q = op.matrix.entries.shape[0]
        y = sh_matrix(op.order, look.theta, look.phi).conj()[:Q]
        v = y @ op.matrix.entries
        wng /= float(np.mean(np.abs(v) ** 2))
    elif reference != "free_field":
        raise ValueError(f"unknown WNG reference {reference!r}")
    return 10.0 * math.log10(wng)
