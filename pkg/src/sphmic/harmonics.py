"""Special functions for spherical array processing.

Spherical Bessel and Hankel functions, complex spherical harmonics and the
Wigner rotation coefficients. Everything here is a pure function of its
arguments.

Conventions
-----------
* Spherical harmonics are orthonormal over the unit sphere and carry the
  Condon-Shortley phase, so that ``Y_n^{-m} = (-1)^m conj(Y_n^m)``.
* ``theta`` is the colatitude in ``[0, pi]`` and ``phi`` the azimuth.
* Hankel functions are of the first kind, ``h_n = j_n + 1j * y_n``.
* ``D^n_{m m'}(alpha, beta, gamma) = exp(-1j m alpha) d^n_{m m'}(beta)
  exp(-1j m' gamma)`` in the z-y-z convention.
* Harmonic coefficient vectors use the linear index ``q = n**2 + n + m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_ORDER = 30

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere.

    ``theta`` is clipped into ``[0, pi]`` and ``phi`` wrapped into
    ``[0, 2*pi)``.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        theta = float(self.theta)
        phi = float(self.phi)
        if not (np.isfinite(theta) and np.isfinite(phi)):
            raise ValueError("direction angles must be finite")
        object.__setattr__(self, "theta", min(max(theta, 0.0), np.pi))
        object.__setattr__(self, "phi", phi % _TWO_PI)

    @classmethod
    def from_vector(cls, v) -> "Direction":
        x, y, z = np.asarray(v, dtype=float)
        rho = math.hypot(x, y)
        return cls(math.atan2(rho, z), math.atan2(y, x))

    def to_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]
        )


@dataclass(frozen=True)
class EulerAngles:
    """Rotation angles in the z-y-z convention.

    ``beta`` is folded into ``[0, pi]`` (adjusting ``alpha`` and ``gamma``
    by ``pi`` when needed so the rotation is unchanged); ``alpha`` and
    ``gamma`` are wrapped into ``[0, 2*pi)``.
    """

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        a, b, g = float(self.alpha), float(self.beta), float(self.gamma)
        if not all(np.isfinite([a, b, g])):
            raise ValueError("Euler angles must be finite")
        b = b % _TWO_PI
        if b > np.pi:
            # Rz(a) Ry(2pi - b) Rz(g) == Rz(a + pi) Ry(b) Rz(g + pi)
            b = _TWO_PI - b
            a += np.pi
            g += np.pi
        object.__setattr__(self, "alpha", a % _TWO_PI)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "gamma", g % _TWO_PI)

    @classmethod
    def from_matrix(cls, R) -> "EulerAngles":
        """z-y-z angles of a proper rotation matrix."""
        R = np.asarray(R, dtype=float)
        beta = math.acos(min(1.0, max(-1.0, R[2, 2])))
        if math.sin(beta) > 1e-12:
            alpha = math.atan2(R[1, 2], R[0, 2])
            gamma = math.atan2(R[2, 1], -R[2, 0])
        else:
            # gimbal lock: only alpha +/- gamma is defined
            alpha = math.atan2(R[1, 0], R[0, 0]) if R[2, 2] > 0 else math.atan2(-R[1, 0], -R[0, 0])
            gamma = 0.0
        return cls(alpha, beta, gamma)

    def matrix(self) -> np.ndarray:
        """Active rotation matrix ``Rz(alpha) @ Ry(beta) @ Rz(gamma)``."""
        return _rz(self.alpha) @ _ry(self.beta) @ _rz(self.gamma)

    def rotate(self, theta, phi):
        """Apply the rotation to directions given as angle arrays."""
        xyz = sph2cart(theta, phi)
        rot = np.einsum("ij,j...->i...", self.matrix(), xyz)
        return cart2sph(rot)


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(b):
    c, s = math.cos(b), math.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def sph2cart(theta, phi):
    """Unit vectors with shape ``(3, ...)`` for colatitude/azimuth arrays."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def cart2sph(xyz):
    """Inverse of :func:`sph2cart`; returns ``(theta, phi)`` with phi in [0, 2pi)."""
    x, y, z = np.asarray(xyz, dtype=float)
    theta = np.arctan2(np.hypot(x, y), z)
    phi = np.mod(np.arctan2(y, x), _TWO_PI)
    return theta, phi


def num_coeffs(N: int) -> int:
    return (N + 1) ** 2


def sh_index(n: int, m: int) -> int:
    """Linear harmonic index ``q = n**2 + n + m``."""
    return n * n + n + m


def sh_degrees(N: int):
    """Arrays ``(n, m)`` of length ``(N+1)**2`` in linear-index order."""
    n = np.concatenate([np.full(2 * k + 1, k) for k in range(N + 1)])
    m = np.concatenate([np.arange(-k, k + 1) for k in range(N + 1)])
    return n, m


def _check_order(n, upper=MAX_ORDER):
    if int(n) != n or n < 0 or n > upper:
        raise ValueError(f"order must be an integer in [0, {upper}], got {n}")
    return int(n)


# --------------------------------------------------------------------------
# Spherical Bessel / Hankel
# --------------------------------------------------------------------------

_SMALL_X = 1e-4
_RESCALE = 1e100


def _series_jn(N, x):
    # j_n(x) = x^n/(2n+1)!! * (1 - x^2/(2(2n+3)) + x^4/(8(2n+3)(2n+5)) - ...)
    out = np.empty((N + 1,) + x.shape)
    x2 = x * x
    lead = np.ones_like(x)
    for n in range(N + 1):
        if n > 0:
            lead = lead * x / (2 * n + 1)
        a = 2 * n + 3
        out[n] = lead * (1.0 - x2 / (2 * a) * (1.0 - x2 / (4 * (a + 2))))
    return out


def _jn_all(N, x):
    """``j_0..j_N`` at nonnegative ``x`` via downward recurrence.

    The recurrence is seeded well above ``max(N, x)`` and normalized with the
    sum rule ``sum_n (2n+1) j_n(x)**2 = 1``, which stays well conditioned
    through the zeros of ``j_0``.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((N + 1,) + x.shape)
    small = x < _SMALL_X
    if np.any(small):
        out[:, small] = _series_jn(N, x[small])
    big = ~small
    if not np.any(big):
        return out
    xb = x[big]
    top = max(N, int(np.ceil(xb.max())))
    start = top + int(np.sqrt(40.0 * top)) + 20
    f_next = np.zeros_like(xb)
    f_cur = np.ones_like(xb)
    vals = np.zeros((N + 1,) + xb.shape)
    norm = np.zeros_like(xb)
    for n in range(start, 0, -1):
        f_prev = (2 * n + 1) / xb * f_cur - f_next
        # f_prev is j_{n-1} up to scale
        norm += (2 * n + 1) * f_cur * f_cur
        if n <= N:
            vals[n] = f_cur
        f_next, f_cur = f_cur, f_prev
        over = np.abs(f_cur) > _RESCALE
        if np.any(over):
            s = np.where(over, 1.0 / _RESCALE, 1.0)
            f_cur = f_cur * s
            f_next = f_next * s
            vals = vals * s
            norm = norm * s * s
    vals[0] = f_cur
    norm += f_cur * f_cur
    scale = 1.0 / np.sqrt(norm)
    # sum rule fixes the magnitude; j_0 (or j_1 near its zeros) fixes the sign
    j0 = np.sin(xb) / xb
    j1 = np.sin(xb) / xb**2 - np.cos(xb) / xb
    use0 = np.abs(j0) > np.abs(j1)
    ref = np.where(use0, j0, j1)
    got = np.where(use0, vals[0], vals[1] if N >= 1 else f_next)
    scale = np.where(np.sign(got) == np.sign(ref), scale, -scale)
    out[:, big] = vals * scale
    return out


def _yn_all(N, x):
    """``y_0..y_N`` at positive ``x`` via upward recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.empty((N + 1,) + x.shape)
    out[0] = -np.cos(x) / x
    if N >= 1:
        out[1] = -np.cos(x) / x**2 - np.sin(x) / x
    for n in range(1, N):
        out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    return out


def _deriv_from_table(tab, N):
    # f'_n = (n f_{n-1} - (n+1) f_{n+1}) / (2n+1); tab holds orders 0..N+1
    d = np.empty_like(tab[: N + 1])
    d[0] = -tab[1]
    for n in range(1, N + 1):
        d[n] = (n * tab[n - 1] - (n + 1) * tab[n + 1]) / (2 * n + 1)
    return d


def _check_x(x, positive=False):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("argument must be finite")
    if positive and np.any(x <= 0):
        raise ValueError("argument must be positive (singular at x = 0)")
    if np.any(x < 0):
        raise ValueError("argument must be nonnegative")
    return x


def spherical_jn_table(N, x, derivative=False):
    """Spherical Bessel ``j_n(x)`` for every ``n <= N``.

    Returns an array of shape ``(N+1,) + x.shape``; with ``derivative=True``
    returns ``dj_n/dx`` instead.
    """
    N = _check_order(N, MAX_ORDER + 1)
    x = _check_x(x)
    if not derivative:
        return _jn_all(N, x)
    return _deriv_from_table(_jn_all(N + 1, x), N)


def spherical_yn_table(N, x, derivative=False):
    N = _check_order(N, MAX_ORDER + 1)
    x = _check_x(x, positive=True)
    if not derivative:
        return _yn_all(N, x)
    return _deriv_from_table(_yn_all(N + 1, x), N)


def spherical_hn_table(N, x, derivative=False):
    """First-kind spherical Hankel ``h_n = j_n + 1j*y_n`` for ``n <= N``."""
    x = _check_x(x, positive=True)
    return spherical_jn_table(N, x, derivative) + 1j * spherical_yn_table(
        N, x, derivative
    )


def _scalar(out):
    return out.item() if np.ndim(out) == 0 else out


def sph_bessel_j(n, x):
    """Spherical Bessel function of the first kind, ``j_n(x)``."""
    n = _check_order(n)
    return _scalar(spherical_jn_table(n, x)[n])


def sph_bessel_j_deriv(n, x):
    n = _check_order(n)
    return _scalar(spherical_jn_table(n, x, derivative=True)[n])


def sph_bessel_y(n, x):
    n = _check_order(n)
    return _scalar(spherical_yn_table(n, x)[n])


def sph_hankel_h(n, x):
    """Spherical Hankel function of the first kind, ``h_n(x)``."""
    n = _check_order(n)
    return _scalar(spherical_hn_table(n, x)[n])


def sph_hankel_h_deriv(n, x):
    n = _check_order(n)
    return _scalar(spherical_hn_table(n, x, derivative=True)[n])


# --------------------------------------------------------------------------
# Spherical harmonics
# --------------------------------------------------------------------------


def _normalized_legendre(N, x, s=None):
    """Fully normalized ``P_n^m`` for ``0 <= m <= n <= N``.

    Normalized so that ``Y_n^m = P[n, m] * exp(1j*m*phi)`` is orthonormal,
    Condon-Shortley phase included. Shape ``(N+1, N+1) + x.shape``.
    Pass ``s = sin(theta)`` when available; recovering it from ``x`` loses
    accuracy near the poles.
    """
    x = np.asarray(x, dtype=float)
    if s is None:
        s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    else:
        s = np.abs(np.asarray(s, dtype=float))
    P = np.zeros((N + 1, N + 1) + x.shape)
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, N + 1):
        P[m, m] = -np.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, N):
        P[m + 1, m] = np.sqrt(2 * m + 3.0) * x * P[m, m]
    for m in range(0, N + 1):
        for n in range(m + 2, N + 1):
            a = np.sqrt((4.0 * n * n - 1) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1) ** 2 - 1))
            P[n, m] = a * (x * P[n - 1, m] - b * P[n - 2, m])
    return P


def sh_matrix(N, theta, phi):
    """Complex spherical harmonics up to order ``N`` at the given directions.

    Parameters
    ----------
    N : int
        Maximum order.
    theta, phi : array_like
        Colatitudes and azimuths, broadcast against each other.

    Returns
    -------
    Y : ndarray, shape ``broadcast_shape + ((N+1)**2,)``
        ``Y[..., n**2 + n + m] = Y_n^m(theta, phi)``.
    """
    N = _check_order(N)
    theta, phi = np.broadcast_arrays(
        np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
    )
    P = _normalized_legendre(N, np.cos(theta), np.sin(theta))
    Y = np.empty(theta.shape + (num_coeffs(N),), dtype=complex)
    for m in range(0, N + 1):
        e = np.exp(1j * m * phi)
        sign = -1.0 if m % 2 else 1.0
        for n in range(m, N + 1):
            pos = P[n, m] * e
            Y[..., sh_index(n, m)] = pos
            if m:
                Y[..., sh_index(n, -m)] = sign * np.conj(pos)
    return Y


def sph_harmonic(n, m, direction: Direction):
    """Orthonormal complex spherical harmonic ``Y_n^m`` at ``direction``."""
    n = _check_order(n)
    if int(m) != m or abs(m) > n:
        raise ValueError(f"need |m| <= n, got n={n}, m={m}")
    return complex(sh_matrix(n, direction.theta, direction.phi)[sh_index(n, int(m))])


def legendre_series(coeffs, x):
    """Evaluate ``sum_n coeffs[n] * P_n(x)`` (unnormalized Legendre)."""
    return np.polynomial.legendre.legval(np.asarray(x, dtype=float), coeffs)


# --------------------------------------------------------------------------
# Wigner rotation coefficients
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _log_factorials(upper=4 * MAX_ORDER + 2):
    return np.array([math.lgamma(k + 1.0) for k in range(upper + 1)])


#: above this order the factorial sum loses digits to cancellation
_FACTORIAL_SUM_MAX = 8


def _wigner_d_sum(n, beta):
    lf = _log_factorials()
    c = math.cos(beta / 2.0)
    s = math.sin(beta / 2.0)
    d = np.zeros((2 * n + 1, 2 * n + 1))
    for i, m in enumerate(range(-n, n + 1)):
        for j, mp in enumerate(range(-n, n + 1)):
            pref = 0.5 * (lf[n + m] + lf[n - m] + lf[n + mp] + lf[n - mp])
            total = 0.0
            for k in range(max(0, mp - m), min(n + mp, n - m) + 1):
                logc = pref - (lf[n + mp - k] + lf[k] + lf[m - mp + k] + lf[n - m - k])
                term = math.exp(logc)
                pc = 2 * n + mp - m - 2 * k
                ps = m - mp + 2 * k
                term *= c**pc * s**ps
                total += -term if (m - mp + k) % 2 else term
            d[i, j] = total
    return d


@lru_cache(maxsize=2 * MAX_ORDER)
def _jy_eigensystem(n):
    # J_y in the |n m> basis, m ascending; Hermitian tridiagonal
    m = np.arange(-n, n)
    up = np.sqrt(n * (n + 1) - m * (m + 1.0))
    jy = np.zeros((2 * n + 1, 2 * n + 1), dtype=complex)
    jy[np.arange(1, 2 * n + 1), np.arange(2 * n)] = up / 2j
    jy[np.arange(2 * n), np.arange(1, 2 * n + 1)] = -up / 2j
    return np.linalg.eigh(jy)


def _wigner_d_spectral(n, beta):
    lam, v = _jy_eigensystem(n)
    return ((v * np.exp(-1j * beta * lam)) @ v.conj().T).real


def wigner_d_matrix(n, beta):
    """Small Wigner-d block ``d^n_{m m'}(beta)`` of shape ``(2n+1, 2n+1)``.

    Rows index ``m``, columns ``m'``, both running from ``-n`` to ``n``.
    Low orders use the explicit factorial sum. From order 9 upward the sum
    cancels badly (unitarity error near 1e-7 at order 30), so the block is
    formed as ``exp(-i beta J_y)`` from the eigenvectors of the spin matrix.
    """
    n = _check_order(n)
    if n <= _FACTORIAL_SUM_MAX:
        return _wigner_d_sum(n, float(beta))
    return _wigner_d_spectral(n, float(beta))


def wigner_D_matrix(n, angles: EulerAngles):
    """Wigner-D block for order ``n`` with rows ``m`` and columns ``m'``."""
    d = wigner_d_matrix(n, angles.beta)
    ms = np.arange(-n, n + 1)
    return np.exp(-1j * ms * angles.alpha)[:, None] * d * np.exp(-1j * ms * angles.gamma)[None, :]


def wigner_D(n, m_row, m_col, angles: EulerAngles) -> complex:
    """Single Wigner-D coefficient ``D^n_{m_row, m_col}``."""
    n = _check_order(n)
    for m in (m_row, m_col):
        if int(m) != m or abs(m) > n:
            raise ValueError(f"need |m| <= n, got n={n}, m={m}")
    return complex(wigner_D_matrix(n, angles)[m_row + n, m_col + n])
