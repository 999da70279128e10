"""Plane-wave sound-field simulation and the end-to-end processing chain."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .beamforming import beamformer_output
from .harmonics import MAX_ORDER, Direction, num_coeffs, sh_degrees, sh_matrix
from .radial import radial_table
from .sampling import (
    ArrayGeometry,
    ModalCoefficients,
    build_matrix_B,
    estimate_modal,
    solve_sampling_operator,
    white_noise_gain,
)

SPEED_OF_SOUND = 343.0

#: extra synthesis orders above the array order when none is given
DEFAULT_ORDER_MARGIN = 8


@dataclass(frozen=True)
class PlaneWaveSource:
    amplitude: complex
    arrival: Direction

    def __post_init__(self):
        a = complex(self.amplitude)
        if not np.isfinite(a):
            raise ValueError("source amplitude must be finite")
        object.__setattr__(self, "amplitude", a)


@dataclass(frozen=True)
class Scenario:
    """A set of plane waves at wavenumber ``k`` plus optional sensor noise.

    ``n_sim`` is the order at which the incident field is truncated; when
    left as ``None``, :func:`run_chain` uses the array order plus 8.
    """

    sources: tuple[PlaneWaveSource, ...]
    k: float
    n_sim: int | None = None
    noise_std: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")
        if self.n_sim is not None and not 0 <= self.n_sim <= MAX_ORDER:
            raise ValueError(f"synthesis order must lie in [0, {MAX_ORDER}]")
        if self.noise_std < 0:
            raise ValueError("noise level must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n_sim": self.n_sim,
            "noise_std": self.noise_std,
            "seed": self.rng_seed,
            "sources": [
                {
                    "amplitude": [s.amplitude.real, s.amplitude.imag],
                    "theta": s.arrival.theta,
                    "phi": s.arrival.phi,
                }
                for s in self.sources
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, default_n_sim: int | None = None) -> "Scenario":
        """Parse a scenario document.

        The wavenumber is given either as ``k`` or as ``frequency`` (Hz) with
        an optional ``speed_of_sound`` (default 343 m/s).
        """
        try:
            if "k" in data:
                k = float(data["k"])
            else:
                c = float(data.get("speed_of_sound", SPEED_OF_SOUND))
                k = 2 * np.pi * float(data["frequency"]) / c
            sources = []
            for s in data.get("sources", []):
                amp = s.get("amplitude", 1.0)
                if isinstance(amp, (list, tuple)):
                    amp = complex(amp[0], amp[1])
                sources.append(
                    PlaneWaveSource(complex(amp), Direction(float(s["theta"]), float(s["phi"])))
                )
            n_sim = data.get("n_sim", default_n_sim)
            kwargs = {} if n_sim is None else {"n_sim": int(n_sim)}
            return cls(
                tuple(sources),
                k,
                noise_std=float(data.get("noise_std", 0.0)),
                rng_seed=int(data.get("seed", 0)),
                **kwargs,
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed scenario document: {exc}") from exc


def load_scenario(path, default_n_sim: int | None = None) -> Scenario:
    with open(path) as fh:
        return Scenario.from_dict(json.load(fh), default_n_sim)


def plane_wave_to_modal(src: PlaneWaveSource, n_sim: int) -> ModalCoefficients:
    """Amplitude coefficients ``a_nm = A conj(Y_n^m(arrival))`` of one plane wave."""
    y = sh_matrix(n_sim, src.arrival.theta, src.arrival.phi)
    return ModalCoefficients(n_sim, src.amplitude * y.conj())


def field_coefficients(sources: Sequence[PlaneWaveSource], n_sim: int) -> np.ndarray:
    a = np.zeros(num_coeffs(n_sim), dtype=complex)
    for s in sources:
        a += plane_wave_to_modal(s, n_sim).values
    return a


def synthesize_pressure(sc: Scenario, geom: ArrayGeometry) -> np.ndarray:
    """Microphone pressures ``sum_nm a_nm b_n(k r_j) Y_n^m(Omega_j)`` plus noise.

    Noise is circular complex Gaussian with standard deviation
    ``noise_std`` per microphone, drawn from ``default_rng(rng_seed)``.
    """
    if sc.n_sim is None:
        raise ValueError("scenario has no synthesis order")
    a = field_coefficients(sc.sources, sc.n_sim)
    n, _ = sh_degrees(sc.n_sim)
    b = radial_table(geom.boundary, sc.n_sim, sc.k, geom.r)  # (N+1, M)
    Y = sh_matrix(sc.n_sim, geom.theta, geom.phi)  # (M, Q)
    p = np.einsum("q,qj,jq->j", a, b[n], Y)
    if sc.noise_std > 0:
        rng = np.random.default_rng(sc.rng_seed)
        z = rng.standard_normal((2, geom.M))
        p = p + sc.noise_std / np.sqrt(2.0) * (z[0] + 1j * z[1])
    return p


@dataclass
class ChainResult:
    """Output ``y`` of the array chain plus diagnostics."""

    y: complex
    a_hat: ModalCoefficients
    condition_number: float
    wng_db: float
    pattern_gains: np.ndarray
    aliasing_residual: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "y": [self.y.real, self.y.imag],
            "abs_y": abs(self.y),
            "condition_number": _finite_or_flag(self.condition_number),
            "wng_db": _finite_or_flag(self.wng_db),
            "pattern_gains": [[g.real, g.imag] for g in self.pattern_gains],
            "aliasing_residual": _finite_or_flag(self.aliasing_residual),
        }


def _finite_or_flag(x):
    x = float(x)
    return x if np.isfinite(x) else "inf" if x > 0 else "-inf" if x < 0 else "nan"


def run_chain(
    sc: Scenario,
    geom: ArrayGeometry,
    N: int,
    weights,
    reg: float = 0.0,
) -> ChainResult:
    """Synthesize pressures, estimate ``a_nm`` to order ``N`` and beamform.

    ``aliasing_residual`` is the relative error of the order-``N`` estimate
    against the true noiseless field coefficients,
    ``||a_hat - a||/||a||``; it measures leakage from orders above ``N``
    (and noise, when present).
    """
    if sc.n_sim is None:
        sc = replace(sc, n_sim=min(N + DEFAULT_ORDER_MARGIN, MAX_ORDER))
    if N > sc.n_sim:
        raise ValueError("array order exceeds the synthesis order")
    if weights.order > N:
        raise ValueError("weights order exceeds the array order")
    B = build_matrix_B(geom, N, sc.k)
    op = solve_sampling_operator(B, reg)
    p = synthesize_pressure(sc, geom)
    a_hat = estimate_modal(op, p)
    y = beamformer_output(weights, a_hat)

    g = weights.to_general()
    gains = np.array(
        [s.amplitude * g.pattern(s.arrival.theta, s.arrival.phi) for s in sc.sources],
        dtype=complex,
    )
    a_true = field_coefficients(sc.sources, sc.n_sim)[: num_coeffs(N)]
    norm = np.linalg.norm(a_true)
    alias = np.linalg.norm(a_hat.values - a_true) / norm if norm > 0 else 0.0
    look = g.look
    if look is None:
        wng = float("nan")
    else:
        try:
            wng = white_noise_gain(op, weights, look)
        except ValueError:
            wng = float("-inf")
    return ChainResult(
        y, a_hat, B.condition_number, wng, gains, float(alias), {"n_sim": sc.n_sim}
    )
