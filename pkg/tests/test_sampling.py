import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import sph_harm_y

from sphmic.beamforming import GeneralWeights, delay_sum_weights, regular_weights
from sphmic.harmonics import Direction, EulerAngles, num_coeffs, sh_degrees
from sphmic.radial import FreeField, OpenPressure, RigidSphere, radial_table
from sphmic.sampling import (
    ArrayGeometry,
    MicrophonePosition,
    ModalCoefficients,
    ModalRole,
    RankDeficientError,
    SamplingMatrixB,
    build_matrix_B,
    condition_numbers,
    conditioning_objective,
    estimate_modal,
    fibonacci_sphere,
    jitter_directions,
    load_geometry,
    microphone_weights,
    optimize_positions,
    save_geometry,
    solve_sampling_operator,
    sphere_sampling,
    white_noise_gain,
)
from sphmic.simulation import PlaneWaveSource, Scenario, synthesize_pressure

R = 0.1


def rigid32():
    s = fibonacci_sphere(32)
    return ArrayGeometry.on_sphere(R, s.theta, s.phi, RigidSphere(R))


def open_grid(N, scheme="gaussian"):
    s = sphere_sampling(scheme, N)
    return ArrayGeometry.on_sphere(R, s.theta, s.phi, OpenPressure())


def scipy_B(geom, N, k):
    # independent assembly: scipy harmonics, radial values from the library
    n, m = sh_degrees(N)
    Y = sph_harm_y(n[:, None], m[:, None], geom.theta[None, :], geom.phi[None, :])
    b = radial_table(geom.boundary, N, k, geom.r)
    return b[n] * Y


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------


def test_geometry_validation():
    with pytest.raises(ValueError):
        ArrayGeometry([0.1, -0.1], [0.1, 0.2], [0.0, 0.0], OpenPressure())
    with pytest.raises(ValueError):
        ArrayGeometry([0.1, 0.1], [0.5, 0.5], [1.0, 1.0], OpenPressure())
    with pytest.raises(ValueError):
        ArrayGeometry([0.05], [0.5], [1.0], RigidSphere(0.1))
    with pytest.raises(ValueError):
        MicrophonePosition(0.0, Direction(0.0, 0.0))


def test_geometry_from_positions_and_mics():
    mics = [MicrophonePosition(0.1, Direction(0.3, 1.0)), MicrophonePosition(0.12, Direction(2.0, 5.0))]
    g = ArrayGeometry.from_positions(mics, FreeField())
    assert g.M == 2
    assert g.mics == mics
    assert not g.single_radius()


def test_geometry_file_round_trip(tmp_path):
    g = jitter_directions(rigid32(), 0.1, rng_seed=3)
    path = tmp_path / "g.json"
    save_geometry(g, path)
    h = load_geometry(path)
    np.testing.assert_array_equal(h.r, g.r)
    np.testing.assert_array_equal(h.theta, g.theta)
    np.testing.assert_array_equal(h.phi, g.phi)
    assert h.boundary == g.boundary
    doc = json.loads(path.read_text())
    assert set(doc) == {"boundary", "mics"}
    assert doc["boundary"] == {"type": "rigid", "r0": R}


@pytest.mark.parametrize(
    "doc",
    [{}, {"boundary": {"type": "open"}}, {"boundary": {"type": "open"}, "mics": []},
     {"boundary": {"type": "open"}, "mics": [{"r": 0.1, "theta": 0.1}]}],
)
def test_geometry_document_errors(doc):
    with pytest.raises(ValueError):
        ArrayGeometry.from_dict(doc)


# --------------------------------------------------------------------------
# matrix B
# --------------------------------------------------------------------------


def test_single_mic_single_entry():
    g = ArrayGeometry([0.2], [1.0], [2.0], OpenPressure())
    k = 7.0
    B = build_matrix_B(g, 0, k)
    assert B.entries.shape == (1, 1)
    assert B.entries[0, 0] == pytest.approx(math.sqrt(4 * math.pi) * math.sin(1.4) / 1.4, rel=1e-13)


def test_bessel_zero_flags_infinite_condition():
    g = open_grid(1)
    B = build_matrix_B(g, 1, np.pi / R)
    assert B.condition_number == math.inf
    assert B.rank_deficient
    # order 0 as well: one row, one vanishing singular value
    assert build_matrix_B(g, 0, np.pi / R).condition_number == math.inf


def test_condition_matches_svd_oracle():
    g = rigid32()
    B = build_matrix_B(g, 4, 30.0)
    ref = np.linalg.svd(scipy_B(g, 4, 30.0), compute_uv=False)
    assert B.condition_number == pytest.approx(ref[0] / ref[-1], rel=1e-6)
    np.testing.assert_allclose(B.entries, scipy_B(g, 4, 30.0), atol=1e-12)


def test_row_index_convention():
    g = rigid32()
    B = build_matrix_B(g, 3, 20.0)
    b = radial_table(g.boundary, 3, 20.0, g.r)
    for n in range(4):
        for m in range(-n, n + 1):
            q = n * n + n + m
            y = sph_harm_y(n, m, g.theta, g.phi)
            np.testing.assert_allclose(B.entries[q], b[n] * y, atol=1e-12)


def test_order_exceeds_microphones():
    g = open_grid(1)  # 8 mics
    with pytest.raises(ValueError):
        build_matrix_B(g, 2, 10.0)


def test_condition_numbers_vectorized():
    g = rigid32()
    ks = np.array([10.0, 20.0, 30.0])
    np.testing.assert_allclose(
        condition_numbers(g, 4, ks), [build_matrix_B(g, 4, k).condition_number for k in ks], rtol=1e-10
    )


def test_permutation_equivariance():
    g = rigid32()
    perm = np.random.default_rng(1).permutation(g.M)
    B = build_matrix_B(g, 4, 25.0)
    Bp = build_matrix_B(g.permuted(perm), 4, 25.0)
    np.testing.assert_allclose(Bp.entries, B.entries[:, perm], atol=1e-13)
    assert Bp.condition_number == pytest.approx(B.condition_number, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0, 2 * np.pi), st.floats(0, np.pi), st.floats(0, 2 * np.pi),
    st.integers(16, 40), st.floats(5.0, 40.0),
)
def test_condition_rotation_invariant(a, b, c, M, k):
    s = fibonacci_sphere(M)
    g = ArrayGeometry.on_sphere(R, s.theta, s.phi, RigidSphere(R))
    th, ph = EulerAngles(a, b, c).rotate(g.theta, g.phi)
    gr = g.with_coords(theta=th, phi=ph)
    c0 = build_matrix_B(g, 3, k).condition_number
    c1 = build_matrix_B(gr, 3, k).condition_number
    assert c1 == pytest.approx(c0, rel=1e-6)


# --------------------------------------------------------------------------
# sampling operator
# --------------------------------------------------------------------------


def test_orthonormal_rows_give_conjugate_transpose():
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((7, 4)) + 1j * rng.standard_normal((7, 4))
    Q, _ = np.linalg.qr(Z)
    entries = Q.T  # 4 x 7 with orthonormal rows
    B = SamplingMatrixB(1, 1.0, entries, np.linalg.svd(entries, compute_uv=False))
    op = solve_sampling_operator(B)
    # stored rows c_q^j; the solution matrix itself is B^H
    np.testing.assert_allclose(op.coefficients.T, entries.conj().T, atol=1e-13)


def test_orthogonality_system_rigid32():
    op = solve_sampling_operator(build_matrix_B(rigid32(), 4, 25.0))
    res = op.orthogonality_residual()
    assert np.abs(res).max() < 1e-8
    # same check by direct substitution of the sum over microphones
    B = op.matrix.entries
    direct = np.einsum("qj,pj->qp", op.coefficients, B)
    assert np.abs(direct - np.eye(25)).max() < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.floats(5.0, 40.0), st.integers(0, 1000))
def test_orthogonality_whenever_well_conditioned(N, k, seed):
    g = jitter_directions(rigid32(), 0.15, rng_seed=seed)
    B = build_matrix_B(g, N, k)
    if B.condition_number >= 1e3:
        return
    op = solve_sampling_operator(B)
    assert np.abs(op.orthogonality_residual()).max() < 1e-8


def test_rank_deficient_solve_raises():
    B = build_matrix_B(open_grid(2), 2, np.pi / R)
    with pytest.raises(RankDeficientError):
        solve_sampling_operator(B)
    with pytest.raises(np.linalg.LinAlgError):
        solve_sampling_operator(B)


@pytest.mark.parametrize("reg", [1e-2, 1e-4, 1.0])
def test_tikhonov_norm_bounds(reg):
    g = open_grid(2)
    B = build_matrix_B(g, 2, np.pi / R * (1 - 1e-9))
    op = solve_sampling_operator(B, reg)
    C = op.coefficients
    assert np.all(np.isfinite(C))
    s = B.singular_values
    rows = np.linalg.norm(C, axis=1)
    assert rows.max() <= 1 / (2 * math.sqrt(reg)) * (1 + 1e-12)
    assert rows.max() <= s[0] / (s[-1] ** 2 + reg) * (1 + 1e-12)


def test_negative_regularization_rejected():
    with pytest.raises(ValueError):
        solve_sampling_operator(build_matrix_B(rigid32(), 2, 20.0), -1.0)


def test_estimate_modal_zero_and_length():
    op = solve_sampling_operator(build_matrix_B(rigid32(), 3, 20.0))
    a = estimate_modal(op, np.zeros(32))
    assert np.all(a.values == 0)
    assert a.role is ModalRole.AMPLITUDE
    with pytest.raises(ValueError):
        estimate_modal(op, np.zeros(31))


def _plane_wave_pressures(geom, N, k, arrivals, amps):
    sc = Scenario([PlaneWaveSource(a, d) for a, d in zip(amps, arrivals)], k, n_sim=N)
    return synthesize_pressure(sc, geom)


def test_estimate_single_plane_wave():
    g = rigid32()
    N, k = 4, 25.0
    op = solve_sampling_operator(build_matrix_B(g, N, k))
    d0 = Direction(1.1, 4.0)
    a = estimate_modal(op, _plane_wave_pressures(g, N, k, [d0], [1.0]))
    n, m = sh_degrees(N)
    ref = np.conj(sph_harm_y(n, m, d0.theta, d0.phi))
    assert np.abs(a.values - ref).max() < 1e-8


def test_estimate_two_plane_waves():
    g = rigid32()
    N, k = 4, 25.0
    op = solve_sampling_operator(build_matrix_B(g, N, k))
    d1, d2 = Direction(0.4, 0.1), Direction(2.5, 3.3)
    a = estimate_modal(op, _plane_wave_pressures(g, N, k, [d1, d2], [1.0, 1.0]))
    n, m = sh_degrees(N)
    ref = np.conj(sph_harm_y(n, m, d1.theta, d1.phi)) + np.conj(sph_harm_y(n, m, d2.theta, d2.phi))
    assert np.abs(a.values - ref).max() < 1e-8


def test_pressure_role_keeps_radial_factor():
    g = rigid32()
    N, k = 3, 20.0
    B = build_matrix_B(g, N, k)
    op_a = solve_sampling_operator(B)
    op_p = solve_sampling_operator(B, role="pressure_modal")
    p = _plane_wave_pressures(g, N, k, [Direction(0.7, 2.0)], [1.0])
    a = estimate_modal(op_a, p)
    pnm = estimate_modal(op_p, p)
    n, _ = sh_degrees(N)
    b = radial_table(g.boundary, N, k, R)
    assert pnm.role is ModalRole.PRESSURE
    np.testing.assert_allclose(pnm.values, a.values * b[n], atol=1e-10)


def test_pressure_role_needs_single_radius():
    s = fibonacci_sphere(20)
    r = np.where(np.arange(20) % 2, R, 0.7 * R)
    g = ArrayGeometry(r, s.theta, s.phi, FreeField())
    with pytest.raises(ValueError):
        solve_sampling_operator(build_matrix_B(g, 2, 20.0), role="pressure_modal")


def test_modal_coefficients_container():
    v = np.arange(9) + 0j
    a = ModalCoefficients(2, v)
    assert a[1, -1] == 1 and a[2, 2] == 8
    assert a.truncate(1).values.shape == (4,)
    with pytest.raises(ValueError):
        ModalCoefficients(2, v[:8])
    with pytest.raises(ValueError):
        a.truncate(3)


# --------------------------------------------------------------------------
# sphere samplings
# --------------------------------------------------------------------------


def test_gaussian_order_zero():
    s = sphere_sampling("gaussian", 0)
    assert len(s) == 2
    np.testing.assert_allclose(s.theta, np.pi / 2)
    assert s.weights.sum() == pytest.approx(4 * np.pi)


@pytest.mark.parametrize("scheme", ["gaussian", "equal_angle"])
@pytest.mark.parametrize("N", [1, 3, 6])
def test_quadrature_exactness(scheme, N):
    s = sphere_sampling(scheme, N)
    n, m = sh_degrees(N)
    Y = sph_harm_y(n[None, :], m[None, :], s.theta[:, None], s.phi[:, None])
    gram = (Y.conj() * s.weights[:, None]).T @ Y
    assert np.abs(gram - np.eye(num_coeffs(N))).max() < 1e-12


def test_scheme_sizes():
    assert len(sphere_sampling("equal_angle", 2)) == 36
    assert len(sphere_sampling("gaussian", 2)) == 18
    assert len(sphere_sampling("near_uniform", 4, M=32)) == 32
    assert len(sphere_sampling("near_uniform", 4)) >= 25


def test_near_uniform_conditioning():
    s = sphere_sampling("near_uniform", 4, M=32)
    Y = sph_harm_y(*[a[:, None] for a in sh_degrees(4)], s.theta[None, :], s.phi[None, :])
    sv = np.linalg.svd(Y, compute_uv=False)
    assert sv[0] / sv[-1] < 5


@pytest.mark.parametrize("args", [("gaussian", 11), ("gaussian", -1), ("hexagonal", 2), ("near_uniform", 3, 10)])
def test_scheme_errors(args):
    with pytest.raises(ValueError):
        sphere_sampling(*args)


# --------------------------------------------------------------------------
# optimizer
# --------------------------------------------------------------------------


def test_optimizer_empty_moveable_returns_input():
    g = jitter_directions(rigid32(), 0.2)
    out, hist = optimize_positions(g, 3, [20.0, 30.0], moveable=())
    assert out is g
    assert hist["initial"] == hist["final"]


def test_optimizer_zero_budget_returns_input():
    g = jitter_directions(rigid32(), 0.2)
    out, hist = optimize_positions(g, 3, [20.0], moveable=range(32), iters=0)
    assert out is g
    assert hist["evaluations"] == 0


def test_optimizer_monotone_and_deterministic():
    s = fibonacci_sphere(16)
    g = jitter_directions(ArrayGeometry.on_sphere(R, s.theta, s.phi, RigidSphere(R)), 0.2)
    band = [20.0, 30.0, 40.0]
    a, ha = optimize_positions(g, 3, band, moveable=range(16), iters=150, rng_seed=4)
    b, hb = optimize_positions(g, 3, band, moveable=range(16), iters=150, rng_seed=4)
    assert ha["final"] <= ha["initial"]
    assert ha == hb
    np.testing.assert_array_equal(a.theta, b.theta)
    np.testing.assert_array_equal(a.phi, b.phi)
    assert conditioning_objective(a, 3, band) == pytest.approx(ha["final"], rel=1e-12)


def test_optimizer_only_moves_moveable():
    s = fibonacci_sphere(16)
    g = jitter_directions(ArrayGeometry.on_sphere(R, s.theta, s.phi, RigidSphere(R)), 0.2)
    out, _ = optimize_positions(g, 3, [25.0], moveable=[0, 5], iters=100)
    fixed = np.setdiff1d(np.arange(16), [0, 5])
    np.testing.assert_array_equal(out.theta[fixed], g.theta[fixed])
    np.testing.assert_array_equal(out.phi[fixed], g.phi[fixed])
    np.testing.assert_array_equal(out.r, g.r)


def test_shell_radii_remove_bessel_zero():
    s = fibonacci_sphere(16)
    g = ArrayGeometry.on_sphere(R, s.theta, s.phi, FreeField())
    band = [25.0, np.pi / R, 35.0]
    assert conditioning_objective(g, 2, band) == math.inf
    out, hist = optimize_positions(
        g, 2, band, moveable=range(16), iters=400, radius_bounds=(0.08, 0.15)
    )
    assert math.isfinite(hist["final"])
    assert np.all((out.r >= 0.08) & (out.r <= 0.15))


def test_optimizer_errors():
    g = rigid32()
    with pytest.raises(ValueError):
        optimize_positions(g, 3, [20.0], moveable=[40])
    with pytest.raises(ValueError):
        optimize_positions(g, 3, [20.0], moveable=[0], radius_bounds=(0.05, 0.2))


# --------------------------------------------------------------------------
# white-noise gain
# --------------------------------------------------------------------------


def test_wng_single_microphone():
    g = ArrayGeometry([0.1], [0.4], [0.0], OpenPressure())
    k = 10.0
    op = solve_sampling_operator(build_matrix_B(g, 0, k))
    w = GeneralWeights(np.array([1.0 + 0j]), look=Direction(0.0, 0.0))
    wj = microphone_weights(op, w)
    direct = abs(w.pattern(0.0, 0.0)) ** 2 / abs(wj[0]) ** 2
    assert white_noise_gain(op, w, reference="free_field") == pytest.approx(10 * math.log10(direct), abs=1e-12)
    # array reference: unit wave gives |b_0 Y_00|^2 at the single sensor
    v = abs(op.matrix.entries[0, 0] / math.sqrt(4 * math.pi)) ** 2
    assert white_noise_gain(op, w) == pytest.approx(10 * math.log10(direct / v), abs=1e-12)


@pytest.mark.parametrize("boundary", [OpenPressure(), RigidSphere(R)])
def test_delay_sum_wng_flat(boundary):
    # order 6 covers the whole band kr <= 4
    s = sphere_sampling("gaussian", 6)
    g = ArrayGeometry.on_sphere(R, s.theta, s.phi, boundary)
    for look in (Direction(0.9, 1.2), Direction(2.6, 4.0)):
        vals = []
        for kr in np.linspace(0.5, 4.0, 10):
            k = kr / R
            op = solve_sampling_operator(build_matrix_B(g, 6, k))
            vals.append(white_noise_gain(op, delay_sum_weights(6, look, g, k)))
        assert np.ptp(vals) < 0.1


def test_wng_drops_near_bessel_zero():
    g = open_grid(3)
    look = Direction(0.3, 0.2)
    w = regular_weights(3, look)

    def wng(kr):
        return white_noise_gain(solve_sampling_operator(build_matrix_B(g, 3, kr / R)), w)

    assert wng(2.5) - wng(np.pi - 1e-3) > 20


def test_wng_errors():
    op = solve_sampling_operator(build_matrix_B(rigid32(), 2, 20.0))
    with pytest.raises(ValueError):
        white_noise_gain(op, GeneralWeights(np.zeros(9, complex)), Direction(0, 0))
    with pytest.raises(ValueError):
        white_noise_gain(op, GeneralWeights(np.ones(9, complex)))  # no look
    with pytest.raises(ValueError):
        white_noise_gain(op, regular_weights(3, Direction(0, 0)))
    with pytest.raises(ValueError):
        white_noise_gain(op, regular_weights(2, Direction(0, 0)), reference="bogus")
