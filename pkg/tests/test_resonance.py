import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusdyn import FourierPotential, ParametricPotential, QuadraticForm
from torusdyn.resonance import (
    AdaptedFrame,
    ResonanceModule,
    adapted_frame,
    averaged_system,
    hermite_column_form,
    random_primitive_module,
    resonance_circle,
    scan_bifurcations,
    small_denominator_certificate,
    strong_double_resonances,
    truncation_order,
)

FLAT3 = QuadraticForm.identity(3)


def det3(p):
    return int(round(np.linalg.det(np.asarray(p, float))))


def test_adapted_frame_e3_is_identity_compatible():
    fr = adapted_frame(ResonanceModule.line((0, 0, 1)))
    assert det3(fr.P) in (-1, 1)
    assert tuple(fr.P[:, 2]) == (0, 0, 1)


def test_adapted_frame_diagonal_vector():
    fr = adapted_frame(ResonanceModule.line((1, 1, 1)))
    assert det3(fr.P) in (-1, 1)
    assert tuple(fr.P[:, 2]) == (1, 1, 1)
    # Hermite-form oracle: k @ U has the unit in the last slot
    h, u = hermite_column_form(np.array([[1, 1, 1]]))
    assert abs(h[0, 2]) == 1 and h[0, 0] == h[0, 1] == 0


def test_adapted_frame_rank2_plane():
    fr = adapted_frame(ResonanceModule.plane((1, 0, 0), (0, 1, 0)))
    assert det3(fr.P) in (-1, 1)
    assert tuple(fr.P[:, 1]) == (1, 0, 0)
    assert tuple(fr.P[:, 2]) == (0, 1, 0)


def test_adapted_frame_kills_slow_frequency():
    k = np.array([2, -3, 5])
    fr = adapted_frame(ResonanceModule.line(k))
    omega = np.array([3.0, 2.0, 0.0])  # orthogonal to k
    assert abs(np.dot(omega, k)) == 0
    wt = fr.transform_frequency(omega)
    assert abs(wt[2]) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2))
def test_adapted_frame_unimodular_property(seed, rank):
    rng = np.random.default_rng(seed)
    mod = random_primitive_module(rng, rank=rank)
    fr = adapted_frame(mod)
    assert det3(fr.P) in (-1, 1)


def test_nonprimitive_generator_rejected():
    with pytest.raises(ValueError):
        ResonanceModule.line((2, 4, 6))


def test_resonance_circle_flat_unit():
    circ = resonance_circle(FLAT3, 0.5, (0, 0, 1))
    pts = circ.points(np.linspace(0, 1, 64, endpoint=False))
    assert np.allclose(pts[:, 2], 0.0, atol=1e-10)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-10)


def test_resonance_circle_residual_certified():
    circ = resonance_circle(QuadraticForm(3, np.diag([1.0, 2.0, 3.0])), 0.5, (1, 1, 1))
    assert circ.residual(4096) < 1e-10


def test_two_circles_intersect_at_two_points():
    c1 = resonance_circle(FLAT3, 0.5, (0, 1, 0))
    # intersection with the (0,0,1)-circle: r2 = r3 = 0, |r| = 1
    phis = np.linspace(0, 1, 8192, endpoint=False)
    pts = c1.points(phis)
    crossings = []
    vals = pts[:, 2]
    for i in range(len(phis)):
        j = (i + 1) % len(phis)
        if vals[i] == 0 or vals[i] * vals[j] < 0:
            crossings.append(pts[i])
    assert len(crossings) == 2
    for p in crossings:
        assert np.allclose(sorted(np.abs(np.round(p, 3))), [0, 0, 1], atol=1e-2)


def test_strong_double_resonances_desk_example():
    circ = resonance_circle(FLAT3, 0.5, (0, 0, 1))
    sdr = strong_double_resonances(circ, 1)
    assert len(sdr) == 8
    locs = {tuple(np.round(p, 6)) for p in sdr.locations()}
    s = 1 / np.sqrt(2)
    expected = {
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
        (round(s, 6), round(s, 6), 0), (-round(s, 6), -round(s, 6), 0),
        (round(s, 6), -round(s, 6), 0), (-round(s, 6), round(s, 6), 0),
    }
    normalized = {tuple(abs(x) if abs(x) < 1e-9 else x for x in p) for p in locs}
    assert normalized == {tuple(float(x) for x in q) for q in expected}


def test_strong_double_resonances_empty_and_monotone():
    circ = resonance_circle(FLAT3, 0.5, (0, 0, 1))
    assert len(strong_double_resonances(circ, 0)) == 0
    s1 = {tuple(np.round(p, 6)) for p in strong_double_resonances(circ, 1).locations()}
    s2 = {tuple(np.round(p, 6)) for p in strong_double_resonances(circ, 2).locations()}
    assert s1 <= s2


def test_double_resonance_points_satisfy_equations():
    circ = resonance_circle(QuadraticForm(3, np.diag([1.0, 1.5, 0.7])), 0.8, (1, 0, 1))
    fr = adapted_frame(circ.module)
    sdr = strong_double_resonances(circ, 2, frame=fr)
    a = circ.kinetic.matrix
    for p, k_hat in sdr.points:
        kfull = fr.P @ np.array([k_hat[0], k_hat[1], 0])
        assert abs(np.dot(a @ p, kfull)) < 1e-8
        assert abs(0.5 * p @ a @ p - 0.8) < 1e-8


def test_truncation_order_finite_support():
    f = FourierPotential.from_cosines(3, {(1, 0, 0): 1.0})
    K, tail = truncation_order(f, 1e-9, 2)
    assert K == 1 and tail == 0.0


def test_truncation_order_direct_lattice_sum_oracle():
    K, tail = truncation_order(None, 1e-3, 2, M=1.0)

    # oracle: direct summation over a box, plus directly summed sup-norm
    # shells for everything outside the box (all shells |k|_inf = n > big
    # lie beyond any |k|_1 <= kcut cut used here)
    big = 60

    def tail_sum(kcut):
        total = 0.0
        for k1 in range(-big, big + 1):
            for k2 in range(-big, big + 1):
                for k3 in range(-big, big + 1):
                    if (k1, k2, k3) == (0, 0, 0):
                        continue
                    if abs(k1) + abs(k2) + abs(k3) > kcut:
                        total += 1.0 / max(abs(k1), abs(k2), abs(k3)) ** 4
        shell_tail = sum(((2 * n + 1) ** 3 - (2 * n - 1) ** 3) / n**4
                         for n in range(big + 1, 200_000))
        return (total + shell_tail) / (2 * np.pi) ** 4

    assert tail_sum(K) <= 1e-3 + 1e-9
    assert tail_sum(K - 1) > 1e-3
    assert tail == pytest.approx(tail_sum(K), rel=1e-4)


def test_truncation_order_monotone_in_delta():
    k1, _ = truncation_order(None, 1e-3, 2, M=1.0)
    k2, _ = truncation_order(None, 1e-2, 2, M=1.0)
    assert k1 >= k2


def test_averaged_system_rank1_filtering():
    f = FourierPotential.from_cosines(3, {(1, 0, 0): 1.0, (0, 0, 1): 2.0})
    m = ResonanceModule.line((0, 0, 1))
    av = averaged_system(FLAT3, f, np.array([1.0, 0.3, 0.0]), m)
    assert av.dim == 1
    xs = np.linspace(0, 1, 7)[:, None]
    assert np.allclose(av.potential(xs), 2.0 * np.cos(2 * np.pi * xs.ravel()))


def test_averaged_system_rank2_filtering():
    f = FourierPotential.from_cosines(3, {(0, 1, 1): 1.0})
    m = ResonanceModule.plane((0, 1, 0), (0, 0, 1))
    av = averaged_system(FLAT3, f, np.array([1.0, 0.0, 0.0]), m)
    assert av.dim == 2
    g = np.random.default_rng(1).random((5, 2))
    assert np.allclose(av.potential(g), np.cos(2 * np.pi * (g[:, 0] + g[:, 1])))


def test_averaged_system_fast_only_is_constant():
    f = FourierPotential.from_cosines(3, {(1, 0, 0): 1.0, (1, 1, 0): 0.5})
    m = ResonanceModule.line((0, 0, 1))
    av = averaged_system(FLAT3, f, np.array([1.0, 0.3, 0.0]), m)
    assert av.potential.support == []


def test_averaged_system_requires_resonant_action():
    f = FourierPotential.from_cosines(3, {(0, 0, 1): 1.0})
    m = ResonanceModule.line((0, 0, 1))
    with pytest.raises(ValueError):
        averaged_system(FLAT3, f, np.array([0.0, 0.0, 1.0]), m)


def test_averaged_potential_frame_independent_values():
    # averaging in two adapted frames gives unimodularly conjugate potentials
    f = FourierPotential.from_cosines(3, {(0, 1, 1): 0.7, (1, 0, 0): 0.3})
    m = ResonanceModule.plane((0, 1, 0), (0, 0, 1))
    fr1 = adapted_frame(m)
    p2 = fr1.P.copy()
    p2[:, 0] = p2[:, 0] + p2[:, 1]  # another unimodular completion
    fr2 = AdaptedFrame(p2, m)
    r0 = np.array([1.0, 0.0, 0.0])
    av1 = averaged_system(FLAT3, f, r0, m, fr1)
    av2 = averaged_system(FLAT3, f, r0, m, fr2)
    # same set of harmonic amplitudes (the relabelling is unimodular)
    amps1 = sorted(abs(c) for c in av1.potential.coefficients().values())
    amps2 = sorted(abs(c) for c in av2.potential.coefficients().values())
    assert np.allclose(amps1, amps2)


def test_scan_bifurcations_trivial_no_crossings():
    circ = resonance_circle(FLAT3, 0.5, (0, 0, 1))
    f = ParametricPotential.from_cosines(3, {(0, 0, 1): lambda r: 1.0})
    scan = scan_bifurcations(FLAT3, f, circ, grid=64)
    assert scan.points == [] and scan.degenerate_flags == []


def test_scan_bifurcations_locates_known_crossing():
    circ = resonance_circle(FLAT3, 0.5, (0, 0, 1))
    # V = cos(4 pi x) + r1 cos(2 pi x): top maxima swap where r1 = 0
    f = ParametricPotential.from_cosines(
        3, {(0, 0, 2): lambda r: 1.0, (0, 0, 1): lambda r: r[0]}
    )
    scan = scan_bifurcations(FLAT3, f, circ, grid=128)
    assert len(scan.points) == 2
    for p, deriv in scan.points:
        assert abs(p[0]) < 1e-2  # r1 = 0 on the circle
        assert deriv != 0.0
    # oracle: gap 2 r1 = 2 cos(2 pi phi), derivative -4 pi sin at the crossing
    assert abs(abs(scan.points[0][1]) - 4 * np.pi) < 0.1


def test_scan_bifurcations_flags_degenerate():
    circ = resonance_circle(FLAT3, 0.5, (0, 0, 1))
    f = ParametricPotential.from_cosines(3, {(1, 0, 0): lambda r: 1.0})  # V == 0
    scan = scan_bifurcations(FLAT3, f, circ, grid=16)
    assert len(scan.degenerate_flags) == 16


def test_small_denominator_positive_off_resonances():
    circ = resonance_circle(FLAT3, 0.5, (0, 0, 1))
    sdr = strong_double_resonances(circ, 1)
    cert = small_denominator_certificate(circ, 1, rho=0.05, exclude=sdr.locations())
    assert cert["min"] > 0
    assert cert["C0"] > 0
    # closer excision radius weakens the bound monotonically
    cert2 = small_denominator_certificate(circ, 1, rho=0.1, exclude=sdr.locations())
    assert cert2["min"] >= cert["min"]
