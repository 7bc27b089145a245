import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusdyn import ClassicalSystem, FourierPotential, PhaseState, QuadraticForm
from torusdyn.integrate import (
    IntegrationError,
    JacobiDomainError,
    integrate,
    integrate_symplectic,
    jacobi_length,
    lift_defect,
    maupertuis_lift,
    project_to_geodesic,
    rho_involution,
)
from torusdyn.systems import system_from_text, system_to_text, trajectory_to_csv

FLAT = ClassicalSystem(QuadraticForm.identity(2), FourierPotential.zero(2))
WIGGLY = ClassicalSystem(
    QuadraticForm.identity(2),
    FourierPotential.from_cosines(2, {(1, 0): 1.0, (0, 1): 2.0}),
)


def test_energy_free_motion():
    assert FLAT.energy(PhaseState.of((0, 0), (1, 0))) == pytest.approx(0.5)


def test_energy_at_potential_max():
    # max of cos + 2cos at the origin, cross-checked by the grid scan
    assert WIGGLY.critical_energy == pytest.approx(3.0, abs=1e-12)
    assert WIGGLY.energy(PhaseState.of((0, 0), (0, 0))) == pytest.approx(3.0)


def test_energy_anisotropic_kinetic():
    sys = ClassicalSystem(QuadraticForm(2, np.diag([1.0, 2.0])), FourierPotential.zero(2))
    assert sys.energy(PhaseState.of((0, 0), (1, 1))) == pytest.approx(1.5)


def test_energy_dimension_mismatch():
    from torusdyn.systems import DimensionMismatchError

    with pytest.raises(DimensionMismatchError):
        FLAT.energy(PhaseState.of((0, 0, 0), (1, 0, 0)))


def test_quadratic_form_rejects_indefinite():
    with pytest.raises(ValueError):
        QuadraticForm(2, np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_free_motion_wraps_once():
    traj = integrate(FLAT, PhaseState.of((0, 0), (1, 0)), 1.0, 1e-10)
    assert np.allclose(traj.angles[-1], [1.0, 0.0], atol=1e-10)
    assert np.allclose(traj.actions[-1], [1.0, 0.0], atol=1e-12)
    assert tuple(traj.homology()) == (1, 0)


def test_pendulum_separatrix_energy_drift():
    pend = ClassicalSystem(
        QuadraticForm.identity(1), FourierPotential.from_cosines(1, {(1,): 1.0})
    )
    s0 = PhaseState.of((0.5,), (2.0,))  # exactly the separatrix level e = 1
    assert pend.energy(s0) == pytest.approx(1.0)
    traj = integrate(pend, s0, 10.0, 1e-9)
    assert traj.energy_drift(pend) < 1e-9


def test_rho_reversibility():
    tol = 1e-10
    s0 = PhaseState.of((0.3, 0.7), (0.4, -0.2))
    fw = integrate(WIGGLY, s0, 2.0, tol)
    end = PhaseState(np.mod(fw.angles[-1], 1.0), fw.actions[-1])
    bw = integrate(WIGGLY, rho_involution(end), 2.0, tol)
    back = rho_involution(PhaseState(np.mod(bw.angles[-1], 1.0), bw.actions[-1]))
    assert np.max(np.abs(back.angle - s0.angle)) < 10 * tol
    assert np.max(np.abs(back.action - s0.action)) < 10 * tol


def test_symplectic_mode_bounded_drift():
    traj = integrate_symplectic(WIGGLY, PhaseState.of((0.1, 0.2), (1.3, 0.4)), 20.0, dt=5e-4)
    assert traj.energy_drift(WIGGLY) < 1e-4


def test_jacobi_length_flat_unit_class():
    loop = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert jacobi_length(FLAT, loop, 0.5) == pytest.approx(1.0, abs=1e-12)
    assert jacobi_length(FLAT, loop, 2.0) == pytest.approx(2.0, abs=1e-12)


def test_jacobi_length_matches_dense_quadrature_oracle():
    sys = ClassicalSystem(
        QuadraticForm.identity(2), FourierPotential.from_cosines(2, {(1, 0): 0.1})
    )
    loop = np.array([[0.25, 0.0], [0.25, 1.0]])  # vertical loop, class (0, 1)
    val = jacobi_length(sys, loop, 1.0, tol=1e-12)
    # brute-force oracle: 1e6-point midpoint rule along the segment
    ts = (np.arange(1_000_000) + 0.5) / 1_000_000
    pts = np.stack([0.25 * np.ones_like(ts), ts], axis=1)
    oracle = np.mean(np.sqrt(2.0 * (1.0 - sys.potential(pts))))
    assert val == pytest.approx(float(oracle), abs=1e-8)


def test_jacobi_length_rejects_subcritical_energy():
    with pytest.raises(JacobiDomainError):
        jacobi_length(WIGGLY, np.array([[0.0, 0.0], [1.0, 0.0]]), 1.0)


def test_maupertuis_flat_lift():
    geo_pts = np.stack([np.linspace(0, 1, 50), np.zeros(50)], axis=1)
    # at e = 0.5 the Jacobi metric is Euclidean: arclength = Euclidean length
    from torusdyn.integrate import GeodesicCurve

    geo = GeodesicCurve(np.linspace(0, 1, 50), geo_pts, closed_class=np.array([1, 0]))
    traj = maupertuis_lift(FLAT, geo, 0.5)
    assert np.allclose(np.linalg.norm(traj.actions, axis=1), 1.0, atol=1e-9)
    assert traj.times[-1] == pytest.approx(1.0, abs=1e-9)


def test_maupertuis_roundtrip_reproduces_orbit():
    s0 = PhaseState.of((0.0, 0.3), (1.5, 0.0))
    fw = integrate(WIGGLY * 0 if False else ClassicalSystem(
        QuadraticForm.identity(2),
        FourierPotential.from_cosines(2, {(1, 0): 0.05, (0, 1): 0.10}),
    ), s0, 1.4, 1e-11)
    sys = ClassicalSystem(
        QuadraticForm.identity(2),
        FourierPotential.from_cosines(2, {(1, 0): 0.05, (0, 1): 0.10}),
    )
    geo = project_to_geodesic(sys, fw, n_samples=3000)
    lift = maupertuis_lift(sys, geo, fw.energy, n_samples=2500)
    errs = [
        np.max(np.abs(fw.at_time(t)[0] - lift.at_time(t)[0]))
        for t in np.linspace(0.05, 1.35, 9)
    ]
    assert max(errs) < 1e-6
    assert lift_defect(sys, lift) < 1e-6


def test_maupertuis_rejects_critical_energy():
    geo_pts = np.stack([np.linspace(0, 1, 50), np.zeros(50)], axis=1)
    from torusdyn.integrate import GeodesicCurve

    geo = GeodesicCurve(np.linspace(0, 1, 50), geo_pts, closed_class=np.array([1, 0]))
    with pytest.raises((JacobiDomainError, ValueError)):
        maupertuis_lift(WIGGLY, geo, WIGGLY.critical_energy)


def test_jacobi_length_of_lifted_segment_matches_arclength():
    sys = ClassicalSystem(
        QuadraticForm.identity(2),
        FourierPotential.from_cosines(2, {(1, 0): 0.05, (0, 1): 0.10}),
    )
    fw = integrate(sys, PhaseState.of((0.0, 0.3), (1.5, 0.0)), 1.4, 1e-11)
    geo = project_to_geodesic(sys, fw, n_samples=3000)
    assert jacobi_length(sys, geo.points, fw.energy, tol=1e-10) == pytest.approx(
        geo.length, abs=1e-7
    )


@settings(max_examples=25, deadline=None)
@given(
    a1=st.floats(0.3, 3.0),
    a2=st.floats(0.3, 3.0),
    r1=st.floats(-2.0, 2.0),
    r2=st.floats(-2.0, 2.0),
)
def test_energy_conservation_property(a1, a2, r1, r2):
    sys = ClassicalSystem(
        QuadraticForm(2, np.diag([a1, a2])),
        FourierPotential.from_cosines(2, {(1, 0): 0.2, (1, 1): 0.1}),
    )
    traj = integrate(sys, PhaseState.of((0.1, 0.9), (r1, r2)), 3.0, 1e-8)
    assert traj.energy_drift(sys) <= 1e-8


def test_system_text_roundtrip():
    text = system_to_text(WIGGLY)
    back = system_from_text(text)
    assert back.dim == 2
    assert np.allclose(back.kinetic.matrix, WIGGLY.kinetic.matrix)
    for k in [(1, 0), (0, 1), (2, 1)]:
        assert back.potential.coefficient(k) == pytest.approx(WIGGLY.potential.coefficient(k))


def test_trajectory_csv_header_and_energy_column():
    traj = integrate(FLAT, PhaseState.of((0, 0), (1, 0)), 1.0, 1e-10)
    csv = trajectory_to_csv(traj, FLAT)
    lines = csv.strip().splitlines()
    assert lines[0] == "t,theta1,theta2,r1,r2,E"
    last = lines[-1].split(",")
    assert float(last[-1]) == pytest.approx(0.5)


def test_integration_reports_failure_time():
    # a potential is always bounded, so force failure via absurd tolerance
    with pytest.raises((IntegrationError, ValueError)):
        integrate(FLAT, PhaseState.of((0, 0), (1, 0)), 1.0, tol=-1.0)
