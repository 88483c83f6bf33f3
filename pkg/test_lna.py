# test_lna.py
# Tests for LNA assembly, integration, steady states and fluctuation path sampling

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import numpy as np
from pydantic import ValidationError

from errors import ConfigurationError, RateDomainError, StabilityError
from gramians import solve_lyapunov_eq
from lna import (
    TimeVaryingFluctuation,
    Trajectory,
    diffusion_matrix,
    integrate_lyapunov_cov,
    is_hurwitz,
    jacobian_J,
    linearize_at,
    marginal,
    noise_F,
    relaxation_horizon,
    simulate_fluctuation_paths,
    simulate_macroscopic,
    steady_state,
    steady_state_residual,
    trajectory_rate_slack,
)
from model_library import model_library
from netparse import parse_network, transform_network

TOY_BRANCH = {"m1": 0.6922, "p1": 3.461, "m2": 0.05778, "p2": 0.2889}


def test_linear_steady_state():
    """dx/dt = 1 - x has x_ss = 1"""
    net = model_library.load("linear_production")
    x_ss = steady_state(net)
    assert abs(x_ss[0] - 1.0) < 1e-10
    assert steady_state_residual(net, x_ss) <= 1e-10
    print("✅ linear steady state")


def test_toy_steady_state():
    """Toggle switch settles on the stable branch with gene 1 on"""
    net = model_library.load("toy_switch")
    x_ss = steady_state(net)
    assert np.all(x_ss > 0)
    assert steady_state_residual(net, x_ss) <= 1e-9
    for name, value in TOY_BRANCH.items():
        assert abs(x_ss[net.species_names.index(name)] - value) < 2e-3 * max(1.0, value)
    assert is_hurwitz(jacobian_J(net, x_ss))
    print("✅ toggle switch steady state")


def test_symmetric_toy_is_unstable():
    """Starting on the symmetry axis lands on the saddle, which linearize_at refuses"""
    net = model_library.load("toy_switch_symmetric")
    x_ss = steady_state(net)
    assert abs(x_ss[0] - x_ss[2]) < 1e-8 and abs(x_ss[1] - x_ss[3]) < 1e-8
    assert not is_hurwitz(jacobian_J(net, x_ss))
    try:
        linearize_at(net, x_ss, ["m1", "m2"])
    except StabilityError as e:
        assert len(e.eigenvalues) == 4
    else:
        raise AssertionError("expected StabilityError for a saddle")
    print("✅ symmetric equilibrium rejected")


def test_decay_trajectory():
    """dx/dt = -x integrates to e^-t"""
    net = model_library.load("degradation")
    trajectory = simulate_macroscopic(net, (0.0, 5.0), rtol=1e-10, atol=1e-12, n_points=51)
    assert trajectory.states.shape == (51, 1)
    assert np.allclose(trajectory.states[:, 0], np.exp(-trajectory.times), rtol=0, atol=1e-9)
    frame = trajectory.to_frame()
    assert list(frame.columns) == ["t", "x"]
    print("✅ decay trajectory")


def test_linear_covariance_analytic():
    """Birth-death covariance relaxes to (1 + 1) / (2 Omega)"""
    net = model_library.load("linear_production")
    trajectory = simulate_macroscopic(net, (0.0, 40.0), x0=[1.0], n_points=81)
    covariance = integrate_lyapunov_cov(net, trajectory)
    expected = 0.02 / 2 * (1.0 - np.exp(-2.0 * covariance.times))
    assert np.allclose(covariance.covariances[:, 0, 0], expected, rtol=1e-6, atol=1e-10)
    mean, variance = marginal(trajectory, covariance, 0, -1)
    assert abs(mean - 1.0) < 1e-9
    assert variance == covariance.covariances[-1, 0, 0]
    print("✅ birth-death covariance")


def test_toy_covariance_matches_algebraic():
    """Differential Lyapunov solution at the relaxation horizon equals the algebraic one"""
    net = model_library.load("toy_switch")
    x_ss = steady_state(net)
    J = jacobian_J(net, x_ss)
    t_end = relaxation_horizon(J)
    trajectory = simulate_macroscopic(net, (0.0, t_end), x0=x_ss, n_points=101)
    covariance = integrate_lyapunov_cov(net, trajectory)
    X_alg = solve_lyapunov_eq(J, diffusion_matrix(net, x_ss))
    error = np.linalg.norm(covariance.final - X_alg) / np.linalg.norm(X_alg)
    assert error < 1e-6, error
    assert np.array_equal(covariance.final, covariance.final.T)
    frame = covariance.to_frame()
    assert len(frame.columns) == 1 + 10
    assert "cov_m1_p1" in frame.columns
    print("✅ covariance matches algebraic Lyapunov solution")


def test_co_integrated_covariance():
    """Joint integration of x and X agrees with integration along the interpolated trajectory"""
    net = model_library.load("linear_chain")
    trajectory = simulate_macroscopic(net, (0.0, 10.0), n_points=101)
    along = integrate_lyapunov_cov(net, trajectory)
    joint = integrate_lyapunov_cov(net, trajectory, co_integrate=True)
    assert np.allclose(along.covariances, joint.covariances, rtol=1e-4, atol=1e-7)
    print("✅ joint covariance integration")


def test_covariance_from_zero_concentrations():
    """Species starting at zero: integrator undershoot below zero does not abort the covariance"""
    net = model_library.load("linear_chain")
    assert np.all(net.initial_state == 0)
    trajectory = simulate_macroscopic(net, (0.0, 50.0), n_points=201)
    covariance = integrate_lyapunov_cov(net, trajectory)
    assert np.all(np.isfinite(covariance.covariances))
    assert np.min(np.diagonal(covariance.covariances, axis1=1, axis2=2)) >= -1e-9

    # C ~ t^3 near t = 0, so a coarse grid makes the interpolant dip below zero
    coarse = simulate_macroscopic(net, (0.0, 5.0), n_points=11)
    integrate_lyapunov_cov(net, coarse)
    integrate_lyapunov_cov(net, coarse, co_integrate=True)

    x = np.array([1.0, 1.0, -1e-10])
    assert noise_F(net, x, slack=trajectory_rate_slack())[3, 3] == 0.0
    try:
        noise_F(net, x)
    except RateDomainError as e:
        assert e.reaction == "outflow"
    else:
        raise AssertionError("undershoot accepted without slack")
    print("✅ covariance from zero concentrations")


def test_transformed_trajectory():
    """Trajectories of the transformed network are T x(t)"""
    net = model_library.load("toy_switch")
    rng = np.random.default_rng(11)
    full = simulate_macroscopic(net, (0.0, 10.0), rtol=1e-10, atol=1e-12, n_points=41)
    for _ in range(3):
        T = np.eye(4) + 0.25 * rng.standard_normal((4, 4))
        moved = transform_network(net, T)
        trajectory = simulate_macroscopic(moved, (0.0, 10.0), rtol=1e-10, atol=1e-12, n_points=41)
        assert np.allclose(trajectory.states, full.states @ T.T, rtol=0, atol=1e-7)
    print("✅ transformed trajectories")


def test_linearization_layout():
    """Retained species come first; A, B and C follow the permutation"""
    net = model_library.load("toy_switch")
    x_ss = steady_state(net)
    system = linearize_at(net, x_ss, ["m1", "m2"])
    assert system.labels == ["m1", "m2", "p1", "p2"]
    assert system.perm == [0, 2, 1, 3]
    J = jacobian_J(net, x_ss)
    assert np.allclose(system.A, J[np.ix_(system.perm, system.perm)])
    B = net.stoichiometry @ noise_F(net, x_ss) / np.sqrt(net.volume)
    assert np.allclose(system.B, B[system.perm])
    assert np.array_equal(system.C, np.hstack([np.eye(2), np.zeros((2, 2))]))
    try:
        linearize_at(net, x_ss, [])
    except ConfigurationError:
        pass
    else:
        raise AssertionError("empty retained set accepted")
    print("✅ linearization layout")


def test_negative_rate_in_noise():
    """F = diag(sqrt(f)) is undefined for a negative rate"""
    net = parse_network("species x = 1\nreaction r: -> x @ 2 - x\n")
    try:
        noise_F(net, [3.0])
    except RateDomainError as e:
        assert e.reaction == "r"
    else:
        raise AssertionError("expected RateDomainError")
    print("✅ negative rate rejected")


def test_trajectory_validation():
    """Times must increase strictly"""
    try:
        Trajectory(times=np.array([0.0, 1.0, 1.0]), states=np.zeros((3, 1)), labels=["x"])
    except ValidationError:
        pass
    else:
        raise AssertionError("non-increasing times accepted")
    print("✅ trajectory validation")


def test_path_ensemble_statistics():
    """Euler-Maruyama variance of the birth-death fluctuations matches the Lyapunov value"""
    net = model_library.load("linear_production")
    system = linearize_at(net, steady_state(net), ["x"])
    ensemble = simulate_fluctuation_paths(system, n_paths=10000, dt=0.01, t_end=5.0, seed=7)
    variance = ensemble.variance()[-1, 0]
    assert abs(variance - 0.01) < 0.1 * 0.01, variance
    assert abs(ensemble.mean()[-1, 0]) < 0.01
    assert ensemble.times[0] == 0.0 and abs(ensemble.times[-1] - 5.0) < 1e-12
    print("✅ path ensemble statistics")


def test_path_determinism():
    """Same seed gives identical paths; another seed does not"""
    net = model_library.load("toy_switch")
    trajectory = simulate_macroscopic(net, (0.0, 2.0), n_points=21)
    system = TimeVaryingFluctuation(network=net, trajectory=trajectory)
    first = simulate_fluctuation_paths(system, n_paths=20, dt=0.02, t_end=2.0, seed=3)
    second = simulate_fluctuation_paths(system, n_paths=20, dt=0.02, t_end=2.0, seed=3)
    other = simulate_fluctuation_paths(system, n_paths=20, dt=0.02, t_end=2.0, seed=4)
    assert np.array_equal(first.paths, second.paths)
    assert not np.array_equal(first.paths, other.paths)
    assert list(first.summary_frame().columns)[:3] == ["t", "mean_m1", "mean_p1"]
    print("✅ path determinism")


def main():
    """Run all tests"""
    print("🧪 lna tests")
    print("=" * 50)

    tests = [
        test_linear_steady_state,
        test_toy_steady_state,
        test_symmetric_toy_is_unstable,
        test_decay_trajectory,
        test_linear_covariance_analytic,
        test_toy_covariance_matches_algebraic,
        test_co_integrated_covariance,
        test_covariance_from_zero_concentrations,
        test_transformed_trajectory,
        test_linearization_layout,
        test_negative_rate_in_noise,
        test_trajectory_validation,
        test_path_ensemble_statistics,
        test_path_determinism,
    ]

    passed = 0
    for test in tests:
        try:
            test()
            passed += 1
        except Exception as e:
            print(f"❌ {test.__name__}: {type(e).__name__}: {str(e)}")

    print("\n" + "=" * 50)
    print(f"Test Results: {passed}/{len(tests)} tests passed")
    return passed == len(tests)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
