# test_metrics.py
# Tests for output-error norms, covariance discrepancies and full-vs-reduced comparisons

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import numpy as np

from errors import ModelInputError, UnknownSymbolError
from lna import CovTrajectory, Trajectory, steady_state
from metrics import compare_models, covariance_error, signal_norms, steady_output_covariances, summary_frame
from model_library import model_library
from reduction import parse_reduction_config, reduce_with_config

TIMES = np.linspace(0.0, 20.0, 201)


def _signal(*columns):
    return Trajectory(times=TIMES, states=np.column_stack(columns), labels=[f"y{i + 1}" for i in range(len(columns))])


def test_exponential_norms():
    """e^-t on [0, 20] has L1 = 1, L2 = sqrt(1/2), Linf = 1"""
    l1, l2, linf = signal_norms(_signal(np.exp(-TIMES)))
    assert abs(l1 - 1.0) < 1e-4, l1
    assert abs(l2 - np.sqrt(0.5)) < 1e-4, l2
    assert abs(linf - 1.0) < 1e-12
    print("✅ exponential norms")


def test_two_component_norms():
    """(e^-t, -e^-t) has L1 = 2, L2 = 1 and Linf = 1"""
    l1, l2, linf = signal_norms(_signal(np.exp(-TIMES), -np.exp(-TIMES)))
    assert abs(l1 - 2.0) < 2e-4
    assert abs(l2 - 1.0) < 1e-4
    assert abs(linf - 1.0) < 1e-12
    print("✅ two-component norms")


def test_zero_and_scaled_signals():
    """Zero error has zero norms; norms scale with |c| and satisfy L2^2 <= Linf L1"""
    assert signal_norms(_signal(np.zeros_like(TIMES))) == (0.0, 0.0, 0.0)
    u = np.sin(TIMES) * np.exp(-0.2 * TIMES)
    base = np.array(signal_norms(_signal(u)))
    scaled = np.array(signal_norms(_signal(-3.0 * u)))
    assert np.allclose(scaled, 3.0 * base, rtol=1e-6)
    l1, l2, linf = base
    assert l2 ** 2 <= linf * l1 * (1 + 1e-9)

    single = Trajectory(times=np.array([0.0]), states=np.array([[0.5]]), labels=["y1"])
    assert signal_norms(single) == (0.0, 0.0, 0.5)
    print("✅ zero, scaled and single-sample signals")


def test_grid_refinement_stability():
    """Norms on a doubled sample grid agree to 0.1%"""
    u = np.exp(-0.5 * TIMES) * np.cos(2.0 * TIMES)
    coarse = np.array(signal_norms(_signal(u)))
    fine_times = np.linspace(0.0, 20.0, 401)
    fine = np.array(signal_norms(Trajectory(
        times=fine_times, states=(np.exp(-0.5 * fine_times) * np.cos(2.0 * fine_times))[:, None], labels=["y1"]
    )))
    assert np.all(np.abs(fine - coarse) <= 1e-3 * np.abs(fine))
    print("✅ grid refinement stability")


def test_covariance_error():
    """Scalar X = 1 against X_r = 0.9 differs by 0.1 at every time"""
    times = np.linspace(0.0, 1.0, 11)
    full = CovTrajectory(times=times, covariances=np.ones((11, 1, 1)), labels=["y"])
    reduced = CovTrajectory(times=times, covariances=0.9 * np.ones((11, 1, 1)), labels=["y"])
    final, errors = covariance_error(full, reduced)
    assert abs(final - 0.1) < 1e-12
    assert np.allclose(errors, 0.1, atol=1e-12)

    shifted = CovTrajectory(times=np.linspace(0.0, 1.0, 6), covariances=0.9 * np.ones((6, 1, 1)), labels=["y"])
    final, errors = covariance_error(full, shifted)
    assert errors.shape == (11,) and np.allclose(errors, 0.1, atol=1e-12)

    state_cov = CovTrajectory(times=times, covariances=np.tile(np.diag([1.0, 5.0]), (11, 1, 1)), labels=["a", "b"])
    final, _ = covariance_error(state_cov, reduced, C_full=np.array([[1.0, 0.0]]))
    assert abs(final - 0.1) < 1e-12

    try:
        covariance_error(state_cov, reduced)
    except ModelInputError:
        pass
    else:
        raise AssertionError("mismatched output dimensions accepted")
    print("✅ covariance error")


def test_unreduced_comparison_is_exact():
    """r = 0 and no perturbation: outputs and covariances agree up to integration error"""
    net = model_library.load("toy_switch")
    x_ss = steady_state(net)
    rm = reduce_with_config(net, parse_reduction_config("retain = m1, m2; lump = {p1, p2}:0"), x_ss)
    report = compare_models(net, rm, t_span=(0.0, 30.0), n_points=61)
    assert report.linf <= 1e-8 and report.l1 <= 1e-6
    assert report.cov_err_ss <= 1e-6
    full_ss, reduced_ss = steady_output_covariances(rm)
    assert np.linalg.norm(full_ss - reduced_ss) <= 1e-10 * np.linalg.norm(full_ss)
    assert report.perturbation == {}
    print("✅ unreduced comparison")


def test_toy_comparison_reports():
    """Structured and averaging reductions of the toggle switch both produce finite reports"""
    net = model_library.load("toy_switch")
    x_ss = steady_state(net)
    structured = reduce_with_config(net, parse_reduction_config("retain = m1, m2; lump = {p1, p2}:1"), x_ss)
    averaging = reduce_with_config(net, parse_reduction_config("retain = m1, m2; method = averaging; fast = p1, p2"), x_ss)
    kick = {"m1": 0.1}
    reports = [
        compare_models(net, rm, perturbation=kick, t_span=(0.0, 40.0), n_points=81)
        for rm in (structured, averaging)
    ]
    for report in reports:
        for value in (report.l1, report.l2, report.linf, report.cov_err_ss, report.cov_err_lyap):
            assert np.isfinite(value)
        assert report.l2 ** 2 <= report.linf * report.l1 * (1 + 1e-6)
        assert report.perturbation == {"m1": 0.1}
        assert report.output_range > 0
        assert abs(report.rel_linf - report.linf / report.output_range) < 1e-15
        assert report.trajectory_frame().shape == (81, 2)
    assert reports[0].reduced_dimension == 3 and reports[1].reduced_dimension == 2
    assert reports[0].method == "structured" and reports[1].method == "averaging"

    frame = summary_frame(reports)
    assert list(frame["method"]) == ["structured", "averaging"]
    assert list(frame.columns)[:4] == ["label", "method", "r", "reduced_dimension"]
    metrics = dict(zip(reports[0].to_frame()["metric"], reports[0].to_frame()["value"]))
    assert metrics["perturbation"] == "m1=0.1"
    assert metrics["volume"] == "100.0"
    print("✅ toggle switch comparison reports")


def test_structured_beats_averaging_on_toggle_switch():
    """m1 = +0.1: both reductions track the outputs within 5%; structured covariances are clearly closer"""
    net = model_library.load("toy_switch")
    x_ss = steady_state(net)
    structured = reduce_with_config(net, parse_reduction_config("retain = m1, m2; lump = {p1, p2}:1"), x_ss)
    averaging = reduce_with_config(net, parse_reduction_config("retain = m1, m2; method = averaging; fast = p1, p2"), x_ss)
    reports = [compare_models(net, rm, perturbation={"m1": 0.1}) for rm in (structured, averaging)]
    for report in reports:
        assert report.rel_linf <= 0.05, (report.method, report.rel_linf)
    assert 1.5 * reports[0].cov_err_ss < reports[1].cov_err_ss, (reports[0].cov_err_ss, reports[1].cov_err_ss)
    assert 1.5 * reports[0].cov_err_lyap < reports[1].cov_err_lyap, (reports[0].cov_err_lyap, reports[1].cov_err_lyap)
    print("✅ structured reduction beats averaging")


def test_bad_perturbation():
    """Unknown species and wrong-length vectors are rejected"""
    net = model_library.load("linear_chain")
    rm = reduce_with_config(net, parse_reduction_config("retain = C; lump = {A, B}:0"))
    for perturbation, error in (({"Z": 1.0}, UnknownSymbolError), ([1.0, 2.0], ModelInputError)):
        try:
            compare_models(net, rm, perturbation=perturbation, t_span=(0.0, 1.0), n_points=5)
        except error:
            continue
        raise AssertionError(f"expected {error.__name__} for {perturbation}")
    print("✅ perturbation validation")


def main():
    """Run all tests"""
    print("🧪 metrics tests")
    print("=" * 50)

    tests = [
        test_exponential_norms,
        test_two_component_norms,
        test_zero_and_scaled_signals,
        test_grid_refinement_stability,
        test_covariance_error,
        test_unreduced_comparison_is_exact,
        test_toy_comparison_reports,
        test_structured_beats_averaging_on_toggle_switch,
        test_bad_perturbation,
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
