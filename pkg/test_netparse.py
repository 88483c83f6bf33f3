# test_netparse.py
# Tests for the reaction DSL parser, rate evaluation and species transformations

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import numpy as np

from errors import (
    DuplicateDeclarationError,
    NetworkDomainError,
    NetworkSyntaxError,
    UnknownSymbolError,
)
from lna import simulate_macroscopic
from model_library import model_library
from netparse import (
    format_network,
    parse_network,
    permute_species,
    rate_jacobian,
    transform_network,
)

BIRTH_DEATH = """
species x = 2
param k = 3
reaction birth: -> x @ k
reaction death: x -> @ x
"""


def _finite_difference_jacobian(net, x, h=1e-6):
    columns = []
    for j in range(len(x)):
        step = np.zeros(len(x))
        step[j] = h * max(1.0, abs(x[j]))
        columns.append((net.eval_rates(x + step) - net.eval_rates(x - step)) / (2 * step[j]))
    return np.array(columns).T


def test_toy_switch_structure():
    """Toggle switch parses into 4 species, 8 reactions and the expected stoichiometry"""
    net = model_library.load("toy_switch")
    assert net.species_names == ["m1", "p1", "m2", "p2"]
    assert net.output_names == ["m1", "m2"]
    assert net.volume == 100.0
    S = net.stoichiometry
    assert S.shape == (4, 8)
    expected = np.array([
        [1, -1, 0, 0, 0, 0, 0, 0],
        [0, 0, 1, -1, 0, 0, 0, 0],
        [0, 0, 0, 0, 1, -1, 0, 0],
        [0, 0, 0, 0, 0, 0, 1, -1],
    ], dtype=float)
    assert np.array_equal(S, expected)
    print("✅ toggle switch stoichiometry")


def test_rates_and_jacobian():
    """Rates match the closed form and the symbolic Jacobian matches finite differences"""
    net = model_library.load("toy_switch")
    x = np.array([0.7, 3.5, 0.05, 0.3])
    f = net.eval_rates(x)
    assert abs(f[0] - 3.0 / (1.0 + 0.3 ** 2)) < 1e-14
    assert abs(f[4] - 3.0 / (1.0 + 3.5 ** 2)) < 1e-14
    assert abs(f[1] - 4.0 * 0.7) < 1e-14
    jac = rate_jacobian(net)
    numeric = jac.evaluate(x)
    assert numeric.shape == (8, 4)
    assert np.allclose(numeric, _finite_difference_jacobian(net, x), atol=1e-7)

    rng = np.random.default_rng(11)
    for _ in range(20):
        state = rng.uniform(0.01, 5.0, size=4)
        exact = net.rate_jacobian_at(state)
        approx = _finite_difference_jacobian(net, state)
        assert np.all(np.abs(exact - approx) <= 1e-6 * np.maximum(np.abs(exact), 1e-2)), state
    assert abs(float(jac.entry("prod_m1", "p2").subs({net.symbols[n]: v for n, v in zip(net.species_names, x)})
                     .subs({net.symbols[k]: v for k, v in net.parameters.items()})) - numeric[0, 3]) < 1e-12
    print("✅ rates and Jacobian")


def test_birth_death_defaults():
    """Missing volume falls back to 100; no output line means every species is an output"""
    net = parse_network(BIRTH_DEATH)
    assert net.volume == 100.0
    assert net.output_names == ["x"]
    assert np.array_equal(net.stoichiometry, np.array([[1.0, -1.0]]))
    assert np.allclose(net.eval_rates([2.0]), [3.0, 2.0])
    print("✅ defaults")


def test_empty_side_spellings():
    """Empty reaction sides may be blank, 0 or the empty-set sign"""
    for empty in ("", "0", "∅"):
        net = parse_network(f"species x = 1\nreaction deg: x -> {empty} @ x\nreaction prod: {empty} -> x @ 1\n")
        assert np.array_equal(net.stoichiometry, np.array([[-1.0, 1.0]]))
    print("✅ empty sides")


def test_syntax_error_position():
    """Syntax errors carry line and column"""
    try:
        parse_network("# comment\nspecies x 1\n")
    except NetworkSyntaxError as e:
        assert e.line == 2
        assert e.column == 10
    else:
        raise AssertionError("expected NetworkSyntaxError")

    try:
        parse_network("species x = 1\nreaction r: x -> @ x * (2\n")
    except NetworkSyntaxError as e:
        assert e.line == 2
    else:
        raise AssertionError("expected NetworkSyntaxError for unbalanced parenthesis")
    print("✅ syntax errors")


def test_rejected_networks():
    """Unknown symbols, duplicates, bad volumes and degenerate reactions are rejected"""
    cases = [
        ("species x = 1\nreaction r: x -> y @ x\n", UnknownSymbolError),
        ("species x = 1\nreaction r: x -> @ k * x\n", UnknownSymbolError),
        ("species x = 1\nspecies x = 2\nreaction r: x -> @ x\n", DuplicateDeclarationError),
        ("species x = 1\nparam x = 2\nreaction r: x -> @ x\n", DuplicateDeclarationError),
        ("species x = 1\nreaction r: x -> @ x\nreaction r: -> x @ 1\n", DuplicateDeclarationError),
        ("volume = 0\nspecies x = 1\nreaction r: x -> @ x\n", NetworkDomainError),
        ("volume = -5\nspecies x = 1\nreaction r: x -> @ x\n", NetworkDomainError),
        ("species x = 1\nreaction r: x -> x @ x\n", NetworkDomainError),
        ("species x = 1\nreaction r: x -> @ -1\n", NetworkDomainError),
        ("species x = 0\nreaction r: -> x @ 1 / x\n", NetworkDomainError),
        ("species x = -1\nreaction r: x -> @ x\n", NetworkDomainError),
        ("species x = 1\n", NetworkDomainError),
    ]
    for text, error in cases:
        try:
            parse_network(text)
        except error:
            continue
        raise AssertionError(f"expected {error.__name__} for {text!r}")
    print("✅ rejected networks")


def test_format_round_trip():
    """Serializing and re-parsing preserves species, stoichiometry, outputs and rates"""
    for name in model_library.list_models():
        net = model_library.load(name)
        again = parse_network(format_network(net))
        assert again.species_names == net.species_names
        assert again.output_names == net.output_names
        assert again.volume == net.volume
        assert np.array_equal(again.stoichiometry, net.stoichiometry)
        x = net.initial_state + 0.5
        assert np.allclose(again.eval_rates(x), net.eval_rates(x), rtol=1e-14, atol=0)
    print("✅ format round trip")


def test_transform_network():
    """Transformed stoichiometry is T S, rates are evaluated at T^-1 m"""
    net = model_library.load("toy_switch")
    rng = np.random.default_rng(3)
    T = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
    moved = transform_network(net, T)
    assert np.allclose(moved.stoichiometry, T @ net.stoichiometry)
    assert np.allclose(moved.initial_state, T @ net.initial_state)
    x = np.array([0.6, 3.0, 0.1, 0.4])
    assert np.allclose(moved.eval_rates(T @ x), net.eval_rates(x), rtol=1e-12)
    assert np.allclose(moved.rate_jacobian_at(T @ x), net.rate_jacobian_at(x) @ np.linalg.inv(T), rtol=1e-10, atol=1e-12)
    assert moved.state_labels == ["mode_1", "mode_2", "mode_3", "mode_4"]

    singular = np.ones((4, 4))
    try:
        transform_network(net, singular)
    except NetworkDomainError:
        pass
    else:
        raise AssertionError("singular transformation accepted")
    print("✅ transformed network")


def test_permute_species():
    """Permutation moves species, rows of S, initial values and trajectories together; a swap is an involution"""
    net = model_library.load("toy_switch")
    perm = [2, 0, 3, 1]
    moved = permute_species(net, perm)
    assert moved.species_names == ["m2", "m1", "p2", "p1"]
    assert np.array_equal(moved.stoichiometry, net.stoichiometry[perm])
    assert np.array_equal(moved.initial_state, net.initial_state[perm])

    original = simulate_macroscopic(net, (0.0, 10.0), n_points=21)
    permuted = simulate_macroscopic(moved, (0.0, 10.0), n_points=21)
    assert np.allclose(permuted.states, original.states[:, perm], rtol=1e-6, atol=1e-9)

    swap = [1, 0, 2, 3]
    once = permute_species(net, swap)
    assert np.array_equal(once.stoichiometry[:2], net.stoichiometry[[1, 0]])
    twice = permute_species(once, swap)
    assert twice.species_names == net.species_names
    assert np.array_equal(twice.stoichiometry, net.stoichiometry)
    assert np.array_equal(twice.initial_state, net.initial_state)
    x = np.array([0.6, 3.0, 0.1, 0.4])
    assert np.allclose(twice.eval_rates(x), net.eval_rates(x), rtol=1e-14)
    try:
        permute_species(net, [0, 0, 1, 2])
    except NetworkDomainError:
        pass
    else:
        raise AssertionError("non-bijective permutation accepted")
    print("✅ species permutation")


def test_model_library():
    """Bundled models resolve by name"""
    names = model_library.list_models()
    for expected in ("toy_switch", "toy_switch_symmetric", "linear_production", "degradation", "linear_chain"):
        assert expected in names
    assert model_library.exists("builtin:toy_switch")
    assert not model_library.exists("builtin:nope")
    net = model_library.resolve("builtin:linear_chain")
    assert net.species_names == ["A", "B", "C"]
    stats = model_library.get_library_stats()
    assert stats["toy_switch"]["reactions"] == 8
    print("✅ model library")


def main():
    """Run all tests"""
    print("🧪 netparse tests")
    print("=" * 50)

    tests = [
        test_toy_switch_structure,
        test_rates_and_jacobian,
        test_birth_death_defaults,
        test_empty_side_spellings,
        test_syntax_error_position,
        test_rejected_networks,
        test_format_round_trip,
        test_transform_network,
        test_permute_species,
        test_model_library,
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
