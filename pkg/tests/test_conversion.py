import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_relu, random_threshold2, running_example
from rectex.conversion import (
    BooleanUnitIndex,
    DependentBiasError,
    NotCoplanarError,
    SizeGuardError,
    boolean_unit,
    check_condition2,
    check_condition3,
    distinct_hyperplanes,
    flatten_pure,
    make_any_nonnegative_network,
    make_tightness_network,
    tightness_witness,
    nonempty_subsets,
    on_hyperplane,
    ramp_surrogate,
    relu_to_threshold_cnf,
    relu_to_threshold_dnf,
    sign_unit_to_relu_pair,
    three_sign_to_two_relu,
    threshold2_to_relu,
)
from rectex.network import AffineUnit, ReluNetwork, ThresholdNetwork, eval_relu, sgn


def boundary_points(net, rng, count):
    units = [u for u in net.units if np.any(u.weights)]
    return np.array([on_hyperplane(units[i % len(units)], rng.normal(size=net.dim))
                     for i in range(count)]) if units else np.zeros((0, net.dim))


class TestBooleanUnit:
    def test_empty_subsets(self):
        net = running_example(w0=0.3)
        u = boolean_unit(net, BooleanUnitIndex(0, 0))
        assert u == AffineUnit([0.0, 0.0], 0.3)

    def test_full_subsets_running_example(self):
        net = running_example(w0=0.3)
        u = boolean_unit(net, BooleanUnitIndex(0b1, 0b11))
        a1, a2, a3 = net.positive[0], *net.negative
        assert np.allclose(u.weights, a1.weights - a2.weights - a3.weights, rtol=0, atol=1e-15)
        assert u.bias == pytest.approx(0.3 + a1.bias - a2.bias - a3.bias, abs=1e-15)

    def test_sign_matches_inequality(self, rng):
        for _ in range(100):
            net = random_relu(rng, 2, 2, 3)
            s1, s2 = rng.integers(0, 4, size=2)
            u = boolean_unit(net, BooleanUnitIndex(int(s1), int(s2)))
            x = rng.normal(size=3)
            lhs = net.w0 + sum(net.positive[k](x) for k in range(2) if s1 >> k & 1) \
                - sum(net.negative[k](x) for k in range(2) if s2 >> k & 1)
            if abs(lhs) > 1e-9:
                assert sgn(u(x)) == sgn(lhs)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            boolean_unit(running_example(), BooleanUnitIndex(2, 0))


class TestDnfCnf:
    def test_running_example_dnf_layout(self):
        net, report = relu_to_threshold_dnf(running_example())
        assert (report.first_layer_units, report.second_layer_units, report.form) == (8, 2, "dnf")
        first, second, out = net.layers
        assert first.n_out == 8 and second.n_out == 2 and out.n_out == 1
        assert second.weights.tolist() == [[1] * 4 + [0] * 4, [0] * 4 + [1] * 4]
        assert second.bias.tolist() == [-3, -3]
        assert out.bias.tolist() == [1]

    def test_running_example_cnf_layout(self):
        net, report = relu_to_threshold_cnf(running_example())
        assert (report.first_layer_units, report.second_layer_units, report.form) == (8, 4, "cnf")
        first, second, out = net.layers
        assert second.n_out == 4 and second.bias.tolist() == [1] * 4
        assert out.bias.tolist() == [-3]

    def test_first_layer_indexing(self, rng):
        net = random_relu(rng, 2, 1, 2)
        dnf, _ = relu_to_threshold_dnf(net)
        cnf, _ = relu_to_threshold_cnf(net)
        for s1, s2 in itertools.product(range(4), range(2)):
            u = boolean_unit(net, BooleanUnitIndex(s1, s2))
            assert np.allclose(dnf.layers[0].weights[s1 * 2 + s2], u.weights, atol=1e-15)
            assert np.allclose(cnf.layers[0].weights[s2 * 4 + s1], u.weights, atol=1e-15)

    @pytest.mark.parametrize("w0, expected", [(0.5, 1), (-0.5, -1)])
    def test_constant_network(self, w0, expected):
        net = ReluNetwork(2, w0=w0)
        dnf, report = relu_to_threshold_dnf(net)
        assert report.first_layer_units == 1 and report.second_layer_units == 1
        assert eval_relu(net, [1.0, 1.0]) == expected
        assert set(dnf.predict(np.random.default_rng(0).normal(size=(20, 2)))) == {expected}

    def test_all_negative_cnf_is_pure_conjunction(self, rng):
        net = random_relu(rng, 0, 3, 2)
        cnf, report = relu_to_threshold_cnf(net)
        assert report.second_layer_units == 8
        # each disjunction group has a single unit, so layer 2 is the identity
        assert np.array_equal(cnf.layers[1].weights, np.eye(8))
        assert np.all(cnf.layers[1].bias == 0)
        flat = flatten_pure(net)
        X = rng.normal(size=(2000, 2))
        assert np.array_equal(flat.predict(X), net.predict(X))

    def test_pure_disjunction_corollary(self, rng):
        for _ in range(20):
            net = random_relu(rng, int(rng.integers(1, 5)), 0, 3)
            dnf, _ = relu_to_threshold_dnf(net)
            assert np.array_equal(dnf.layers[1].weights, np.eye(1 << net.n1))
            flat = flatten_pure(net)
            assert flat.layers[0].n_out == 1 << net.n1
            X = rng.normal(size=(2000, 3))
            assert np.array_equal(flat.predict(X), net.predict(X))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 3), st.integers(0, 3), st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_equivalence_property(self, n1, n2, d, seed):
        rng = np.random.default_rng(seed)
        net = random_relu(rng, n1, n2, d)
        X = np.vstack([rng.normal(size=(300, d)), boundary_points(net, rng, 20)])
        y = net.predict(X)
        assert np.array_equal(relu_to_threshold_dnf(net)[0].predict(X), y)
        assert np.array_equal(relu_to_threshold_cnf(net)[0].predict(X), y)

    def test_size_guard(self):
        unit = AffineUnit([1.0], 0.0)
        net = ReluNetwork(1, [unit] * 9, [unit] * 8, 0.0)
        with pytest.raises(SizeGuardError):
            relu_to_threshold_dnf(net)
        with pytest.raises(SizeGuardError):
            relu_to_threshold_cnf(net)


class TestConditionOracles:
    def test_empty(self):
        for w0 in (-1.0, 0.0, 2.0):
            net = ReluNetwork(1, w0=w0)
            assert check_condition2(net, [0.3]) == check_condition3(net, [0.3]) == sgn(w0)

    def test_running_example_by_enumeration(self):
        # a1 = 2, a2 = -1, a3 = 3 at x = 0 with w0 = 0
        net = ReluNetwork(1, [AffineUnit([1.0], 2.0)],
                          [AffineUnit([1.0], -1.0), AffineUnit([1.0], 3.0)], 0.0)
        a = {1: 2.0, 2: -1.0, 3: 3.0}
        table = {}
        for S1 in [(), (1,)]:
            for S2 in [(), (2,), (3,), (2, 3)]:
                table[S1, S2] = sum(a[k] for k in S1) - sum(a[k] for k in S2) >= 0
        # S1 = {1} fails at S2 = {3} (2 - 3 < 0); S1 = {} fails at S2 = {3}
        assert not table[(1,), (3,)] and not table[(), (3,)]
        expected = 1 if any(all(table[S1, S2] for S2 in [(), (2,), (3,), (2, 3)]) for S1 in [(), (1,)]) else -1
        assert expected == -1
        x = [0.0]
        assert check_condition2(net, x) == check_condition3(net, x) == eval_relu(net, x) == expected

    def test_clause_structure(self, rng):
        net = running_example(w0=0.1)
        for x in rng.normal(size=(200, 2)):
            a1 = net.positive[0](x)
            a2, a3 = (u(x) for u in net.negative)
            clauses = [
                0.1 >= 0 or 0.1 + a1 >= 0,
                0.1 - a2 >= 0 or 0.1 + a1 - a2 >= 0,
                0.1 - a3 >= 0 or 0.1 + a1 - a3 >= 0,
                0.1 - a2 - a3 >= 0 or 0.1 + a1 - a2 - a3 >= 0,
            ]
            assert check_condition3(net, x) == (1 if all(clauses) else -1)

    def test_triad(self, rng):
        for _ in range(500):
            net = random_relu(rng, *rng.integers(0, 4, size=2), int(rng.integers(1, 4)))
            x = rng.normal(size=net.dim)
            assert check_condition2(net, x) == check_condition3(net, x) == eval_relu(net, x)

    def test_guard(self):
        unit = AffineUnit([1.0], 0.0)
        with pytest.raises(SizeGuardError):
            check_condition2(ReluNetwork(1, [unit] * 21), [0.0])


class TestRamp:
    @pytest.mark.parametrize("a, expected", [(0.5, 1.0), (-0.5, -1.0), (0.0, 0.0)])
    def test_values(self, a, expected):
        v = AffineUnit([1.0], 0.0)
        assert ramp_surrogate(v, 0.1, [a]) == pytest.approx(expected, abs=1e-12)

    def test_pair(self):
        plus, minus = sign_unit_to_relu_pair(AffineUnit([2.0], 1.0), 0.25)
        assert plus == AffineUnit([2.0], 1.25) and minus == AffineUnit([2.0], 0.75)

    def test_bounded(self, rng):
        v = AffineUnit(rng.normal(size=2), rng.normal())
        for x in rng.normal(size=(500, 2)):
            s = ramp_surrogate(v, 0.3, x)
            assert -1 - 1e-12 <= s <= 1 + 1e-12
            if abs(v(x)) >= 0.3:
                assert s == pytest.approx(sgn(v(x)), abs=1e-12)

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            sign_unit_to_relu_pair(AffineUnit([1.0], 0.0), 0.0)


class TestThreshold2ToRelu:
    def test_single_unit(self):
        net = ThresholdNetwork.from_units([AffineUnit([1.0], 0.0)], [1.0], 0.0)
        approx = threshold2_to_relu(net, 0.1)
        assert approx.n == 2
        assert eval_relu(approx, [0.5]) == 1 == net.predict(np.array([0.5]))

    def test_exact_off_band(self, rng):
        for _ in range(30):
            m, d = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            net = random_threshold2(rng, m, d)
            eps = 1e-2
            approx = threshold2_to_relu(net, eps)
            X = rng.uniform(-1, 1, size=(5000, d))
            pre = X @ net.layers[0].weights.T + net.layers[0].bias
            off = np.abs(pre).min(axis=1) >= eps
            assert np.array_equal(approx.predict(X[off]), net.predict(X[off]))

    def test_rejects_three_layers(self):
        net, _ = relu_to_threshold_dnf(running_example())
        with pytest.raises(ValueError):
            threshold2_to_relu(net, 0.1)


class TestThreeSignToTwoRelu:
    def test_worked_example(self):
        net = three_sign_to_two_relu(AffineUnit([1.0, 0.0], 0.0), AffineUnit([0.0, 1.0], 0.0),
                                     AffineUnit([1.0, 1.0], 1.0))
        u1, u2 = net.positive
        assert u1 == AffineUnit([1.0, 0.0], 1.0)
        assert u2 == AffineUnit([0.0, 1.0], 1.0)
        assert net.w0 == -1.0 and net.n2 == 0

    def test_equivalence_positive_coefficients(self, rng):
        v1, v2 = AffineUnit([1.0, 0.0], 0.0), AffineUnit([0.0, 1.0], 0.0)
        v3 = AffineUnit([1.0, 1.0], 1.0)
        relu_net = three_sign_to_two_relu(v1, v2, v3)
        sign_net = ThresholdNetwork.disjunction([v1, v2, v3])
        X = rng.uniform(-3, 3, size=(100_000, 2))
        assert np.array_equal(relu_net.predict(X), sign_net.predict(X))

    def test_negative_r_disagrees(self, rng):
        # d3 - p d1 - q d2 < 0 flips the third hyperplane's orientation
        v1, v2 = AffineUnit([1.0, 0.0], 0.0), AffineUnit([0.0, 1.0], 0.0)
        v3 = AffineUnit([1.0, 1.0], -1.0)
        relu_net = three_sign_to_two_relu(v1, v2, v3)
        sign_net = ThresholdNetwork.disjunction([v1, v2, v3])
        X = rng.uniform(-3, 3, size=(100_000, 2))
        rate = np.mean(relu_net.predict(X) != sign_net.predict(X))
        assert rate > 0.1

    def test_not_coplanar(self):
        with pytest.raises(NotCoplanarError):
            three_sign_to_two_relu(AffineUnit([1.0, 0.0, 0.0], 0.0), AffineUnit([0.0, 1.0, 0.0], 0.0),
                                   AffineUnit([0.0, 0.0, 1.0], 1.0))

    def test_dependent_bias(self):
        v1 = AffineUnit([1.0, 2.0], 0.5)
        with pytest.raises(DependentBiasError):
            three_sign_to_two_relu(v1, AffineUnit([0.0, 1.0], 0.0), AffineUnit([1.0, 2.0], 0.5))


class TestTightness:
    @pytest.mark.parametrize("x, expected", [((0.6, 0.6), 1), ((0.4, 0.4), -1)])
    def test_network(self, x, expected):
        assert eval_relu(make_tightness_network(2, 2), x) == expected

    def test_seven_hyperplanes(self):
        dnf, _ = relu_to_threshold_dnf(make_tightness_network(3, 3))
        planes = distinct_hyperplanes(dnf)
        assert len(planes) == 7
        assert all(u.bias == -1.0 for u in planes)
        assert {tuple(u.weights) for u in planes} == {
            tuple(float(i + 1 in S) for i in range(3)) for S in nonempty_subsets(3)}

    def test_witness_12(self):
        x = tightness_witness(3, 3, {1, 2})
        assert x.tolist() == [0.75, 0.75, -2.0]
        sums = {S: -1 + sum(x[i - 1] for i in S) for S in nonempty_subsets(3)}
        assert sums[(1, 2)] == pytest.approx(0.5)
        assert all(v < 0 for S, v in sums.items() if S != (1, 2))

    def test_witness_singleton(self):
        x = tightness_witness(3, 3, {3})
        assert x.tolist() == [-3.0, -3.0, 2.0]
        positive = [S for S in nonempty_subsets(3) if -1 + sum(x[i - 1] for i in S) > 0]
        assert positive == [(3,)]

    @pytest.mark.parametrize("n, d", [(2, 2), (3, 5), (4, 4)])
    def test_every_witness_positive(self, n, d):
        net = make_tightness_network(n, d)
        for S in nonempty_subsets(n):
            x = tightness_witness(n, d, S)
            assert eval_relu(net, x) == 1
            assert np.all(x[n:] == 0)

    def test_errors(self):
        with pytest.raises(ValueError):
            make_tightness_network(3, 2)
        with pytest.raises(ValueError):
            tightness_witness(3, 3, set())


class TestAnyNonnegative:
    @pytest.mark.parametrize("x, expected", [((-1, -1, -1), -1), ((-1, 0.5, -1), 1), ((-1, 0, -1), 1)])
    def test_examples(self, x, expected):
        assert make_any_nonnegative_network(3, 3).predict(np.array(x, float)) == expected

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_truth_table(self, n):
        net = make_any_nonnegative_network(n, n + 1)
        for signs in itertools.product([-1.0, 1.0], repeat=n):
            x = np.array(list(signs) + [7.0]) * 0.5
            assert net.predict(x) == (1 if max(signs) > 0 else -1)

    def test_n_one_rejected(self):
        with pytest.raises(ValueError):
            make_any_nonnegative_network(1, 3)
