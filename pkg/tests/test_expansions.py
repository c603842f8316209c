import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochexpand import basis, expansions, oracle
from stochexpand.basis import Interval
from stochexpand.drivers import (exponential_measure, make_partition, sample_poisson,
                                 sample_wiener, trial_seed)
from stochexpand.expansions import (BasisVariables, expand, expand_weighted,
                                    explicit_bracket, pairing_bracket,
                                    poisson_variables, wiener_variables,
                                    zeta_from_path)
from stochexpand.kernel import coeff_tensor, unit_kernel

IV = Interval(0.0, 1.0)
SYS = basis.legendre(IV)


def _mark(y):
    return np.asarray(y, dtype=float)


class TestBasisVariables:
    def test_zeta_time_component(self):
        part = make_partition(IV, 2**12)
        path = sample_wiener(part, 1, 0)
        # i = 0 integrates phi_0 = 1 against dt
        assert zeta_from_path(path, SYS, 0, 0) == pytest.approx(1.0, abs=1e-9)

    def test_zeta_statistics(self):
        part = make_partition(IV, 2**10)
        table = np.array([wiener_variables(sample_wiener(part, 1, trial_seed(1, t)),
                                           SYS, 4).table[1]
                          for t in range(4000)])
        n = len(table)
        for j in range(5):
            assert abs(np.mean(table[:, j])) < 3.0 / np.sqrt(n)
            se = np.std(table[:, j] ** 2) / np.sqrt(n)
            assert abs(np.var(table[:, j]) - 1.0) < 3 * se + 5e-3
        cross = table[:, 0] * table[:, 3]
        assert abs(np.mean(cross)) < 3 * np.std(cross) / np.sqrt(n)

    def test_pi_deterministic_component(self):
        real = sample_poisson(IV, 1, exponential_measure(5.0), 3)
        vars_ = poisson_variables(real, SYS, (_mark,), (0,), 2)
        # i = 0: pi_j = int phi_j dt * int y dPi, so only j = 0 survives
        assert vars_.table[0, 0] == pytest.approx(5.0, abs=1e-10)
        assert abs(vars_.table[0, 1]) < 1e-10

    def test_pi_exact_jump_sum(self):
        real = sample_poisson(IV, 1, exponential_measure(5.0), 9)
        times, marks = real.jumps(1)
        vars_ = poisson_variables(real, SYS, (_mark,), (1,), 0)
        want = np.sum(marks) - 5.0  # phi_0 = 1 on [0,1], compensator 1 * 5
        assert vars_.table[0, 0] == pytest.approx(want, abs=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            BasisVariables("wiener", np.array([[np.nan]]), by_slot=False)


@st.composite
def bracket_case(draw):
    k = draw(st.integers(2, 4))
    box = tuple(draw(st.integers(0, 2)) for _ in range(k))
    combo = tuple(draw(st.integers(0, 2)) for _ in range(k))
    seed = draw(st.integers(0, 10**6))
    return k, box, combo, seed


@given(bracket_case())
@settings(max_examples=120, deadline=None)
def test_pairing_equals_explicit(case):
    k, box, combo, seed = case
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(tuple(p + 1 for p in box))
    vectors = [rng.standard_normal(p + 1) for p in box]
    a = pairing_bracket(values, vectors, combo)
    b = explicit_bracket(values, vectors, combo)
    assert a == pytest.approx(b, abs=1e-12)


def test_pairing_with_uneven_boxes():
    rng = np.random.default_rng(5)
    values = rng.standard_normal((4, 2))
    vectors = [rng.standard_normal(4), rng.standard_normal(2)]
    got = pairing_bracket(values, vectors, (1, 1))
    # tied contraction runs over the common extent only
    want = values @ vectors[1] @ vectors[0] - np.trace(values[:2, :2])
    assert got == pytest.approx(want, abs=1e-13)


class TestExpand:
    def test_distinct_components_no_correction(self):
        tensor = coeff_tensor(unit_kernel(2, IV), SYS, (2, 2))
        rng = np.random.default_rng(0)
        table = rng.standard_normal((3, 3))
        variables = BasisVariables("wiener", table, by_slot=False)
        got = expand(tensor, variables, (1, 2)).value
        want = float(table[1, :3] @ tensor.values @ table[2, :3])
        assert got == pytest.approx(want, abs=1e-13)

    def test_same_component_subtracts_trace(self):
        tensor = coeff_tensor(unit_kernel(2, IV), SYS, (2, 2))
        rng = np.random.default_rng(1)
        table = rng.standard_normal((2, 3))
        variables = BasisVariables("wiener", table, by_slot=False)
        got = expand(tensor, variables, (1, 1)).value
        want = float(table[1] @ tensor.values @ table[1]) - np.trace(tensor.values)
        assert got == pytest.approx(want, abs=1e-13)

    def test_prelimit_consistency_with_pairing(self):
        # the finite-N correction approaches the indicator correction
        tensor = coeff_tensor(unit_kernel(2, IV), SYS, (3, 3))
        gaps = []
        for n in (2**8, 2**12):
            part = make_partition(IV, n)
            path = sample_wiener(part, 1, trial_seed(4, 0))
            variables = wiener_variables(path, SYS, 3)
            a = expand(tensor, variables, (1, 1), correction="pairing_general").value
            b = expand(tensor, variables, (1, 1), correction="prelimit",
                       realization=path).value
            gaps.append(abs(a - b))
        assert gaps[1] < gaps[0]

    def test_poisson_coincident_requires_prelimit(self):
        real = sample_poisson(IV, 1, exponential_measure(5.0), 2)
        variables = poisson_variables(real, SYS, (_mark, _mark), (1, 1), 2)
        tensor = coeff_tensor(unit_kernel(2, IV), SYS, (2, 2))
        with pytest.raises(ValueError):
            expand(tensor, variables, (1, 1), correction="pairing_general")
        part = make_partition(IV, 256)
        sample = expand(tensor, variables, (1, 1), correction="prelimit",
                        realization=real, partition=part, mark_factors=(_mark, _mark))
        assert np.isfinite(sample.value)

    def test_poisson_k2_tracks_oracle(self):
        kern = unit_kernel(2, IV)
        tensor = coeff_tensor(kern, SYS, (10, 10))
        part = make_partition(IV, 2**10)
        marks = (_mark, _mark)
        diffs = []
        for t in range(150):
            real = sample_poisson(IV, 2, exponential_measure(5.0), trial_seed(6, t))
            variables = poisson_variables(real, SYS, marks, (1, 2), 10)
            sample = expand(tensor, variables, (1, 2))
            o = oracle.iterated_sum(kern, real, (1, 2), part, marks).value
            diffs.append(o - sample.value)
        mse = np.mean(np.square(diffs))
        residual = (0.5 - tensor.partial_sum()) * 100.0  # scaled by (int y^2 dPi)^2
        se = np.std(np.square(diffs)) / np.sqrt(len(diffs))
        assert mse < residual + 3 * se

    def test_box_must_fit_table(self):
        tensor = coeff_tensor(unit_kernel(2, IV), SYS, (5, 5))
        variables = BasisVariables("wiener", np.zeros((2, 3)), by_slot=False)
        with pytest.raises(ValueError):
            expand(tensor, variables, (1, 1))

    def test_unknown_correction(self):
        tensor = coeff_tensor(unit_kernel(2, IV), SYS, (1, 1))
        variables = BasisVariables("wiener", np.zeros((2, 2)), by_slot=False)
        with pytest.raises(ValueError):
            expand(tensor, variables, (1, 1), correction="nope")


class TestExpandWeighted:
    def test_unit_weight_reduces_to_expand(self):
        tensor = coeff_tensor(unit_kernel(2, IV), SYS, (3, 3))
        rng = np.random.default_rng(2)
        variables = BasisVariables("wiener", rng.standard_normal((2, 4)), by_slot=False)
        a = expand(tensor, variables, (1, 1)).value
        b = expand_weighted(tensor, variables, (1, 1), rho=1.0).value
        assert a == b

    def test_unbounded_ratio_rejected(self):
        sys = basis.bessel_weighted(1.0, 0)
        tensor = coeff_tensor(unit_kernel(2, Interval(0.0, 1.0)), sys, (1, 1),
                              weighted=True)
        variables = BasisVariables("martingale", np.zeros((2, 2)), by_slot=False)
        # rho == 1 against weight tau: ratio blows up near 0
        with pytest.raises(ValueError):
            expand_weighted(tensor, variables, (1, 2), rho=1.0, ratio_bound=100.0)
