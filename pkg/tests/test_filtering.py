import math
import itertools

import numpy as np
import pytest

from dispbell.fock import ModeSpace, MultiModeState
from dispbell.filtering import (
    FilterParams,
    apply_filter,
    atom_filter_check,
    filter_kraus,
    filtered_rate,
    substituted_efficiency,
)
from dispbell.states import w_lossy, w_state


def kraus_sum(params):
    total = np.zeros((2, 2), dtype=complex)
    for k in filter_kraus(params):
        total += k.matrix.conj().T @ k.matrix
    return total


def vacuum_mode():
    m = np.zeros((2, 2), dtype=complex)
    m[0, 0] = 1.0
    return MultiModeState(ModeSpace([2]), m)


class TestKrausOperators:
    def test_structure(self):
        ops = filter_kraus(FilterParams(0.5, 0.8, 0.7))
        for k in ops[:3]:
            assert k.matrix[0, 1] != 0
            k_zeroed = k.matrix.copy()
            k_zeroed[0, 1] = 0
            assert np.max(np.abs(k_zeroed)) == 0
        assert np.max(np.abs(ops[3].matrix - np.diag(np.diag(ops[3].matrix)))) == 0

    @pytest.mark.parametrize("t", np.linspace(0.05, 0.95, 10))
    def test_physicality_grid(self, t):
        for ecp in np.linspace(0.1, 1.0, 10):
            for ed in np.linspace(0.1, 1.0, 10):
                total = kraus_sum(FilterParams(t, ecp, ed))
                evals = np.linalg.eigvalsh(total)
                assert evals[0] >= -1e-14
                assert evals[-1] <= 1.0 + 1e-12

    def test_completeness_sum_eigenvalues(self):
        # the |0> and |1> weights of sum K+K have known closed forms
        for t, ecp, ed in [(0.3, 0.9, 0.6), (0.9, 0.5, 0.95), (0.1, 1.0, 1.0)]:
            total = kraus_sum(FilterParams(t, ecp, ed))
            assert total[0, 0] == pytest.approx((1 - t) * ecp * ed / 2, abs=1e-14)
            assert total[1, 1] == pytest.approx(
                (ed / 2) * (1 + (1 - t) * ecp * (1 - ed)), abs=1e-14
            )
            assert abs(total[0, 1]) < 1e-15

    def test_high_transmission_unit_efficiency_limit(self):
        ops = filter_kraus(FilterParams(1 - 1e-12, 1.0, 1.0))
        # all |0><1| operators and the |0><0| part of K4 vanish; K4 -> (1/sqrt 2)|1><1|
        for k in ops[:3]:
            assert np.max(np.abs(k.matrix)) < 1e-6
        assert abs(ops[3].matrix[0, 0]) < 1e-6
        assert ops[3].matrix[1, 1] == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_vanishing_detector_kills_channel(self):
        ops = filter_kraus(FilterParams(0.5, 0.8, 1e-12))
        for k in ops:
            assert np.max(np.abs(k.matrix)) < 1e-5

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            FilterParams(0.0, 0.5, 0.5)
        with pytest.raises(ValueError):
            FilterParams(0.5, 1.5, 0.5)
        with pytest.raises(ValueError):
            FilterParams(0.5, 0.5, 0.0)


class TestApplyFilter:
    def test_vacuum_success_probability(self):
        params = FilterParams(0.4, 0.9, 0.8)
        out, prob = apply_filter(vacuum_mode(), [0], params)
        assert prob == pytest.approx((1 - 0.4) * 0.9 * 0.8 / 2, abs=1e-14)
        assert out.matrix[0, 0] == pytest.approx(1.0)

    def test_rejects_large_modes(self):
        from dispbell.states import tmss_pure

        with pytest.raises(ValueError):
            apply_filter(tmss_pure(0.1, 0.0, 4), [0], FilterParams(0.5, 0.9, 0.9))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_w_form_preserved(self, n):
        params = FilterParams(0.35, 0.85, 0.75)
        rho = w_lossy(n, 0.6)
        out, prob = apply_filter(rho, list(range(n)), params)
        assert 0 < prob <= 1
        # fit the vacuum/W mixture and check the off-form residual
        w = w_state(n).matrix
        ket = 1 << (n - 1)
        bra = 1 << (n - 2)
        eta_eff = float(out.matrix[ket, bra].real) * n
        model = eta_eff * w
        model[0, 0] += 1.0 - eta_eff
        assert np.max(np.abs(out.matrix - model)) < 1e-12

    @pytest.mark.parametrize("n", [2, 3])
    def test_loss_substitution_limit(self, n):
        t = 1 - 1e-6
        for eta, ecp, ed in itertools.product([0.3, 0.6, 0.9], repeat=3):
            params = FilterParams(t, ecp, ed)
            out, _ = apply_filter(w_lossy(n, eta), list(range(n)), params)
            target = w_lossy(n, ecp * ed)
            assert np.max(np.abs(out.matrix - target.matrix)) < 1e-4

    def test_substituted_efficiency_closed_form(self):
        n = 3
        for t in (0.2, 0.7, 1 - 1e-6):
            params = FilterParams(t, 0.8, 0.9)
            out, _ = apply_filter(w_lossy(n, 0.5), list(range(n)), params)
            eta_eff = substituted_efficiency(0.5, params)
            target = eta_eff * w_state(n).matrix
            target[0, 0] += 1 - eta_eff
            assert np.max(np.abs(out.matrix - target)) < 1e-12

    def test_success_prob_multiplicative(self):
        params = FilterParams(0.45, 0.9, 0.85)
        # product state: joint probability factorizes exactly
        single = vacuum_mode().matrix
        excited = np.zeros((2, 2), dtype=complex)
        excited[1, 1] = 1.0
        pair = MultiModeState(ModeSpace([2, 2]), np.kron(single, excited))
        _, p_joint = apply_filter(pair, [0, 1], params)
        _, p0 = apply_filter(MultiModeState(ModeSpace([2]), single), [0], params)
        _, p1 = apply_filter(MultiModeState(ModeSpace([2]), excited), [0], params)
        assert p_joint == pytest.approx(p0 * p1, rel=1e-12)
        # correlated state: probabilities chain through conditioning
        rho = w_lossy(2, 0.7)
        _, p_both = apply_filter(rho, [0, 1], params)
        first, p_first = apply_filter(rho, [0], params)
        _, p_second = apply_filter(first, [1], params)
        assert p_both == pytest.approx(p_first * p_second, rel=1e-12)


class TestFilteredRate:
    def test_trivial_values(self):
        assert filtered_rate(1.0, 7) == 1.0
        assert filtered_rate(0.5, 2) == 0.25

    def test_rate_from_channel(self):
        params = FilterParams(0.5, 0.9, 0.8)
        _, p_f = apply_filter(w_lossy(3, 0.5), [0], params)
        assert filtered_rate(p_f, 3) == pytest.approx(p_f**3)

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            filtered_rate(1.2, 2)


class TestAtomFilterCheck:
    def test_consistency_case(self):
        # upstream efficiency already equals the filter's own budget
        residual = atom_filter_check(0.3, 0.72, 0.8, 0.9, 1 - 1e-6)
        assert residual < 1e-4

    def test_theta_zero(self):
        residual = atom_filter_check(0.0, 0.5, 0.9, 0.8, 0.7)
        assert residual < 1e-12

    def test_small_theta_substitution(self):
        residual = atom_filter_check(0.1, 0.5, 0.9, 0.8, 1 - 1e-6)
        assert residual < 1e-3
