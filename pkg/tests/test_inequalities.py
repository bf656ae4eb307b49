import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispbell.fock import (
    BlochProjection,
    Displacement,
    ModeSpace,
    MultiModeState,
    bloch_observable,
    displacement_measurement,
)
from dispbell.inequalities import (
    Chsh,
    CorrelatorTable,
    Imm22,
    W3zb,
    atom_w_correlator_table,
    chsh_value,
    correlator,
    i3322_spec,
    i3322_value,
    imm22_spec,
    imm22_value,
    lhv_bound,
    w3zb_value,
    w_state_correlator_table,
    walsh_transform,
)
from dispbell.states import AtomPhotonParams, atom_photon, atom_w_state, w_lossy
from helpers import rand_density


def vacuum_state(dims):
    d = int(np.prod(dims))
    m = np.zeros((d, d), dtype=complex)
    m[0, 0] = 1.0
    return MultiModeState(ModeSpace(dims), m)


def product_state(rng, dims):
    parts = [rand_density(rng, [d]).matrix for d in dims]
    m = parts[0]
    for p in parts[1:]:
        m = np.kron(m, p)
    return MultiModeState(ModeSpace(dims), m)


def closed_form_identical_w_correlator(eta, m2, n):
    """Spec of the all-parties-same-setting correlator on the lossy W-state."""
    m00, m01, m10, m11 = m2[0, 0], m2[0, 1], m2[1, 0], m2[1, 1]
    return (
        eta * (m00 ** (n - 1) * m11 + (n - 1) * m00 ** (n - 2) * m01 * m10)
        + (1 - eta) * m00**n
    ).real


class TestLhvBounds:
    def test_chsh(self):
        assert lhv_bound(Chsh()) == 2.0

    def test_i3322(self):
        assert lhv_bound(i3322_spec()) == 0.0

    @pytest.mark.parametrize("m", [2, 4, 5])
    def test_staircase_family(self, m):
        spec = imm22_spec(m)
        assert lhv_bound(spec) == spec.classical_bound == 0.0

    def test_bad_declared_bound_rejected(self):
        good = i3322_spec()
        with pytest.raises(ValueError):
            Imm22(
                m=3,
                joint=good.joint,
                marg_a=(0.0, 0.0, 0.0),  # drops the -P(A1) term
                marg_b=good.marg_b,
            )

    def test_nonlinear_not_enumerable(self):
        with pytest.raises(ValueError):
            lhv_bound(W3zb(3))


class TestCorrelator:
    def test_vacuum_never_clicks(self):
        rho = vacuum_state([6, 6])
        val = correlator(rho, [Displacement(0.0), Displacement(0.0)])
        assert val == pytest.approx(1.0)

    def test_atom_photon_diagonal(self):
        rho = atom_photon(AtomPhotonParams(math.pi / 4, 1.0))
        val = correlator(rho, [BlochProjection((0, 0, 1)), Displacement(0.0)])
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_setting_count_checked(self):
        rho = vacuum_state([2, 2])
        with pytest.raises(ValueError):
            correlator(rho, [Displacement(0.0)])

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("eta", [0.5, 0.8, 1.0])
    def test_identical_setting_closed_form(self, n, eta):
        alpha = 0.4
        rho = w_lossy(n, eta)
        dense = correlator(rho, [Displacement(alpha)] * n)
        m2 = displacement_measurement(alpha, 2).matrix
        assert dense == pytest.approx(
            closed_form_identical_w_correlator(eta, m2, n), abs=1e-10
        )


class TestChsh:
    def test_all_zero_settings_on_vacuum(self):
        rho = vacuum_state([8, 8])
        zeros = [Displacement(0.0), Displacement(0.0)]
        assert chsh_value(rho, zeros, zeros) == pytest.approx(2.0)

    @settings(max_examples=20, deadline=None)
    @given(
        seed=st.integers(0, 10**6),
        a0=st.floats(-1.5, 1.5),
        a1=st.floats(-1.5, 1.5),
        b0=st.floats(-1.5, 1.5),
        b1=st.floats(-1.5, 1.5),
    )
    def test_product_states_respect_local_bound(self, seed, a0, a1, b0, b1):
        rho = product_state(np.random.default_rng(seed), [6, 6])
        val = chsh_value(
            rho,
            [Displacement(a0), Displacement(a1)],
            [Displacement(b0), Displacement(b1)],
        )
        assert abs(val) <= 2.0 + 1e-8

    def test_relabeling_symmetry(self):
        rho = atom_photon(AtomPhotonParams(0.6, 0.8))
        a = [BlochProjection((0, 0, 1)), BlochProjection((1, 0, 0))]
        b = [Displacement(0.2), Displacement(-0.4)]
        s = chsh_value(rho, a, b)
        # swap both parties' settings; the sign pattern maps S -> S
        s_swapped = chsh_value(rho, a[::-1], b[::-1])
        c = [
            [correlator(rho, [x, y]) for y in b]
            for x in a
        ]
        assert s_swapped == pytest.approx(
            c[1][1] + c[1][0] + c[0][1] - c[0][0], abs=1e-12
        )
        assert s == pytest.approx(c[0][0] + c[0][1] + c[1][0] - c[1][1], abs=1e-12)


class TestImm22:
    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_product_states_stay_below_zero(self, seed):
        rng = np.random.default_rng(seed)
        rho = product_state(rng, [2, 2])
        settings_a = [
            BlochProjection(tuple(v / np.linalg.norm(v)))
            for v in rng.normal(size=(3, 3))
        ]
        settings_b = [Displacement(complex(*rng.normal(scale=0.5, size=2))) for _ in range(3)]
        assert i3322_value(rho, settings_a, settings_b) <= 1e-8

    def test_value_matches_manual_expansion(self):
        rho = atom_photon(AtomPhotonParams(0.5, 0.7))
        sa = [BlochProjection((0, 0, 1)), BlochProjection((1, 0, 0)), BlochProjection((0, 1, 0))]
        sb = [Displacement(0.1), Displacement(0.3), Displacement(-0.2)]
        spec = i3322_spec()
        pa = [(np.eye(2) + s.observable(2).matrix) / 2 for s in sa]
        pb = [(np.eye(2) + s.observable(2).matrix) / 2 for s in sb]

        def p(op_a, op_b):
            return float(np.trace(np.kron(op_a, op_b) @ rho.matrix).real)

        manual = (
            p(pa[0], pb[0]) + p(pa[0], pb[1]) + p(pa[0], pb[2])
            + p(pa[1], pb[0]) + p(pa[1], pb[1]) - p(pa[1], pb[2])
            + p(pa[2], pb[0]) - p(pa[2], pb[1])
            - p(pa[0], np.eye(2))
            - 2 * p(np.eye(2), pb[0]) - p(np.eye(2), pb[1])
        )
        assert imm22_value(rho, sa, sb, spec) == pytest.approx(manual, abs=1e-12)


class TestW3zb:
    def test_uniform_table_saturates_bound(self):
        table = CorrelatorTable(3, np.ones(8))
        assert w3zb_value(table) == pytest.approx(1.0, abs=1e-14)

    def test_chsh_optimal_pattern(self):
        r = 1 / math.sqrt(2)
        table = CorrelatorTable(2, [r, r, r, -r])
        assert w3zb_value(table) == pytest.approx(math.sqrt(2), abs=1e-14)

    @pytest.mark.parametrize("n", [2, 3])
    def test_deterministic_strategies_hit_exactly_one(self, n):
        for outcomes in itertools.product([(-1, -1), (-1, 1), (1, -1), (1, 1)], repeat=n):
            values = np.empty(2**n)
            for s in range(2**n):
                prod = 1.0
                for k in range(n):
                    bit = (s >> (n - 1 - k)) & 1
                    prod *= outcomes[k][bit]
                values[s] = prod
            assert w3zb_value(CorrelatorTable(n, values)) == pytest.approx(1.0, abs=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(1, 5))
    def test_fourier_round_trip(self, seed, n):
        rng = np.random.default_rng(seed)
        values = rng.uniform(-1, 1, size=2**n)
        tilde = walsh_transform(values) / 2**n
        recovered = walsh_transform(tilde)
        assert np.max(np.abs(recovered - values)) < 1e-12

    def test_incomplete_table_rejected(self):
        with pytest.raises(ValueError):
            CorrelatorTable(3, np.ones(6))
        with pytest.raises(ValueError):
            CorrelatorTable(2, [1.0, 1.0, 1.0, 1.5])


class TestFastCorrelatorTables:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_w_table_matches_dense(self, n):
        eta = 0.75
        alphas = (0.35, -0.6)
        ops = [
            tuple(displacement_measurement(a, 2).matrix for a in alphas)
        ] * n
        table = w_state_correlator_table(eta, ops)
        rho = w_lossy(n, eta)
        for s in range(2**n):
            settings = [
                Displacement(alphas[(s >> (n - 1 - k)) & 1]) for k in range(n)
            ]
            assert table.values[s] == pytest.approx(
                correlator(rho, settings), abs=1e-10
            )

    def test_w_table_per_party_settings(self):
        n, eta = 3, 0.6
        rng = np.random.default_rng(5)
        alphas = rng.uniform(-0.8, 0.8, size=(n, 2))
        ops = [
            tuple(displacement_measurement(a, 2).matrix for a in row)
            for row in alphas
        ]
        table = w_state_correlator_table(eta, ops)
        rho = w_lossy(n, eta)
        for s in range(2**n):
            settings = [
                Displacement(alphas[k][(s >> (n - 1 - k)) & 1]) for k in range(n)
            ]
            assert table.values[s] == pytest.approx(
                correlator(rho, settings), abs=1e-10
            )

    def test_w_table_with_bloch_settings(self):
        n, eta = 4, 0.85
        vecs = ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0))
        ops = [tuple(bloch_observable(v).matrix for v in vecs)] * n
        table = w_state_correlator_table(eta, ops)
        rho = w_lossy(n, eta)
        for s in range(2**n):
            settings = [
                BlochProjection(vecs[(s >> (n - 1 - k)) & 1]) for k in range(n)
            ]
            assert table.values[s] == pytest.approx(
                correlator(rho, settings), abs=1e-10
            )

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_atom_w_table_matches_dense(self, n):
        theta, eta = 0.8, 0.65
        vecs = ((0.6, 0.0, 0.8), (1.0, 0.0, 0.0))
        alphas = (0.25, -0.45)
        atom_ops = tuple(bloch_observable(v).matrix for v in vecs)
        photon_ops = [
            tuple(displacement_measurement(a, 2).matrix for a in alphas)
        ] * (n - 1)
        table = atom_w_correlator_table(theta, eta, atom_ops, photon_ops)
        rho = atom_w_state(n, theta, eta)
        for s in range(2**n):
            settings = [BlochProjection(vecs[(s >> (n - 1)) & 1])]
            settings += [
                Displacement(alphas[(s >> (n - 1 - k)) & 1]) for k in range(1, n)
            ]
            assert table.values[s] == pytest.approx(
                correlator(rho, settings), abs=1e-10
            )
