"""Bell expressions and their local-hidden-variable bounds.

Linear inequalities (CHSH and the m-settings probability family) are checked
against brute-force enumeration of deterministic strategies the moment they
are constructed, so a mistyped coefficient table cannot survive long enough
to produce a wrong threshold.  The multi-party full-correlator criterion is
the nonlinear sum of Walsh-Fourier magnitudes with local bound 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fock import MeasurementSetting, MultiModeState, expectation, tensor

CORRELATOR_SLACK = 1e-8


@dataclass(frozen=True)
class Chsh:
    """Two parties, two settings, full-correlator combination, bound 2."""

    classical_bound: float = 2.0

    def __post_init__(self):
        assert self.classical_bound == lhv_bound(self)


@dataclass(frozen=True)
class Imm22:
    """Probability-form inequality with m settings per party and bound 0.

    joint[i][j] weights the both-plus probability P(A_i B_j); marg_a and
    marg_b weight single-party plus probabilities.  The declared bound is
    verified by enumeration at construction.
    """

    m: int
    joint: tuple[tuple[float, ...], ...]
    marg_a: tuple[float, ...]
    marg_b: tuple[float, ...]
    classical_bound: float = 0.0

    def __post_init__(self):
        if len(self.joint) != self.m or any(len(r) != self.m for r in self.joint):
            raise ValueError("joint coefficient table must be m x m")
        if len(self.marg_a) != self.m or len(self.marg_b) != self.m:
            raise ValueError("marginal coefficient rows must have length m")
        bound = lhv_bound(self)
        if abs(bound - self.classical_bound) > 1e-12:
            raise ValueError(
                f"declared bound {self.classical_bound} but enumeration gives {bound}"
            )


@dataclass(frozen=True)
class W3zb:
    """All full-correlator inequalities for n parties folded into one value <= 1."""

    n_parties: int
    classical_bound: float = 1.0


InequalitySpec = Chsh | Imm22 | W3zb


def i3322_spec() -> Imm22:
    """The three-setting probability inequality used for atom-photon tests."""
    return imm22_spec(3)


def imm22_spec(m: int) -> Imm22:
    """Staircase m-settings member of the probability family, bound 0.

    Joint weight +1 while i + j stays below m, -1 on the antidiagonal
    i + j = m, 0 beyond; marginals -1 on A_1 and -(m-1) ... 0 on the B side.
    For m = 3 this is the standard three-setting form.
    """
    if m < 2:
        raise ValueError("need at least two settings per party")
    joint = tuple(
        tuple(1.0 if i + j < m else (-1.0 if i + j == m else 0.0) for j in range(m))
        for i in range(m)
    )
    marg_a = (-1.0,) + (0.0,) * (m - 1)
    marg_b = tuple(float(j - (m - 1)) for j in range(m))
    return Imm22(m=m, joint=joint, marg_a=marg_a, marg_b=marg_b)


def lhv_bound(spec: InequalitySpec) -> float:
    """Maximum over deterministic local strategies, by enumeration."""
    if isinstance(spec, Chsh):
        best = -math.inf
        for a0, a1, b0, b1 in itertools.product((-1, 1), repeat=4):
            best = max(best, a0 * b0 + a0 * b1 + a1 * b0 - a1 * b1)
        return float(best)
    if isinstance(spec, Imm22):
        if spec.m > 5:
            raise ValueError("enumeration capped at m = 5")
        strategies = np.array(list(itertools.product((0, 1), repeat=spec.m)))
        joint = np.asarray(spec.joint)
        values = (
            strategies @ joint @ strategies.T
            + (strategies @ np.asarray(spec.marg_a))[:, None]
            + (strategies @ np.asarray(spec.marg_b))[None, :]
        )
        return float(values.max())
    raise ValueError(f"no linear enumeration for {type(spec).__name__}")


def _party_observables(rho: MultiModeState, settings: Sequence[MeasurementSetting]):
    dims = rho.space.dims
    if len(settings) != len(dims):
        raise ValueError(
            f"{len(settings)} settings for a state with {len(dims)} modes"
        )
    return [s.observable(d) for s, d in zip(settings, dims)]


def correlator(rho: MultiModeState, settings: Sequence[MeasurementSetting]) -> float:
    """Expectation of the product of all parties' +/-1 outcomes."""
    return expectation(tensor(_party_observables(rho, settings)), rho)


def chsh_value(
    rho: MultiModeState,
    settings_a: Sequence[MeasurementSetting],
    settings_b: Sequence[MeasurementSetting],
) -> float:
    """<A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>."""
    if len(settings_a) != 2 or len(settings_b) != 2:
        raise ValueError("CHSH takes two settings per party")
    c = [
        [correlator(rho, [a, b]) for b in settings_b]
        for a in settings_a
    ]
    return c[0][0] + c[0][1] + c[1][0] - c[1][1]


def imm22_value(
    rho: MultiModeState,
    settings_a: Sequence[MeasurementSetting],
    settings_b: Sequence[MeasurementSetting],
    spec: Imm22,
) -> float:
    """Probability combination for the m-settings inequality.

    The plus outcome is no-click for displacement settings and the +1
    eigenstate for Bloch settings; its projector is (1 + observable)/2.
    """
    if len(settings_a) != spec.m or len(settings_b) != spec.m:
        raise ValueError(f"expected {spec.m} settings per party")
    dims = rho.space.dims
    if len(dims) != 2:
        raise ValueError("probability inequalities implemented for two parties")
    proj_a = [(np.eye(dims[0]) + s.observable(dims[0]).matrix) / 2 for s in settings_a]
    proj_b = [(np.eye(dims[1]) + s.observable(dims[1]).matrix) / 2 for s in settings_b]
    eye_a, eye_b = np.eye(dims[0]), np.eye(dims[1])
    rho_t = rho.matrix.T

    def prob(pa, pb):
        return float(np.sum(np.kron(pa, pb) * rho_t).real)

    value = 0.0
    for i in range(spec.m):
        for j in range(spec.m):
            if spec.joint[i][j] != 0.0:
                value += spec.joint[i][j] * prob(proj_a[i], proj_b[j])
    for i in range(spec.m):
        if spec.marg_a[i] != 0.0:
            value += spec.marg_a[i] * prob(proj_a[i], eye_b)
        if spec.marg_b[i] != 0.0:
            value += spec.marg_b[i] * prob(eye_a, proj_b[i])
    return value


def i3322_value(
    rho: MultiModeState,
    settings_a: Sequence[MeasurementSetting],
    settings_b: Sequence[MeasurementSetting],
) -> float:
    return imm22_value(rho, settings_a, settings_b, i3322_spec())


@dataclass(frozen=True)
class CorrelatorTable:
    """Full correlators xi(s) for every setting vector s in {0,1}^n.

    Entry index packs party k's setting choice into bit (n-1-k), so party 0
    is the most significant bit.
    """

    n_parties: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (2**self.n_parties,):
            raise ValueError(
                f"need {2**self.n_parties} correlators, got shape {values.shape}"
            )
        if np.max(np.abs(values)) > 1.0 + CORRELATOR_SLACK:
            raise ValueError("correlators must lie in [-1, 1]")
        object.__setattr__(self, "values", values)


def walsh_transform(values: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform, butterfly over bit planes."""
    v = np.array(values, dtype=float, copy=True)
    n = v.shape[0]
    h = 1
    while h < n:
        v = v.reshape(n // (2 * h), 2, h)
        top = v[:, 0, :] + v[:, 1, :]
        bottom = v[:, 0, :] - v[:, 1, :]
        v = np.stack([top, bottom], axis=1).reshape(n)
        h *= 2
    return v


def w3zb_value(table: CorrelatorTable) -> float:
    """Sum over r of |2^-n sum_s (-1)^(r.s) xi(s)|; local bound 1."""
    n = 2**table.n_parties
    return float(np.sum(np.abs(walsh_transform(table.values)))) / n


_BITS_CACHE: dict[int, np.ndarray] = {}


def _setting_bits(n_parties: int) -> np.ndarray:
    if n_parties not in _BITS_CACHE:
        idx = np.arange(2**n_parties)
        _BITS_CACHE[n_parties] = (
            (idx[:, None] >> (n_parties - 1 - np.arange(n_parties))) & 1
        ).astype(bool)
    return _BITS_CACHE[n_parties]


def _single_excitation_transfer(party_ops, bits):
    """Sweep the product Prod_k (m00 + x m10 + y m01 + xy m11) mod x^2, y^2.

    Returns the four polynomial coefficients for every setting vector at
    once.  The xy coefficient equals n <W|prod ops|W>, the x and y ones are
    sqrt(n) <W|..|vac> and sqrt(n) <vac|..|W>, the constant is <vac|..|vac>.
    """
    n_settings = bits.shape[0]
    c = np.ones(n_settings, dtype=complex)
    cx = np.zeros(n_settings, dtype=complex)
    cy = np.zeros(n_settings, dtype=complex)
    cxy = np.zeros(n_settings, dtype=complex)
    for k, (op0, op1) in enumerate(party_ops):
        choose = bits[:, k]
        a = np.where(choose, op1[0, 0], op0[0, 0])
        b = np.where(choose, op1[1, 0], op0[1, 0])
        d = np.where(choose, op1[0, 1], op0[0, 1])
        e = np.where(choose, op1[1, 1], op0[1, 1])
        cxy = cxy * a + cx * d + cy * b + c * e
        cx = cx * a + c * b
        cy = cy * a + c * d
        c = c * a
    return c, cx, cy, cxy


def w_state_correlator_table(eta: float, party_ops) -> CorrelatorTable:
    """All 2^n correlators of the lossy W-state for per-party setting pairs.

    party_ops is a sequence of (op0, op1) pairs of 2x2 arrays, one pair per
    party.  Runs in O(n 2^n) instead of building 2^n tensor products, and is
    cross-checked against the dense path in the test suite.
    """
    party_ops = [(np.asarray(p), np.asarray(q)) for p, q in party_ops]
    n = len(party_ops)
    bits = _setting_bits(n)
    c, _, _, cxy = _single_excitation_transfer(party_ops, bits)
    xi = eta * cxy / n + (1.0 - eta) * c
    if np.max(np.abs(xi.imag)) > 1e-10:
        raise ValueError("correlators acquired an imaginary part; check the operators")
    return CorrelatorTable(n, xi.real)


def atom_w_correlator_table(
    theta: float, eta: float, atom_ops, photon_party_ops
) -> CorrelatorTable:
    """Correlator table when party 0 is an atom holding the shared excitation.

    The state is cos(theta)|g, vac> + sqrt(eta) sin(theta)|s, W> plus the
    photon-lost weight on |s, vac>; atom_ops is the pair of 2x2 atomic
    observables, photon_party_ops as in w_state_correlator_table.
    """
    photon_party_ops = [(np.asarray(p), np.asarray(q)) for p, q in photon_party_ops]
    n_ph = len(photon_party_ops)
    n = n_ph + 1
    bits = _setting_bits(n)
    c, cx, cy, cxy = _single_excitation_transfer(photon_party_ops, bits[:, 1:])
    a0, a1 = (np.asarray(m) for m in atom_ops)
    choose = bits[:, 0]
    a_gg = np.where(choose, a1[0, 0], a0[0, 0])
    a_gs = np.where(choose, a1[0, 1], a0[0, 1])
    a_sg = np.where(choose, a1[1, 0], a0[1, 0])
    a_ss = np.where(choose, a1[1, 1], a0[1, 1])
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    xi = (
        cos_t**2 * a_gg * c
        + eta * sin_t**2 * a_ss * cxy / n_ph
        + cos_t * math.sqrt(eta) * sin_t * (a_gs * cy + a_sg * cx) / math.sqrt(n_ph)
        + (1.0 - eta) * sin_t**2 * a_ss * c
    )
    if np.max(np.abs(xi.imag)) > 1e-10:
        raise ValueError("correlators acquired an imaginary part; check the operators")
    return CorrelatorTable(n, xi.real)
