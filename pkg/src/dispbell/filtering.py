"""Heralded single-photon-amplifier filter as a conditional qubit channel.

The filter acts on the 0/1-photon subspace of one optical mode.  On success
it trades loss accumulated upstream (source coupling, transmission) for the
filter's own single-photon-source and detector efficiencies.  The channel is
sub-normalized: the trace of the output is the success probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .fock import ModeSpace, MultiModeState, TruncatedOperator
from .states import AtomPhotonParams, atom_photon

MIN_SUCCESS_PROB = 1e-300


@dataclass(frozen=True)
class FilterParams:
    """Beam-splitter transmissivity and internal efficiencies of the filter."""

    t: float
    eta_cp: float  # single-photon source efficiency inside the filter
    eta_d: float  # heralding detector efficiency

    def __post_init__(self):
        if not 0.0 < self.t < 1.0:
            raise ValueError(f"t must lie in (0, 1), got {self.t}")
        if not 0.0 < self.eta_cp <= 1.0:
            raise ValueError(f"eta_cp must lie in (0, 1], got {self.eta_cp}")
        if not 0.0 < self.eta_d <= 1.0:
            raise ValueError(f"eta_d must lie in (0, 1], got {self.eta_d}")


def filter_kraus(params: FilterParams) -> list[TruncatedOperator]:
    """The four Kraus operators of the heralded filter on a qubit mode."""
    t, ecp, ed = params.t, params.eta_cp, params.eta_d
    qubit = ModeSpace([2])

    def lower(coeff):
        m = np.zeros((2, 2), dtype=complex)
        m[0, 1] = coeff
        return m

    k1 = lower(math.sqrt(ed * (1.0 - ecp * ed) / 2.0))
    k2 = lower(-math.sqrt((1.0 - t) * ecp * ed**2 / 2.0))
    k3 = lower(-math.sqrt((1.0 - t) * ecp * ed * (1.0 - ed) / 2.0))
    k4 = np.diag(
        [
            -math.sqrt((1.0 - t) * ecp * ed / 2.0),
            math.sqrt(t * ecp * ed**2 / 2.0),
        ]
    ).astype(complex)
    return [TruncatedOperator(qubit, m) for m in (k1, k2, k3, k4)]


def _apply_single_mode(matrix, dims, mode, kraus):
    left = int(np.prod(dims[:mode], dtype=int))
    right = int(np.prod(dims[mode + 1 :], dtype=int))
    out = np.zeros_like(matrix)
    for k in kraus:
        full = np.kron(np.kron(np.eye(left), k.matrix), np.eye(right))
        out += full @ matrix @ full.conj().T
    return out


def apply_filter(
    rho: MultiModeState, modes: list[int], params: FilterParams
) -> tuple[MultiModeState, float]:
    """Filter each listed mode; return the renormalized state and success probability.

    The success probability is the trace of the unnormalized output, i.e.
    the joint probability that every listed mode heralds successfully.
    """
    dims = rho.space.dims
    for mode in modes:
        if not 0 <= mode < len(dims):
            raise ValueError(f"mode index {mode} out of range for {dims}")
        if dims[mode] != 2:
            raise ValueError(
                f"filter acts on the 0-1 photon subspace; mode {mode} has dimension {dims[mode]}"
            )
    kraus = filter_kraus(params)
    matrix = rho.matrix
    for mode in modes:
        matrix = _apply_single_mode(matrix, dims, mode, kraus)
    prob = float(np.trace(matrix).real)
    if prob < MIN_SUCCESS_PROB:
        raise ValueError(f"filter success probability {prob} is numerically zero")
    out = MultiModeState(rho.space, matrix / prob, rho.party_map)
    return out, prob


def filtered_rate(success_prob: float, n_parties: int) -> float:
    """Experiment-rate factor when all parties must herald: p_f^N."""
    if not 0.0 <= success_prob <= 1.0:
        raise ValueError(f"success probability must lie in [0, 1], got {success_prob}")
    return success_prob**n_parties


def substituted_efficiency(eta: float, params: FilterParams) -> float:
    """Single-photon weight after filtering every mode of a lossy W-state.

    Closed form eta'' = eta b^2 / ((1-eta) a^2 + eta (w1+w2+w3) + eta b^2)
    with a, b the diagonal Kraus amplitudes and w_i the |0><1| weights;
    independent of the number of modes.  Approaches eta_cp * eta_d as t -> 1.
    """
    t, ecp, ed = params.t, params.eta_cp, params.eta_d
    a2 = (1.0 - t) * ecp * ed / 2.0
    b2 = t * ecp * ed**2 / 2.0
    w = (
        ed * (1.0 - ecp * ed) / 2.0
        + (1.0 - t) * ecp * ed**2 / 2.0
        + (1.0 - t) * ecp * ed * (1.0 - ed) / 2.0
    )
    return eta * b2 / ((1.0 - eta) * a2 + eta * w + eta * b2)


def atom_filter_check(
    theta: float, eta: float, eta_cp: float, eta_d: float, t: float
) -> float:
    """Residual of the loss-substitution claim for the atom-photon state.

    Filters the photonic mode of the atom-photon state at combined
    efficiency eta and returns the max-elementwise distance to an
    atom-photon state at efficiency eta_cp * eta_d, minimized over the
    excitation angle (the filter rebalances the ground-state amplitude).
    """
    params = FilterParams(t, eta_cp, eta_d)
    filtered, _ = apply_filter(atom_photon(AtomPhotonParams(theta, eta)), [1], params)
    eta_target = eta_cp * eta_d

    def distance(theta_prime):
        target = atom_photon(AtomPhotonParams(theta_prime, eta_target))
        return float(np.max(np.abs(filtered.matrix - target.matrix)))

    # coarse scan over [0, pi] (the filtered coherence may need cos < 0),
    # then a bounded polish around the best bracket
    grid = np.linspace(0.0, math.pi, 129)
    values = [distance(x) for x in grid]
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    res = minimize_scalar(distance, bounds=(lo, hi), method="bounded")
    return float(min(res.fun, values[best]))
