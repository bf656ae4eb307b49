"""Constructors for the states used in the Bell-threshold calculations.

Covers two-mode squeezed vacuum (pure and after per-mode loss), single-photon
W-states over qubit-sized modes, atom-photon emission states, and the generic
photon-loss channel that doubles as an independent oracle for the closed-form
lossy states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import ModeSpace, MultiModeState


@dataclass(frozen=True)
class TmssParams:
    """Two-mode squeezed vacuum parameters.

    lam is the tanh of the squeezing parameter, phi the squeezing phase,
    eta the combined coupling x transmission x detection efficiency.
    """

    lam: float
    phi: float = math.pi
    eta: float = 1.0
    n_max: int = 20

    def __post_init__(self):
        if not 0.0 <= self.lam < 1.0:
            raise ValueError(f"lam must lie in [0, 1), got {self.lam}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")


@dataclass(frozen=True)
class AtomPhotonParams:
    """Excitation angle and photon-arm efficiency for the atom-photon state."""

    theta: float
    eta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")


def lambda_to_db(lam: float) -> float:
    """Squeezing in dB for a given lam = tanh(r): -10 log10(exp(-2r))."""
    r = math.atanh(lam)
    return 20.0 * r * math.log10(math.e)


def db_to_lambda(db: float) -> float:
    return math.tanh(db / (20.0 * math.log10(math.e)))


def tmss_pure(lam: float, phi: float = math.pi, n_max: int = 20) -> MultiModeState:
    """Pure two-mode squeezed vacuum sqrt(1-lam^2) sum lam^n e^(i phi n)|n,n>."""
    TmssParams(lam, phi, 1.0, n_max)
    n = np.arange(n_max)
    coeff = math.sqrt(1.0 - lam**2) * lam**n * np.exp(1j * phi * n)
    psi = np.zeros(n_max * n_max, dtype=complex)
    psi[n * n_max + n] = coeff
    rho = np.outer(psi, psi.conj())
    return MultiModeState(
        ModeSpace([n_max, n_max]), rho, trace_deficit=lam ** (2 * n_max)
    )


def _lossy_tmss_terms(n_max: int):
    """Static index/coefficient tables for the lossy-TMSS double sum.

    One row per (n, n', k, k') with k, k' <= min(n, n'); the eta- and
    lam-independent square-root binomial factor is precomputed.
    """
    ns, nps, ks, kps = [], [], [], []
    binom = []
    for n in range(n_max):
        for np_ in range(n_max):
            top = min(n, np_)
            for k in range(top + 1):
                for kp in range(top + 1):
                    ns.append(n)
                    nps.append(np_)
                    ks.append(k)
                    kps.append(kp)
                    binom.append(
                        math.sqrt(
                            math.comb(n, k)
                            * math.comb(n, kp)
                            * math.comb(np_, k)
                            * math.comb(np_, kp)
                        )
                    )
    n = np.array(ns)
    np_ = np.array(nps)
    k = np.array(ks)
    kp = np.array(kps)
    rows = (n - k) * n_max + (n - kp)
    cols = (np_ - k) * n_max + (np_ - kp)
    return {
        "flat": rows * (n_max * n_max) + cols,
        "binom": np.array(binom),
        "e_lam": n + np_,
        "e_eta": n + np_ - k - kp,
        "e_loss": k + kp,
        "phase_exp": n - np_,
    }


_LOSSY_TERM_CACHE: dict[int, dict] = {}


def _lossy_tmss_matrix(lam: float, phi: float, eta: float, n_max: int) -> np.ndarray:
    """Raw density matrix of the lossy squeezed state, no wrapper checks.

    Hot path for the optimizers; kept in lockstep with `tmss_lossy` by the
    test suite.  Returns a float array whenever the phase factors are real.
    """
    if n_max not in _LOSSY_TERM_CACHE:
        _LOSSY_TERM_CACHE[n_max] = _lossy_tmss_terms(n_max)
    t = _LOSSY_TERM_CACHE[n_max]

    pows = np.arange(2 * n_max - 1, dtype=float)
    lam_pow = lam**pows
    eta_pow = eta**pows
    loss_pow = (1.0 - eta) ** pows
    coeff = (
        (1.0 - lam**2)
        * t["binom"]
        * lam_pow[t["e_lam"]]
        * eta_pow[t["e_eta"]]
        * loss_pow[t["e_loss"]]
    )

    dim = n_max * n_max
    phase = np.exp(1j * phi * np.arange(-(n_max - 1), n_max))
    if np.max(np.abs(phase.imag)) < 1e-15:
        w = coeff * phase.real[t["phase_exp"] + n_max - 1]
        rho = np.bincount(t["flat"], weights=w, minlength=dim * dim)
    else:
        w = coeff * phase[t["phase_exp"] + n_max - 1]
        rho = np.bincount(
            t["flat"], weights=w.real, minlength=dim * dim
        ) + 1j * np.bincount(t["flat"], weights=w.imag, minlength=dim * dim)
    return rho.reshape(dim, dim)


def tmss_lossy(params: TmssParams) -> MultiModeState:
    """Two-mode squeezed vacuum after equal loss eta on both modes.

    Evaluates the explicit double sum over lost-photon numbers (k, k') in
    the form lam^(n+n') eta^(n+n'-k-k') (1-eta)^(k+k'), which is free of
    the 0/0 that the (1-eta)/eta ratio form develops at eta = 0.
    """
    rho = _lossy_tmss_matrix(params.lam, params.phi, params.eta, params.n_max)
    return MultiModeState(
        ModeSpace([params.n_max, params.n_max]),
        rho,
        trace_deficit=params.lam ** (2 * params.n_max),
    )


def w_state(n_parties: int) -> MultiModeState:
    """Single photon shared coherently across n qubit-sized modes."""
    if n_parties < 2:
        raise ValueError("a W-state needs at least 2 modes")
    dim = 2**n_parties
    psi = np.zeros(dim, dtype=complex)
    for i in range(n_parties):
        psi[1 << (n_parties - 1 - i)] = 1.0 / math.sqrt(n_parties)
    return MultiModeState(ModeSpace([2] * n_parties), np.outer(psi, psi.conj()))


def w_lossy(n_parties: int, eta: float) -> MultiModeState:
    """W-state after loss eta in each mode: eta |W><W| + (1-eta) |vac><vac|."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    pure = w_state(n_parties)
    rho = eta * pure.matrix
    rho[0, 0] += 1.0 - eta
    return MultiModeState(pure.space, rho)


def atom_photon(params: AtomPhotonParams) -> MultiModeState:
    """Joint atom-light state after partial excitation and photon loss.

    Basis order (|g>, |s>) x (|0>, |1>).  The lossless part is
    cos(theta)|g,0> + sqrt(eta) sin(theta)|s,1>; the photon lost to the
    environment leaves weight (1-eta) sin(theta)^2 on |s,0><s,0|, which
    keeps the trace exactly 1.
    """
    theta, eta = params.theta, params.eta
    psi = np.zeros(4, dtype=complex)
    psi[0] = math.cos(theta)
    psi[3] = math.sqrt(eta) * math.sin(theta)
    rho = np.outer(psi, psi.conj())
    rho[2, 2] += (1.0 - eta) * math.sin(theta) ** 2
    return MultiModeState(ModeSpace([2, 2]), rho)


def atom_w_state(n_parties: int, theta: float, eta: float) -> MultiModeState:
    """Atom entangled with a single photon split over n_parties - 1 modes.

    The n_parties = 2 case reduces to atom_photon.  Mode 0 is the atom;
    loss eta acts on every photonic mode.
    """
    if n_parties < 2:
        raise ValueError("need at least the atom and one photonic mode")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    n_ph = n_parties - 1
    dim = 2**n_parties
    atom_s = 1 << (n_parties - 1)
    psi = np.zeros(dim, dtype=complex)
    psi[0] = math.cos(theta)
    amp = math.sqrt(eta) * math.sin(theta) / math.sqrt(n_ph)
    for i in range(n_ph):
        psi[atom_s | (1 << (n_ph - 1 - i))] = amp
    rho = np.outer(psi, psi.conj())
    rho[atom_s, atom_s] += (1.0 - eta) * math.sin(theta) ** 2
    return MultiModeState(ModeSpace([2] * n_parties), rho)


def _loss_kraus(dim: int, eta: float) -> list[np.ndarray]:
    """Kraus family for losing k photons: <n-k|E_k|n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k)."""
    ops = []
    for k in range(dim):
        e = np.zeros((dim, dim))
        for n in range(k, dim):
            e[n - k, n] = math.sqrt(
                math.comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k
            )
        ops.append(e)
    return ops


def loss_channel(rho: MultiModeState, eta: float, mode_index: int) -> MultiModeState:
    """Apply the photon-loss channel with transmission eta to one mode."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    dims = rho.space.dims
    if not 0 <= mode_index < len(dims):
        raise ValueError(f"mode index {mode_index} out of range for {dims}")
    d = dims[mode_index]
    left = int(np.prod(dims[:mode_index], dtype=int))
    right = int(np.prod(dims[mode_index + 1 :], dtype=int))
    out = np.zeros_like(rho.matrix)
    for e in _loss_kraus(d, eta):
        full = np.kron(np.kron(np.eye(left), e), np.eye(right))
        out += full @ rho.matrix @ full.conj().T
    return MultiModeState(rho.space, out, rho.party_map, rho.trace_deficit)
