"""Shared helpers for the test suite."""

import numpy as np

from dispbell.fock import ModeSpace, MultiModeState


def rand_density(rng, dims):
    """Random full-rank density matrix on the given mode dimensions."""
    d = int(np.prod(dims))
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    return MultiModeState(ModeSpace(dims), rho)


def displaced_vacuum_oracle(alpha, n_max, pad=15):
    """Measurement operator built from the exponentiated displacement.

    Constructs D = expm(alpha a+ - alpha* a) in a padded truncation and
    returns the top n_max x n_max block of 2 D|0><0|D+ - 1.  Independent of
    the closed-form Fock matrix elements used by the library.
    """
    from scipy.linalg import expm

    dim = n_max + pad
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    d = expm(alpha * a.conj().T - np.conj(alpha) * a)
    vac = np.zeros(dim)
    vac[0] = 1.0
    coh = d @ vac
    m = 2.0 * np.outer(coh, coh.conj()) - np.eye(dim)
    return m[:n_max, :n_max]
