"""Dense linear algebra on truncated Fock spaces.

Everything lives on a product of finite-dimensional modes.  Operators and
states carry their ModeSpace so that mismatched products fail loudly instead
of broadcasting.  The measurement built here models a displacement followed
by a non-number-resolving photon detector: no click counts as +1, a click
as -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERMITICITY_TOL = 1e-12
EIGENVALUE_TOL = 1e-10
TRACE_IMAG_TOL = 1e-10

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


@dataclass(frozen=True)
class ModeSpace:
    """Product of truncated single-mode spaces, one entry per mode."""

    dims: tuple[int, ...]

    def __init__(self, dims: Sequence[int]):
        dims = tuple(int(d) for d in dims)
        if not dims or any(d < 2 for d in dims):
            raise ValueError(f"every mode needs dimension >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    def __mul__(self, other: "ModeSpace") -> "ModeSpace":
        return ModeSpace(self.dims + other.dims)


def _check_square(matrix: np.ndarray, space: ModeSpace) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (space.dim, space.dim):
        raise ValueError(
            f"matrix shape {matrix.shape} does not match space dimension {space.dim}"
        )
    return matrix


@dataclass(frozen=True)
class TruncatedOperator:
    """Complex square matrix acting on a ModeSpace."""

    space: ModeSpace
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _check_square(self.matrix, self.space))

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)


@dataclass(frozen=True)
class MultiModeState:
    """Density matrix with per-mode dimensions and a mode-to-party map.

    `trace_deficit` is the probability weight lost to truncation; the trace
    is allowed to sit anywhere in [1 - trace_deficit, 1].
    """

    space: ModeSpace
    matrix: np.ndarray
    party_map: tuple[int, ...] = None  # type: ignore[assignment]
    trace_deficit: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "matrix", _check_square(self.matrix, self.space))
        if self.party_map is None:
            object.__setattr__(self, "party_map", tuple(range(self.space.n_modes)))
        if len(self.party_map) != self.space.n_modes:
            raise ValueError("party_map must assign every mode")
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if herm > HERMITICITY_TOL:
            raise ValueError(f"density matrix not Hermitian (residual {herm:.2e})")

    @property
    def n_parties(self) -> int:
        return len(set(self.party_map))

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))

    def validate(self) -> "MultiModeState":
        """Full physicality check: trace window and positive spectrum.

        Costs an eigendecomposition, so it is called from tests and from
        one-off constructions, not from optimizer inner loops.
        """
        tr = self.trace()
        if not (1.0 - self.trace_deficit - 1e-12 <= tr <= 1.0 + 1e-12):
            raise ValueError(
                f"trace {tr} outside [1 - {self.trace_deficit}, 1]"
            )
        lowest = float(np.linalg.eigvalsh(self.matrix)[0])
        if lowest < -EIGENVALUE_TOL:
            raise ValueError(f"negative eigenvalue {lowest:.2e}")
        return self

    def renormalized(self) -> "MultiModeState":
        tr = self.trace()
        return MultiModeState(self.space, self.matrix / tr, self.party_map)


@dataclass(frozen=True)
class Displacement:
    """Measurement setting for an optical party: displace by alpha, detect."""

    alpha: complex

    def observable(self, dim: int) -> TruncatedOperator:
        return displacement_measurement(self.alpha, dim)


@dataclass(frozen=True)
class BlochProjection:
    """Projective qubit measurement along a unit Bloch vector."""

    n: tuple[float, float, float]

    def __post_init__(self):
        n = tuple(float(x) for x in self.n)
        norm = math.sqrt(sum(x * x for x in n))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"Bloch vector must be unit length, |n| = {norm}")
        object.__setattr__(self, "n", n)

    def observable(self, dim: int) -> TruncatedOperator:
        if dim != 2:
            raise ValueError("Bloch measurements act on dimension-2 modes only")
        return bloch_observable(self.n)


MeasurementSetting = Displacement | BlochProjection


def coherent_vector(alpha: complex, n_max: int) -> np.ndarray:
    """Fock coefficients e^(-|alpha|^2/2) alpha^n / sqrt(n!) for n < n_max.

    Uses the ratio recurrence c_{n+1} = c_n * alpha / sqrt(n+1), which is
    stable for any truncation and avoids explicit factorials.
    """
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise ValueError(f"non-finite amplitude {alpha}")
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    c = np.empty(n_max, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(n_max - 1):
        c[n + 1] = c[n] * alpha / math.sqrt(n + 1)
    return c


def displacement_measurement(alpha: complex, n_max: int) -> TruncatedOperator:
    """Click/no-click observable 2|alpha><alpha| - 1 in the Fock basis.

    Row n, column n' holds 2 e^(-|a|^2) a^n (a*)^n' / sqrt(n! n'!) - delta,
    i.e. <n| 2|a><a| - 1 |n'> with ket coefficients <n|a> = c_n.
    """
    c = coherent_vector(alpha, n_max)
    m = 2.0 * np.outer(c, c.conj()) - np.eye(n_max)
    return TruncatedOperator(ModeSpace([n_max]), m)


def bloch_observable(n: Sequence[float]) -> TruncatedOperator:
    """Qubit observable n . sigma in the ordered basis {|g>, |s>}."""
    n = np.asarray(n, dtype=float)
    norm = float(np.linalg.norm(n))
    if norm < 1e-15:
        raise ValueError("zero Bloch vector")
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"Bloch vector must be unit length, |n| = {norm}")
    m = n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
    return TruncatedOperator(ModeSpace([2]), m)


def tensor(ops: Sequence[TruncatedOperator]) -> TruncatedOperator:
    """Kronecker product of operators, modes concatenated in order."""
    if not ops:
        raise ValueError("tensor of an empty operator list")
    matrix = ops[0].matrix
    space = ops[0].space
    for op in ops[1:]:
        matrix = np.kron(matrix, op.matrix)
        space = space * op.space
    return TruncatedOperator(space, matrix)


def expectation(op: TruncatedOperator, rho: MultiModeState) -> float:
    """Tr[op rho], asserting the imaginary residue is numerical noise."""
    if op.space.dims != rho.space.dims:
        raise ValueError(
            f"operator on dims {op.space.dims} vs state on dims {rho.space.dims}"
        )
    value = complex(np.sum(op.matrix * rho.matrix.T))
    if abs(value.imag) > TRACE_IMAG_TOL:
        raise ValueError(
            f"imaginary trace residue {value.imag:.2e}; non-Hermitian input?"
        )
    return value.real
