"""Dense complex linear-algebra substrate.

State vectors, density matrices, Pauli strings and sums, Hermitian
eigendecomposition, unitary propagators, partial traces, purity, and a
small gate-logging statevector simulator with controlled-gate support.

Conventions shared by every module in this package:

* Qubits are labelled by their bit position within a register: qubit j
  (1-based) carries binary weight 2**(j-1).  Site j of a spin chain is
  qubit j of the system register.
* When a clock register is present it occupies the most significant
  bits, the system the least significant ones, so a joint basis index
  reads ``t * 2**n + s``.
* All operations here are pure functions of their inputs; returned
  arrays are freshly allocated and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

DEFAULT_DENSE_CAP = 14

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

# Single-letter products: _LETTER_PRODUCT[a][b] = (phase, letter) with a*b = phase*letter.
_LETTER_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


class DenseCapExceeded(ValueError):
    """Raised when an operation would allocate above the dense qubit cap."""


class ValidationError(ValueError):
    """Raised when an input violates a declared invariant."""


class WiringError(ValueError):
    """Raised when circuit wires overlap or fall outside the register."""


def _check_cap(q: int, dense_cap: int) -> None:
    if q > dense_cap:
        raise DenseCapExceeded(f"{q} qubits exceeds the dense cap of {dense_cap}")


def num_qubits(dim: int) -> int:
    q = int(round(math.log2(dim)))
    if 2**q != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return q


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PauliString:
    """One weighted Pauli word; ``letters[j-1]`` acts on qubit j."""

    coefficient: complex
    letters: str

    def __post_init__(self):
        if not self.letters or any(ch not in "IXYZ" for ch in self.letters):
            raise ValidationError(f"letters must be a nonempty IXYZ word, got {self.letters!r}")
        if not np.isfinite(complex(self.coefficient)):
            raise ValidationError("coefficient must be finite")

    @property
    def n(self) -> int:
        return len(self.letters)

    def matrix(self) -> np.ndarray:
        """Dense matrix including the coefficient (qubit n outermost)."""
        out = np.array([[1.0]], dtype=complex)
        for ch in reversed(self.letters):
            out = np.kron(out, PAULI_MATRICES[ch])
        return complex(self.coefficient) * out


@dataclass(frozen=True)
class PauliSum:
    """Weighted sum of Pauli strings on a common qubit count."""

    terms: tuple[PauliString, ...]
    n: int

    def __post_init__(self):
        for t in self.terms:
            if t.n != self.n:
                raise ValidationError(f"term on {t.n} qubits in an n={self.n} sum")

    @classmethod
    def from_terms(cls, terms: Iterable[PauliString], n: int | None = None) -> "PauliSum":
        terms = tuple(terms)
        if n is None:
            if not terms:
                raise ValidationError("empty PauliSum needs an explicit qubit count")
            n = terms[0].n
        return cls(terms, n)

    def collected(self) -> dict[str, complex]:
        """Coefficients keyed by letters, duplicates summed."""
        out: dict[str, complex] = {}
        for t in self.terms:
            out[t.letters] = out.get(t.letters, 0.0) + complex(t.coefficient)
        return out

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= tol for c in self.collected().values())

    def max_abs_coefficient(self) -> float:
        vals = [abs(c) for c in self.collected().values()]
        return max(vals) if vals else 0.0


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state on q qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        num_qubits(amps.size)
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) > 1e-12:
            raise ValidationError(f"state norm {nrm} is not 1 within 1e-12")

    @property
    def q(self) -> int:
        return num_qubits(self.amplitudes.size)


@dataclass(frozen=True)
class DensityMatrix:
    """Trace-one Hermitian positive-semidefinite operator on q qubits."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValidationError("density matrix must be square")
        num_qubits(mat.shape[0])
        if np.max(np.abs(mat - mat.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(mat))):
            raise ValidationError("density matrix is not Hermitian within 1e-12")
        tr = np.trace(mat)
        if abs(tr - 1.0) > 1e-12:
            raise ValidationError(f"density matrix trace {tr} is not 1 within 1e-12")
        if np.linalg.eigvalsh(mat).min() < -1e-10:
            raise ValidationError("density matrix has an eigenvalue below -1e-10")

    @property
    def q(self) -> int:
        return num_qubits(self.matrix.shape[0])


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in descending order with matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        evals = np.asarray(self.eigenvalues, dtype=float)
        evecs = np.asarray(self.eigenvectors, dtype=complex)
        object.__setattr__(self, "eigenvalues", evals)
        object.__setattr__(self, "eigenvectors", evecs)
        if np.any(np.diff(evals) > 0):
            raise ValidationError("eigenvalues must be sorted descending")


MatrixLike = Union[PauliSum, np.ndarray]
StateLike = Union[StateVector, np.ndarray]
RhoLike = Union[DensityMatrix, np.ndarray]


def as_amplitudes(state: StateLike) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.amplitudes
    return np.asarray(state, dtype=complex).reshape(-1)


def as_density(rho: RhoLike) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return np.asarray(rho, dtype=complex)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def pauli_sum_to_matrix(h: PauliSum, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Dense matrix of a Pauli sum (sum of coefficient-weighted Kronecker products)."""
    _check_cap(h.n, dense_cap)
    dim = 2**h.n
    out = np.zeros((dim, dim), dtype=complex)
    for letters, coeff in h.collected().items():
        out += PauliString(coeff, letters).matrix()
    return out


def _as_matrix(h: MatrixLike, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    if isinstance(h, PauliSum):
        return pauli_sum_to_matrix(h, dense_cap)
    return np.asarray(h, dtype=complex)


def hermitian_eig(h: MatrixLike, tol: float = 1e-10) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    The reconstruction V diag(lam) V^dag matches the input to LAPACK
    accuracy; callers relying on it get ~1e-10 in max norm at the dense cap.
    """
    mat = _as_matrix(h)
    scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
    if np.max(np.abs(mat - mat.conj().T)) > tol * scale:
        raise ValidationError("input matrix is not Hermitian")
    evals, evecs = np.linalg.eigh(mat)
    return Spectrum(evals[::-1].copy(), evecs[:, ::-1].copy())


def propagator(h: MatrixLike, t: float, spectrum: Spectrum | None = None) -> np.ndarray:
    """Unitary exp(-i h t) via Hermitian eigendecomposition.

    Passing a precomputed ``spectrum`` of h skips the eigensolve; useful in
    loops over many times.
    """
    if spectrum is None:
        spectrum = hermitian_eig(h)
    phases = np.exp(-1j * spectrum.eigenvalues * t)
    v = spectrum.eigenvectors
    return (v * phases) @ v.conj().T


def partial_trace(state: Union[StateLike, RhoLike], q_first: int, keep: str = "first") -> DensityMatrix:
    """Reduce a pure state or density matrix over a first/second bipartition.

    The first block holds the most significant ``q_first`` qubits (the clock
    block in history states); ``keep`` selects which reduction survives.
    """
    if keep not in ("first", "second"):
        raise ValidationError("keep must be 'first' or 'second'")
    arr = np.asarray(state.amplitudes if isinstance(state, StateVector)
                     else state.matrix if isinstance(state, DensityMatrix)
                     else state, dtype=complex)
    if arr.ndim == 1:
        q = num_qubits(arr.size)
        if not 0 < q_first < q:
            raise ValidationError(f"split {q_first}|{q - q_first} is inconsistent with {q} qubits")
        m = arr.reshape(2**q_first, 2 ** (q - q_first))
        rho = m @ m.conj().T if keep == "first" else m.T @ m.conj()
    else:
        q = num_qubits(arr.shape[0])
        if not 0 < q_first < q:
            raise ValidationError(f"split {q_first}|{q - q_first} is inconsistent with {q} qubits")
        da, db = 2**q_first, 2 ** (q - q_first)
        t = arr.reshape(da, db, da, db)
        rho = np.einsum("ijkj->ik", t) if keep == "first" else np.einsum("ijil->jl", t)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho)


def purity(rho: RhoLike) -> float:
    """Tr[rho^2]; the linear entropy is 1 minus this."""
    mat = as_density(rho)
    return float(np.real(np.einsum("ij,ji->", mat, mat)))


def _axis(bit: int, q: int) -> int:
    return q - 1 - bit


def apply_unitary(state: StateLike, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply a 2^k x 2^k unitary to the given target bit positions.

    ``targets[0]`` is the most significant bit of the unitary's index.
    """
    amps = as_amplitudes(state)
    q = num_qubits(amps.size)
    targets = list(targets)
    if len(set(targets)) != len(targets) or any(not 0 <= b < q for b in targets):
        raise WiringError(f"bad target wires {targets} for {q} qubits")
    k = len(targets)
    src = [_axis(b, q) for b in targets]
    psi = np.moveaxis(amps.reshape((2,) * q), src, range(k))
    shape = psi.shape
    psi = np.asarray(u, dtype=complex) @ psi.reshape(2**k, -1)
    psi = np.moveaxis(psi.reshape(shape), range(k), src)
    return np.ascontiguousarray(psi).reshape(-1)


def apply_controlled(state: StateLike, control_qubit: int, target_unitary: np.ndarray,
                     target_block: Sequence[int]) -> np.ndarray:
    """Apply ``target_unitary`` on the control qubit's |1> branch.

    Amplitudes with the control bit 0 are unchanged.  The control wire must
    lie outside the target block.
    """
    amps = as_amplitudes(state)
    q = num_qubits(amps.size)
    targets = list(target_block)
    if control_qubit in targets:
        raise WiringError(f"control wire {control_qubit} overlaps target block {targets}")
    if not 0 <= control_qubit < q:
        raise WiringError(f"control wire {control_qubit} outside register of {q} qubits")
    if len(set(targets)) != len(targets) or any(not 0 <= b < q for b in targets):
        raise WiringError(f"bad target wires {targets} for {q} qubits")
    k = len(targets)
    axes = [_axis(control_qubit, q)] + [_axis(b, q) for b in targets]
    psi = np.moveaxis(amps.reshape((2,) * q), axes, range(k + 1)).copy()
    block = psi[1].reshape(2**k, -1)
    psi[1] = (np.asarray(target_unitary, dtype=complex) @ block).reshape(psi[1].shape)
    psi = np.moveaxis(psi, range(k + 1), axes)
    return np.ascontiguousarray(psi).reshape(-1)


# ---------------------------------------------------------------------------
# Pauli word algebra (used by vhd's Lie-closure machinery)
# ---------------------------------------------------------------------------

def pauli_word_product(a: str, b: str) -> tuple[complex, str]:
    """Letterwise product a*b = phase * word, phase in {1, -1, 1j, -1j}."""
    if len(a) != len(b):
        raise ValidationError("cannot multiply Pauli words of different length")
    phase = 1 + 0j
    out = []
    for ca, cb in zip(a, b):
        ph, letter = _LETTER_PRODUCT[(ca, cb)]
        phase *= ph
        out.append(letter)
    return phase, "".join(out)


def pauli_words_commute(a: str, b: str) -> bool:
    """True when the Hermitian Pauli words a and b commute."""
    anti = sum(1 for ca, cb in zip(a, b) if ca != "I" and cb != "I" and ca != cb)
    return anti % 2 == 0


# ---------------------------------------------------------------------------
# Gate-logging statevector circuit
# ---------------------------------------------------------------------------

_H_GATE = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)
_SDG_GATE = np.array([[1.0, 0.0], [0.0, -1.0j]], dtype=complex)
_CX_GATE = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


@dataclass(frozen=True)
class GateRecord:
    """One logged gate: a name, an audit class, and the wires it touched."""

    name: str
    kind: str  # "1q" | "2q" | "controlled-1q" | "controlled-multi"
    wires: tuple[int, ...]


class Circuit:
    """Statevector simulator that records a gate log for depth audits."""

    def __init__(self, q: int, dense_cap: int = DEFAULT_DENSE_CAP):
        _check_cap(q, dense_cap)
        self.q = q
        self.state = np.zeros(2**q, dtype=complex)
        self.state[0] = 1.0
        self.log: list[GateRecord] = []

    def set_state(self, amplitudes: StateLike) -> None:
        amps = as_amplitudes(amplitudes)
        if amps.size != self.state.size:
            raise ValidationError("state size does not match the register")
        self.state = amps.astype(complex).copy()

    def prepare(self, amplitudes: StateLike, targets: Sequence[int], name: str = "prep") -> None:
        """Load a sub-register state via a logged multi-qubit 'gate'."""
        amps = as_amplitudes(amplitudes)
        k = num_qubits(amps.size)
        # A preparation is any unitary whose first column is the state.
        basis = np.eye(2**k, dtype=complex)
        basis[:, 0] = amps
        u, _ = np.linalg.qr(basis)
        u[:, 0] = amps  # Householder QR fixes the leading column only up to phase
        self.u(u, targets, name=name)

    def h(self, qubit: int) -> None:
        self.state = apply_unitary(self.state, _H_GATE, [qubit])
        self.log.append(GateRecord("h", "1q", (qubit,)))

    def sdg(self, qubit: int) -> None:
        self.state = apply_unitary(self.state, _SDG_GATE, [qubit])
        self.log.append(GateRecord("sdg", "1q", (qubit,)))

    def cx(self, control: int, target: int) -> None:
        self.state = apply_controlled(self.state, control, PAULI_MATRICES["X"], [target])
        self.log.append(GateRecord("cx", "2q", (control, target)))

    def u(self, mat: np.ndarray, targets: Sequence[int], name: str = "u") -> None:
        self.state = apply_unitary(self.state, mat, targets)
        kind = "1q" if len(list(targets)) == 1 else "2q" if len(list(targets)) == 2 else "multi"
        self.log.append(GateRecord(name, kind, tuple(targets)))

    def cu(self, control: int, mat: np.ndarray, targets: Sequence[int], name: str = "cu") -> None:
        self.state = apply_controlled(self.state, control, mat, targets)
        kind = "controlled-1q" if len(list(targets)) == 1 else "controlled-multi"
        self.log.append(GateRecord(name, kind, (control, *targets)))

    def cphase(self, control: int, target: int, angle: float) -> None:
        mat = np.diag([1.0, np.exp(1j * angle)]).astype(complex)
        self.state = apply_controlled(self.state, control, mat, [target])
        self.log.append(GateRecord("cphase", "controlled-1q", (control, target)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.state) ** 2
