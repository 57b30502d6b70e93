"""Large-n free-fermion engine for the quasiperiodic XX chain.

The Jordan-Wigner map reduces single-excitation dynamics of the chain to
an n x n hopping-matrix problem: survival amplitudes become
psi^dag exp(-i M t) psi, the exact infinite-time echo average becomes a
quartic sum over eigenvector overlaps, and the history-state purity
collapses to a single weighted sum over echo values.  This is the path
that reproduces the n = 100..200 sweeps.

The fermionic diagonal is lambda * cos(2 pi alpha j); the spin builder in
`hamiltonians` carries lambda/4 (Z_j + 2), so its single-excitation block
equals this hopping matrix at half the field plus an identity shift.
Cross-module tests reconcile the two through that explicit factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hamiltonians import AubryAndreParams, cluster_indices
from .qcore import ValidationError


@dataclass(eq=False)
class HoppingMatrix:
    """n x n Hermitian single-particle matrix with a cached eigendecomposition."""

    matrix: np.ndarray
    boundary: str = "open"
    parity: int = -1
    _eig: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if np.max(np.abs(mat - mat.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(mat))):
            raise ValidationError("hopping matrix must be Hermitian")
        self.matrix = mat

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues ascending, eigenvector columns), computed once."""
        if self._eig is None:
            self._eig = np.linalg.eigh(self.matrix)
        return self._eig

    def cluster_tol(self) -> float:
        return 1e-10 * max(1.0, float(np.max(np.abs(self.matrix))))


@dataclass(frozen=True)
class SingleParticleState:
    """Unit-norm amplitude vector over chain sites."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValidationError("single-particle state must be unit norm")

    @property
    def n(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class OneBodyObservable:
    """Hermitian matrix of a one-body operator sum_ij M_ij c_i^dag c_j."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if np.max(np.abs(mat - mat.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(mat))):
            raise ValidationError("one-body observable must be Hermitian")
        object.__setattr__(self, "matrix", mat)


def build_hopping_matrix(p: AubryAndreParams, parity: int = -1) -> HoppingMatrix:
    """Hopping matrix: J/2 on bonds, lambda cos(2 pi alpha j) on the diagonal.

    For periodic boundaries the wrap-around bond picks up a minus sign in
    the even-parity sector (parity = +1); single-particle states live in
    parity = -1 where the bond is unchanged.
    """
    if parity not in (-1, 1):
        raise ValidationError("parity sector must be +1 or -1")
    n = p.n
    mat = np.zeros((n, n), dtype=complex)
    hop = p.J / 2.0
    for j in range(n - 1):
        mat[j, j + 1] = mat[j + 1, j] = hop
    if p.boundary == "periodic":
        sign = -1.0 if parity == 1 else 1.0
        mat[0, n - 1] = mat[n - 1, 0] = sign * hop
    for j in range(1, n + 1):
        mat[j - 1, j - 1] = p.lam * math.cos(2.0 * math.pi * p.alpha_aa * j)
    return HoppingMatrix(matrix=mat, boundary=p.boundary, parity=parity)


def site_superposition(n: int, sites: list[int],
                       weights: list[complex] | None = None) -> SingleParticleState:
    """Single excitation spread over the given 1-based sites (equal weights by default)."""
    amps = np.zeros(n, dtype=complex)
    if weights is None:
        weights = [1.0] * len(sites)
    for s, w in zip(sites, weights):
        if not 1 <= s <= n:
            raise ValidationError(f"site {s} outside 1..{n}")
        amps[s - 1] += w
    return SingleParticleState(amps / np.linalg.norm(amps))


def _weights(m: HoppingMatrix, psi: SingleParticleState) -> np.ndarray:
    evals, evecs = m.eig()
    return np.abs(evecs.conj().T @ psi.amplitudes) ** 2


def survival_amplitudes(m: HoppingMatrix, psi: SingleParticleState,
                        ts: np.ndarray) -> np.ndarray:
    """psi^dag exp(-i M t) psi over an array of times."""
    evals, _ = m.eig()
    w = _weights(m, psi)
    return np.exp(-1j * np.outer(np.asarray(ts, dtype=float), evals)) @ w


def loschmidt_t(m: HoppingMatrix, psi: SingleParticleState, t: float) -> float:
    """Echo L(t) = |psi^dag exp(-i M t) psi|^2."""
    return float(np.abs(survival_amplitudes(m, psi, np.array([t]))[0]) ** 2)


def loschmidt_curve(m: HoppingMatrix, psi: SingleParticleState,
                    ts: np.ndarray) -> np.ndarray:
    return np.abs(survival_amplitudes(m, psi, ts)) ** 2


def loschmidt_bar(m: HoppingMatrix, psi: SingleParticleState) -> float:
    """Exact infinite-time echo average: sum_k |<k|psi>|^4 over distinct levels."""
    evals, _ = m.eig()
    w = _weights(m, psi)
    total = 0.0
    for g in cluster_indices(evals, m.cluster_tol()):
        total += float(w[g].sum()) ** 2
    return total


def loschmidt_tilde(m: HoppingMatrix, psi: SingleParticleState, N: int,
                    epsilon: float) -> float:
    """N-point discrete echo average (1/N) sum_t L(eps t)."""
    ts = np.arange(N) * epsilon
    return float(np.mean(loschmidt_curve(m, psi, ts)))


def purity_single_sum(m: HoppingMatrix, psi: SingleParticleState, N: int,
                      epsilon: float) -> float:
    """History-state purity Tr[rho_S^2] = (2/N^2) sum_t (N-t) L(eps t) - 1/N.

    The sum runs t = 0..N-1 with L(0) = 1; valid for any time-independent
    generator because only time differences enter the double sum.
    """
    ts = np.arange(N) * epsilon
    curve = loschmidt_curve(m, psi, ts)
    return float(2.0 / N**2 * np.sum((N - np.arange(N)) * curve) - 1.0 / N)


@dataclass(frozen=True)
class FluctuationSummary:
    sigma2: float
    delta2: float
    lbar: float


def observable_fluctuations(m: HoppingMatrix, psi: SingleParticleState,
                            obs: OneBodyObservable,
                            weight_tol: float = 1e-12) -> FluctuationSummary:
    """Exact temporal variance of a one-body observable on a single-particle state.

    sigma^2 = sum_{k != k'} |rho_kk'|^2 |O_kk'|^2 with |rho_kk'|^2 the product
    of eigenspace weights; Delta^2 is the squared spectral range of the
    observable restricted to the overlapped eigenvectors.
    """
    evals, evecs = m.eig()
    coeffs = evecs.conj().T @ psi.amplitudes
    basis = []
    weights = []
    for g in cluster_indices(evals, m.cluster_tol()):
        comp = evecs[:, g] @ coeffs[g]
        w = float(np.vdot(comp, comp).real)
        if w > weight_tol:
            basis.append(comp / math.sqrt(w))
            weights.append(w)
    b = np.array(basis).T
    w = np.array(weights)
    osub = b.conj().T @ obs.matrix @ b
    pairs = np.outer(w, w) * np.abs(osub) ** 2
    sigma2 = float(pairs.sum() - np.trace(pairs).real)
    evs = np.linalg.eigvalsh(osub)
    return FluctuationSummary(sigma2=sigma2, delta2=float((evs[-1] - evs[0]) ** 2),
                              lbar=float(np.sum(w**2)))


def hopping_pair_observable(n: int, i: int, j: int) -> OneBodyObservable:
    """c_i^dag c_j + h.c. as a one-body matrix (1-based sites)."""
    mat = np.zeros((n, n), dtype=complex)
    mat[i - 1, j - 1] = mat[j - 1, i - 1] = 1.0
    return OneBodyObservable(mat)


def embed_single_particle_dense(psi: SingleParticleState) -> np.ndarray:
    """Single-excitation state in the 2^n spin basis.

    Occupation maps to Z = +1 (Z = 2 c^dag c - 1), so the vacuum is the
    all-ones bitstring and exciting site j clears bit j-1.
    """
    n = psi.n
    out = np.zeros(2**n, dtype=complex)
    vac = 2**n - 1
    for j in range(1, n + 1):
        out[vac - 2 ** (j - 1)] = psi.amplitudes[j - 1]
    return out
