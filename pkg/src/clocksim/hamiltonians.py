"""Model builders and exact-diagonalization helpers.

Builds the non-uniform XX (Aubry-Andre) chain and general XY chains as
Pauli sums, and provides the dephased (infinite-time averaged) state,
distinct-eigenvalue counting with period detection, and eigenbasis
weights of an initial state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .qcore import (
    DEFAULT_DENSE_CAP,
    DensityMatrix,
    MatrixLike,
    PauliString,
    PauliSum,
    Spectrum,
    StateLike,
    ValidationError,
    _as_matrix,
    as_amplitudes,
    hermitian_eig,
)

GOLDEN_FREQUENCY = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AubryAndreParams:
    """Non-uniform XX chain: hopping J, quasiperiodic field lambda*cos(2*pi*alpha*j)."""

    n: int
    J: float
    lam: float
    alpha_aa: float = GOLDEN_FREQUENCY
    boundary: str = "periodic"

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("need at least 2 sites")
        if not (np.isfinite(self.J) and np.isfinite(self.lam)):
            raise ValidationError("couplings must be finite")
        if not 0.0 < self.alpha_aa < 1.0:
            raise ValidationError("alpha_aa must lie in (0, 1)")
        if self.boundary not in ("periodic", "open"):
            raise ValidationError("boundary must be 'periodic' or 'open'")
        if self.boundary == "periodic" and self.n == 2:
            # The wrap-around bond would duplicate the single open bond with
            # an ambiguous coefficient.
            raise ValidationError("periodic boundary needs n >= 3; use an open chain for n=2")

    def field(self, j: int) -> float:
        """Quasiperiodic field value at 1-based site j."""
        return self.lam * math.cos(2.0 * math.pi * self.alpha_aa * j)


@dataclass(frozen=True)
class XYParams:
    """General open XY chain: per-bond XX/YY couplings and per-site Z fields."""

    n: int
    ax: tuple[float, ...]
    ay: tuple[float, ...]
    az: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "ax", tuple(float(x) for x in self.ax))
        object.__setattr__(self, "ay", tuple(float(x) for x in self.ay))
        object.__setattr__(self, "az", tuple(float(x) for x in self.az))
        if len(self.ax) != self.n - 1 or len(self.ay) != self.n - 1:
            raise ValidationError("bond coupling arrays must have length n-1")
        if len(self.az) != self.n:
            raise ValidationError("field array must have length n")


def _two_site_word(n: int, i: int, j: int, a: str, b: str) -> str:
    letters = ["I"] * n
    letters[i - 1] = a
    letters[j - 1] = b
    return "".join(letters)


def _one_site_word(n: int, i: int, a: str) -> str:
    letters = ["I"] * n
    letters[i - 1] = a
    return "".join(letters)


def build_aubry_andre_spin(p: AubryAndreParams) -> PauliSum:
    """Spin form of the chain: (J/4) sum (XX+YY) + (lambda/4) sum cos(2 pi a j)(Z_j + 2).

    The site index in the cosine is 1-based.  Zero-coefficient terms are
    dropped.
    """
    n = p.n
    terms: list[PauliString] = []
    bonds = [(j, j + 1) for j in range(1, n)]
    if p.boundary == "periodic":
        bonds.append((n, 1))
    jj = p.J / 4.0
    if jj != 0.0:
        for i, j in bonds:
            terms.append(PauliString(jj, _two_site_word(n, i, j, "X", "X")))
            terms.append(PauliString(jj, _two_site_word(n, i, j, "Y", "Y")))
    for j in range(1, n + 1):
        c = p.field(j) / 4.0
        if c != 0.0:
            terms.append(PauliString(c, _one_site_word(n, j, "Z")))
            terms.append(PauliString(2.0 * c, "I" * n))
    return PauliSum.from_terms(terms, n)


def build_xy_spin(p: XYParams) -> PauliSum:
    """Open XY chain: sum_j ax_j XX + ay_j YY + sum_j az_j Z_j."""
    n = p.n
    terms: list[PauliString] = []
    for j in range(1, n):
        if p.ax[j - 1] != 0.0:
            terms.append(PauliString(p.ax[j - 1], _two_site_word(n, j, j + 1, "X", "X")))
        if p.ay[j - 1] != 0.0:
            terms.append(PauliString(p.ay[j - 1], _two_site_word(n, j, j + 1, "Y", "Y")))
    for j in range(1, n + 1):
        if p.az[j - 1] != 0.0:
            terms.append(PauliString(p.az[j - 1], _one_site_word(n, j, "Z")))
    return PauliSum.from_terms(terms, n)


def aubry_andre_xy_params(n: int, J: float, lam: float,
                          alpha_aa: float = GOLDEN_FREQUENCY) -> XYParams:
    """Traceless open-chain XY form of the Aubry-Andre model.

    This is the diagonalization target used by the variational trainer: the
    +2 field shift of the spin form is dropped (a traceless diagonal ansatz
    cannot absorb it) and the chain is open so that the nearest-neighbour
    Cartan generators span the model.
    """
    a = J / 4.0
    az = tuple(lam / 4.0 * math.cos(2.0 * math.pi * alpha_aa * j) for j in range(1, n + 1))
    return XYParams(n=n, ax=(a,) * (n - 1), ay=(a,) * (n - 1), az=az)


# ---------------------------------------------------------------------------
# Exact-diagonalization helpers
# ---------------------------------------------------------------------------

def cluster_indices(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group sorted-by-value indices into clusters split at gaps above tol."""
    order = np.argsort(values)
    sorted_vals = values[order]
    groups: list[np.ndarray] = []
    start = 0
    for i in range(1, len(sorted_vals)):
        if sorted_vals[i] - sorted_vals[i - 1] > tol:
            groups.append(order[start:i])
            start = i
    groups.append(order[start:])
    return groups


def default_cluster_tol(mat: np.ndarray) -> float:
    return 1e-9 * max(1.0, float(np.max(np.abs(mat))))


def eigenspace_weights(spectrum: Spectrum, psi0: StateLike, tol: float
                       ) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Weights |c_k|^2 of psi0 on each distinct-eigenvalue cluster.

    Returns (energies, weights, clusters) where energies are the cluster
    means and weights sum to 1.  Degenerate blocks are handled by projector,
    so the result is independent of the eigenvector basis within a block.
    """
    psi = as_amplitudes(psi0)
    groups = cluster_indices(spectrum.eigenvalues, tol)
    coeffs = spectrum.eigenvectors.conj().T @ psi
    energies = np.array([spectrum.eigenvalues[g].mean() for g in groups])
    weights = np.array([float(np.sum(np.abs(coeffs[g]) ** 2)) for g in groups])
    return energies, weights, groups


def dephased_state(h: MatrixLike, psi0: StateLike, tol: float | None = None,
                   dense_cap: int = DEFAULT_DENSE_CAP) -> DensityMatrix:
    """Infinite-time average of |psi(t)><psi(t)|: coherences between distinct
    eigenvalues are erased, degenerate blocks kept via their projector."""
    mat = _as_matrix(h, dense_cap)
    if tol is None:
        tol = default_cluster_tol(mat)
    spec = hermitian_eig(mat)
    psi = as_amplitudes(psi0)
    coeffs = spec.eigenvectors.conj().T @ psi
    rho = np.zeros((mat.shape[0], mat.shape[0]), dtype=complex)
    for g in cluster_indices(spec.eigenvalues, tol):
        comp = spec.eigenvectors[:, g] @ coeffs[g]
        rho += np.outer(comp, comp.conj())
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho)


def dephased_purity(h: MatrixLike, psi0: StateLike, tol: float | None = None,
                    dense_cap: int = DEFAULT_DENSE_CAP) -> float:
    """Tr[rho_bar^2] = sum_k |c_k|^4, the exact infinite-time survival average."""
    mat = _as_matrix(h, dense_cap)
    if tol is None:
        tol = default_cluster_tol(mat)
    _, weights, _ = eigenspace_weights(hermitian_eig(mat), psi0, tol)
    return float(np.sum(weights**2))


def distinct_eigenvalue_count(h: MatrixLike, tol: float | None = None,
                              dense_cap: int = DEFAULT_DENSE_CAP,
                              max_denominator: int = 1024,
                              max_multiplier: int = 10**6) -> tuple[int, float | None]:
    """Count distinct eigenvalues and look for a recurrence period.

    Returns (M, tau) where tau satisfies exp(-i H tau) = phase * identity,
    found when every spectral gap is an integer multiple of a common base
    within tol.  Gap ratios are screened through bounded-denominator
    rational approximation, so incommensurate spectra return tau = None.
    """
    mat = _as_matrix(h, dense_cap)
    if tol is None:
        tol = default_cluster_tol(mat)
    spec = hermitian_eig(mat)
    groups = cluster_indices(spec.eigenvalues, tol)
    m = len(groups)
    energies = np.sort([spec.eigenvalues[g].mean() for g in groups])
    if m == 1:
        return m, None  # stationary spectrum, no nontrivial recurrence
    gaps = np.diff(energies)
    g0 = float(gaps.min())
    denominators = []
    for g in gaps:
        r = float(g) / g0
        frac = Fraction(r).limit_denominator(max_denominator)
        if abs(r - float(frac)) * g0 > tol:
            return m, None
        denominators.append(frac.denominator)
    lcm = 1
    for d in denominators:
        lcm = lcm * d // math.gcd(lcm, d)
        if lcm > max_multiplier:
            return m, None
    base = g0 / lcm
    multipliers = np.round(gaps / base)
    if np.any(np.abs(gaps - multipliers * base) > tol) or np.any(multipliers > max_multiplier):
        return m, None
    return m, 2.0 * math.pi / base
