"""Discrete history states and system-time entanglement.

A history state on m clock and n system qubits superposes N = 2^m evolved
snapshots, (1/sqrt(N)) sum_t |t> (x) U(eps t)|psi_0>.  This module builds
them (both by direct formula and by the Hadamard + controlled-power
circuit), conditions on clock values, reduces to either block, and checks
the equilibration statements tying the clock marginal to the dephased
state: majorization, the entanglement/Loschmidt bound, and the
temporal-fluctuation bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hamiltonians
from .qcore import (
    DEFAULT_DENSE_CAP,
    Circuit,
    DensityMatrix,
    MatrixLike,
    PauliSum,
    StateLike,
    StateVector,
    ValidationError,
    _as_matrix,
    _check_cap,
    as_amplitudes,
    hermitian_eig,
    partial_trace,
    pauli_sum_to_matrix,
    propagator,
    purity,
)


@dataclass(frozen=True)
class HistoryState:
    """Joint clock (x) system pure state with its time-grid metadata."""

    state: np.ndarray
    n: int
    m: int
    epsilon: float
    T: float

    def __post_init__(self):
        state = np.asarray(self.state, dtype=complex).reshape(-1)
        object.__setattr__(self, "state", state)
        if state.size != 2 ** (self.m + self.n):
            raise ValidationError("state length does not match m + n qubits")
        if abs(self.N * self.epsilon - self.T) > 1e-12 * max(1.0, abs(self.T)):
            raise ValidationError("time window T must equal N * epsilon")
        if abs(np.linalg.norm(state) - 1.0) > 1e-12:
            raise ValidationError("history state must be normalized")
        block_norms = np.linalg.norm(state.reshape(self.N, 2**self.n), axis=1)
        if np.max(np.abs(block_norms - 1.0 / math.sqrt(self.N))) > 1e-10:
            raise ValidationError("conditioning must yield a normalized state at every time")

    @property
    def N(self) -> int:
        return 2**self.m


@dataclass(frozen=True)
class MajorizationReport:
    """Descending spectra of rho_S and rho_bar plus the partial-sum verdict."""

    spectrum_rho_s: np.ndarray
    spectrum_rho_bar: np.ndarray
    holds: bool
    max_violation: float

    def __post_init__(self):
        for name in ("spectrum_rho_s", "spectrum_rho_bar"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if abs(arr.sum() - 1.0) > 1e-10:
                raise ValidationError(f"{name} must sum to 1")


@dataclass(frozen=True)
class FluctuationReport:
    """Exact temporal variance of an observable and its equilibration bounds."""

    sigma2: float
    delta2: float
    lbar: float
    purity_s: float

    @property
    def bound(self) -> float:
        """Delta^2 (1 - E_2) = Delta^2 Tr[rho_S^2]."""
        return self.delta2 * self.purity_s

    @property
    def bound_lbar(self) -> float:
        return self.delta2 * self.lbar


def _snapshots(h: MatrixLike, psi0: StateLike, N: int, epsilon: float,
               dense_cap: int) -> np.ndarray:
    """Rows t = 0..N-1 of U(eps t) psi0, via a single eigendecomposition."""
    mat = _as_matrix(h, dense_cap)
    spec = hermitian_eig(mat)
    c0 = spec.eigenvectors.conj().T @ as_amplitudes(psi0)
    ts = np.arange(N)
    phases = np.exp(-1j * np.outer(ts * epsilon, spec.eigenvalues))
    return (phases * c0) @ spec.eigenvectors.T


def build_history_state(h: MatrixLike, psi0: StateLike, m: int, epsilon: float,
                        dense_cap: int = DEFAULT_DENSE_CAP) -> HistoryState:
    """History state by the direct formula (the canonical path).

    Amplitudes equal (1/sqrt(N)) |t> (x) U(eps t)|psi_0> for t = 0..N-1.
    """
    mat = _as_matrix(h, dense_cap)
    n = int(round(math.log2(mat.shape[0])))
    _check_cap(m + n, dense_cap)
    N = 2**m
    snaps = _snapshots(mat, psi0, N, epsilon, dense_cap)
    state = snaps.reshape(-1) / math.sqrt(N)
    return HistoryState(state=state, n=n, m=m, epsilon=float(epsilon), T=float(N * epsilon))


def history_circuit(h: MatrixLike, psi0: StateLike, m: int, epsilon: float,
                    dense_cap: int = DEFAULT_DENSE_CAP) -> Circuit:
    """Phase-estimation-like preparation circuit: Hadamards on the clocks,
    then one controlled U(eps 2^(j-1)) per clock qubit j."""
    mat = _as_matrix(h, dense_cap)
    n = int(round(math.log2(mat.shape[0])))
    q = m + n
    circ = Circuit(q, dense_cap)
    init = np.zeros(2**q, dtype=complex)
    init[: 2**n] = as_amplitudes(psi0)
    circ.set_state(init)
    spec = hermitian_eig(mat)
    system_targets = list(range(n - 1, -1, -1))
    for j in range(1, m + 1):
        circ.h(n + j - 1)
    for j in range(1, m + 1):
        u = propagator(mat, epsilon * 2 ** (j - 1), spec)
        circ.cu(n + j - 1, u, system_targets, name=f"c-U(eps*2^{j - 1})")
    return circ


def build_history_state_circuit(h: MatrixLike, psi0: StateLike, m: int, epsilon: float,
                                dense_cap: int = DEFAULT_DENSE_CAP) -> HistoryState:
    """History state obtained by running the preparation circuit."""
    mat = _as_matrix(h, dense_cap)
    n = int(round(math.log2(mat.shape[0])))
    circ = history_circuit(mat, psi0, m, epsilon, dense_cap)
    return HistoryState(state=circ.state, n=n, m=m, epsilon=float(epsilon),
                        T=float(2**m * epsilon))


def condition_on_time(psi: HistoryState, t: int) -> StateVector:
    """Normalized <t|Psi>; equals U(eps t)|psi_0> up to a global phase."""
    if not 0 <= t < psi.N:
        raise ValidationError(f"time index {t} outside 0..{psi.N - 1}")
    block = psi.state[t * 2**psi.n: (t + 1) * 2**psi.n]
    return StateVector(block / np.linalg.norm(block))


def reduced_states(psi: HistoryState) -> tuple[DensityMatrix, DensityMatrix]:
    """(rho_T, rho_S): clock and system reductions of the history state."""
    rho_t = partial_trace(psi.state, psi.m, keep="first")
    rho_s = partial_trace(psi.state, psi.m, keep="second")
    return rho_t, rho_s


def linear_entropy(psi: HistoryState) -> float:
    """E_2 = 1 - Tr[rho_T^2] = 1 - Tr[rho_S^2]."""
    rho_t, _ = reduced_states(psi)
    return 1.0 - purity(rho_t)


def delta_coefficients(energies: np.ndarray, N: int, epsilon: float) -> np.ndarray:
    """Dephasing coefficients Delta_kk' = (1/N) sum_t exp(-i(E_k - E_k') t eps).

    Evaluated in the closed Dirichlet-kernel form
    exp(-i theta (N-1)/2) sin(N theta / 2) / (N sin(theta / 2)) with
    theta = (E_k - E_k') eps, which is stable away from resonances; the
    removable singularity theta = 0 (mod 2 pi) is set to 1 explicitly.
    """
    e = np.asarray(energies, dtype=float)
    theta = (e[:, None] - e[None, :]) * epsilon
    half = 0.5 * theta
    s = np.sin(half)
    resonant = np.abs(s) < 1e-15
    safe = np.where(resonant, 1.0, s)
    out = np.exp(-1j * half * (N - 1)) * np.sin(N * half) / (N * safe)
    out[resonant] = 1.0
    return out


def offdiagonal_delta_weight(h: MatrixLike, N: int, epsilon: float,
                             cluster_tol: float | None = None,
                             dense_cap: int = DEFAULT_DENSE_CAP) -> float:
    """Sum of |Delta_kk'|^2 over distinct-eigenvalue pairs k != k'.

    Decays toward zero as the window grows on spectra free of commensurate
    gaps; doubling N at fixed eps never increases any single term.
    """
    mat = _as_matrix(h, dense_cap)
    if cluster_tol is None:
        cluster_tol = hamiltonians.default_cluster_tol(mat)
    spec = hermitian_eig(mat)
    groups = hamiltonians.cluster_indices(spec.eigenvalues, cluster_tol)
    energies = np.array([spec.eigenvalues[g].mean() for g in groups])
    delta = delta_coefficients(energies, N, epsilon)
    off = np.abs(delta) ** 2
    np.fill_diagonal(off, 0.0)
    return float(off.sum())


def check_majorization(psi: HistoryState, h: MatrixLike, tol: float = 1e-12,
                       dense_cap: int = DEFAULT_DENSE_CAP) -> MajorizationReport:
    """Verify rho_bar majorized by rho_S via descending partial sums."""
    _, rho_s = reduced_states(psi)
    spec_s = np.sort(np.linalg.eigvalsh(rho_s.matrix))[::-1]
    psi0 = condition_on_time(psi, 0)
    mat = _as_matrix(h, dense_cap)
    _, weights, _ = hamiltonians.eigenspace_weights(
        hermitian_eig(mat), psi0, hamiltonians.default_cluster_tol(mat))
    spec_bar = np.zeros_like(spec_s)
    w = np.sort(weights)[::-1]
    spec_bar[: w.size] = w
    violations = np.cumsum(spec_bar) - np.cumsum(spec_s)
    max_violation = float(np.max(violations))
    return MajorizationReport(spectrum_rho_s=spec_s, spectrum_rho_bar=spec_bar,
                              holds=max_violation <= tol, max_violation=max_violation)


def entanglement_loschmidt_bound(psi: HistoryState, h: MatrixLike, psi0: StateLike,
                                 dense_cap: int = DEFAULT_DENSE_CAP
                                 ) -> tuple[float, float, float]:
    """(E_2, L_bar, slack): the entanglement never exceeds 1 - L_bar."""
    e2 = linear_entropy(psi)
    lbar = hamiltonians.dephased_purity(h, psi0, dense_cap=dense_cap)
    return e2, lbar, (1.0 - lbar) - e2


def fluctuation_bound(psi: HistoryState, h: MatrixLike, psi0: StateLike, obs: PauliSum,
                      dense_cap: int = DEFAULT_DENSE_CAP,
                      weight_tol: float = 1e-12) -> FluctuationReport:
    """Exact temporal variance of <obs(t)> against its entanglement bound.

    sigma^2 = sum_{k != k'} |rho_kk'|^2 |O_kk'|^2 over distinct-eigenvalue
    clusters; Delta^2 is the squared spectral range of obs restricted to the
    eigenstates psi_0 overlaps.
    """
    mat = _as_matrix(h, dense_cap)
    spec = hermitian_eig(mat)
    tol = hamiltonians.default_cluster_tol(mat)
    groups = hamiltonians.cluster_indices(spec.eigenvalues, tol)
    amp0 = as_amplitudes(psi0)
    coeffs = spec.eigenvectors.conj().T @ amp0
    basis = []
    weights = []
    for g in groups:
        comp = spec.eigenvectors[:, g] @ coeffs[g]
        w = float(np.vdot(comp, comp).real)
        if w > weight_tol:
            basis.append(comp / math.sqrt(w))
            weights.append(w)
    b = np.array(basis).T
    w = np.array(weights)
    omat = pauli_sum_to_matrix(obs, dense_cap) if isinstance(obs, PauliSum) else np.asarray(obs)
    osub = b.conj().T @ omat @ b
    pairs = np.outer(w, w) * np.abs(osub) ** 2
    sigma2 = float(pairs.sum() - np.trace(pairs).real)
    evs = np.linalg.eigvalsh(osub)
    delta2 = float((evs[-1] - evs[0]) ** 2)
    lbar = float(np.sum(w**2))
    _, rho_s = reduced_states(psi)
    return FluctuationReport(sigma2=sigma2, delta2=delta2, lbar=lbar,
                             purity_s=purity(rho_s))
