"""Variational Hamiltonian diagonalization with the local Cartan ansatz.

The diagonalizing unitary is a brickwork of two-qubit XY/YX rotations,
W = prod_layers prod_j exp(i a XY_j) prod_j exp(i a YX_j), and the diagonal
model is D(beta) = sum_mu beta_mu Z_mu.  Training minimizes the normalized
Hilbert-Schmidt distance ||H - W D W^dag||^2 / 2^n with two ADAM instances
(one for the angles, one for the diagonal coefficients).

Cost and gradient are evaluated exactly in the Pauli coefficient basis:
conjugation by the ansatz acts on the Lie-closure span of the generators
as a sequence of planar rotations, so one training step costs O(gates *
dim) instead of dense matrix algebra.  The dense route survives in
`apply_ansatz_W` and the test oracles.  The angle gradient equals the
two-point rule [C(a + pi/4) - C(a - pi/4)] per untied parameter (the
generators square to the identity), evaluated here in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .histstate import HistoryState
from .qcore import (
    DEFAULT_DENSE_CAP,
    Circuit,
    PAULI_MATRICES,
    PauliString,
    PauliSum,
    StateLike,
    ValidationError,
    _check_cap,
    as_amplitudes,
    pauli_sum_to_matrix,
    pauli_word_product,
    pauli_words_commute,
)


class ClosureTruncated(RuntimeError):
    """Lie closure exceeded the requested dimension cap."""

    def __init__(self, reached: int, max_dim: int):
        super().__init__(f"Lie closure exceeded max_dim={max_dim} (reached {reached})")
        self.reached = reached
        self.max_dim = max_dim


class ThresholdViolation(ValidationError):
    """Trained cost too large for the requested construction."""


# ---------------------------------------------------------------------------
# Ansatz and configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CartanAnsatz:
    """Brick-wall rotation angles plus diagonal coefficients.

    ``alpha`` holds 2(n-1)L angles, one per gate in application order:
    layer-major, odd bonds before even bonds, and on each bond the XY gate
    followed by the YX gate (the two commute, forming one brick).  With
    ``tied=True`` a brick's two gates share an angle and ``alpha`` has
    (n-1)L entries.
    """

    n: int
    L: int
    alpha: np.ndarray
    beta: np.ndarray
    tied: bool = False

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        expect = self.num_alpha(self.n, self.L, self.tied)
        if alpha.size != expect:
            raise ValidationError(f"alpha must have {expect} entries, got {alpha.size}")
        if beta.size != self.n:
            raise ValidationError(f"beta must have {self.n} entries, got {beta.size}")

    @staticmethod
    def num_alpha(n: int, L: int, tied: bool = False) -> int:
        per_layer = (n - 1) if tied else 2 * (n - 1)
        return per_layer * L


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; learning rates are the ADAM *initial* rates.

    A constant rate leaves ADAM dithering around the minimum several orders
    above machine precision, so each run halves its rate whenever its best
    loss has not halved within ``plateau_patience`` iterations.
    """

    lr_alpha: float = 0.1
    lr_beta: float = 0.1
    max_iters: int = 100_000
    stop_loss: float = 1e-14
    restarts: int = 10
    seed: int = 0
    tied: bool = False
    plateau_patience: int = 1500
    min_lr: float = 1e-10
    polish_iters: int = 60

    def __post_init__(self):
        if self.lr_alpha <= 0 or self.lr_beta <= 0:
            raise ValidationError("learning rates must be positive")
        if self.stop_loss <= 0:
            raise ValidationError("stop_loss must be positive")
        if self.restarts < 1 or self.max_iters < 1:
            raise ValidationError("need at least one restart and one iteration")
        if self.plateau_patience < 1:
            raise ValidationError("plateau_patience must be positive")


@dataclass(frozen=True)
class TrainReport:
    """Per-run loss traces and the best parameters found."""

    loss_history: tuple[np.ndarray, ...]
    best_loss: float
    best_params: CartanAnsatz
    converged_runs: int
    stop_loss: float

    def __post_init__(self):
        if not self.loss_history or any(h.size == 0 for h in self.loss_history):
            raise ValidationError("every run must record at least one loss")
        mins = [float(np.min(h)) for h in self.loss_history]
        if abs(self.best_loss - min(mins)) > 1e-30 + 1e-9 * abs(self.best_loss):
            raise ValidationError("best_loss must be the minimum over runs")

    @property
    def run_minima(self) -> np.ndarray:
        return np.array([float(np.min(h)) for h in self.loss_history])


# ---------------------------------------------------------------------------
# Pauli-word Lie closure
# ---------------------------------------------------------------------------

def _word_of(g) -> str:
    return g.letters if isinstance(g, PauliString) else str(g)


def lie_closure_words(generators: Iterable, max_dim: int = 4096) -> list[str]:
    """Basis words of the real Lie closure of i * (Pauli generators).

    Nested commutators of Pauli words stay (up to phase) in the Pauli basis,
    so breadth-first commutator expansion over words is exact.  Raises
    `ClosureTruncated` when the span grows past ``max_dim``.
    """
    seen: dict[str, None] = {}
    frontier: list[str] = []
    for g in generators:
        w = _word_of(g)
        if w not in seen:
            seen[w] = None
            frontier.append(w)
    while frontier:
        fresh: list[str] = []
        for a in frontier:
            for b in list(seen):
                if pauli_words_commute(a, b):
                    continue
                _, c = pauli_word_product(a, b)
                if c not in seen:
                    seen[c] = None
                    fresh.append(c)
                    if len(seen) > max_dim:
                        raise ClosureTruncated(len(seen), max_dim)
        frontier = fresh
    return list(seen)


def lie_closure_dim(generators: Iterable, max_dim: int = 4096) -> int:
    """Dimension of the Lie closure of the given Pauli-string generators."""
    return len(lie_closure_words(generators, max_dim))


def cartan_generators(n: int) -> list[str]:
    """The 2(n-1) local generators: XY and YX on each bond, XY bonds first."""
    words = []
    for a, b in (("X", "Y"), ("Y", "X")):
        for j in range(1, n):
            letters = ["I"] * n
            letters[j - 1] = a
            letters[j] = b
            words.append("".join(letters))
    return words


def brick_bond_order(n: int) -> list[int]:
    """1-based bond order of one brick-wall layer: odd bonds, then even."""
    return [j for j in range(1, n) if j % 2 == 1] + [j for j in range(1, n) if j % 2 == 0]


def _z_words(n: int) -> list[str]:
    return ["".join("Z" if k == j else "I" for k in range(n)) for j in range(n)]


# ---------------------------------------------------------------------------
# Adjoint-representation engine
# ---------------------------------------------------------------------------

class _AdjointEngine:
    """Exact conjugation dynamics on the Pauli-coefficient vector.

    Basis: Lie closure of the ansatz generators together with the Z fields
    (so(2n), dimension n(2n-1)).  Each gate exp(i a P) rotates anticommuting
    basis words pairwise by angle 2a; commuting words are untouched.
    """

    def __init__(self, n: int):
        self.n = n
        gens = cartan_generators(n)
        self.basis = lie_closure_words(gens + _z_words(n), max_dim=4 * n * n + 4)
        self.dim = len(self.basis)
        self.index = {w: i for i, w in enumerate(self.basis)}
        self.z_idx = np.array([self.index[w] for w in _z_words(n)])
        self.gen_words = gens
        self.tables = [self._pair_table(g) for g in gens]

    def _pair_table(self, gen: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        active, partner, sign = [], [], []
        for i, w in enumerate(self.basis):
            if pauli_words_commute(gen, w):
                continue
            phase, prod = pauli_word_product(gen, w)
            s = 1j * phase
            if abs(s.imag) > 1e-12 or prod not in self.index:
                raise ValidationError("generator does not preserve the closure basis")
            active.append(i)
            partner.append(self.index[prod])
            sign.append(float(s.real))
        return np.array(active), np.array(partner), np.array(sign)

    def embed(self, h: PauliSum) -> tuple[np.ndarray, float]:
        """(coefficient vector on the basis, squared residual outside it).

        Normalization: ||A||_HS^2 / 2^n is the squared 2-norm of the full
        coefficient vector, so the residual is the out-of-span part of the
        cost.
        """
        if h.n != self.n:
            raise ValidationError("Hamiltonian qubit count does not match the engine")
        if not h.is_hermitian(1e-10):
            raise ValidationError("expected a Hermitian Pauli sum")
        vec = np.zeros(self.dim)
        resid = 0.0
        for word, coeff in h.collected().items():
            if word in self.index:
                vec[self.index[word]] += coeff.real
            else:
                resid += abs(coeff) ** 2
        return vec, float(resid)

    def gate_sequence(self, L: int, tied: bool) -> tuple[np.ndarray, np.ndarray]:
        """(generator id, parameter id) per gate, layer-major brick-wall order.

        Each layer visits odd bonds then even bonds; a bond contributes its
        XY gate then its YX gate (they commute, so the brick's internal order
        is immaterial).  Gates at exactly threshold depth fail to reach the
        group when applied sweep-by-sweep in bond order, so the brick order
        is structural, not cosmetic.
        """
        half = len(self.gen_words) // 2  # bonds
        bonds = brick_bond_order(self.n)
        layer_gens = []
        for j in bonds:
            layer_gens.extend([j - 1, half + j - 1])  # XY_j then YX_j
        gen_ids = np.tile(np.array(layer_gens), L)
        if tied:
            layer_params = np.repeat(np.arange(half), 2)
            param_ids = np.concatenate([l * half + layer_params for l in range(L)])
        else:
            param_ids = np.arange(2 * half * L)
        return gen_ids, param_ids

    def apply_gate(self, vec: np.ndarray, gen_id: int, theta: np.ndarray,
                   inverse: bool = False) -> None:
        """In-place planar rotation of the batched coefficient vectors.

        Gather form: the word w receives its partner's coefficient with the
        partner's sign, which is minus w's own sign (the pairing is an
        involution and the block must stay orthogonal).
        """
        ang = -2.0 * theta if inverse else 2.0 * theta
        self._rotate(vec, gen_id, np.cos(ang)[:, None], np.sin(ang)[:, None])

    def _rotate(self, vec, gen_id, c, s) -> None:
        active, partner, sign = self.tables[gen_id]
        va = vec[:, active]
        vp = vec[:, partner]
        vec[:, active] = c * va - s * (sign * vp)

    def gate_derivative_dot(self, l_vec: np.ndarray, r_vec: np.ndarray, gen_id: int,
                            theta: np.ndarray) -> np.ndarray:
        """<l, d/d theta Ad_gate(r)> per batch row."""
        ang = 2.0 * theta
        return self._derivative_dot(l_vec, r_vec, gen_id,
                                    np.cos(ang)[:, None], np.sin(ang)[:, None])

    def _derivative_dot(self, l_vec, r_vec, gen_id, c, s) -> np.ndarray:
        active, partner, sign = self.tables[gen_id]
        ra = r_vec[:, active]
        rp = r_vec[:, partner]
        deriv = 2.0 * (-s * ra - c * (sign * rp))
        return np.einsum("rb,rb->r", l_vec[:, active], deriv)

    def cost_and_grad(self, h_vec: np.ndarray, resid, alphas: np.ndarray,
                      betas: np.ndarray, L: int, tied: bool
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Batched (loss, grad_alpha, grad_beta) over restart rows.

        ``h_vec`` may be one coefficient vector shared by every row or a
        per-row (runs, dim) stack; ``resid`` broadcasts likewise.
        """
        gen_ids, param_ids = self.gate_sequence(L, tied)
        n_gates = gen_ids.size
        runs = alphas.shape[0]
        theta = alphas[:, param_ids]  # (runs, gates)
        cos_all = np.cos(2.0 * theta)
        sin_all = np.sin(2.0 * theta)
        h_rows = h_vec if h_vec.ndim == 2 else h_vec[None, :]

        d_vec = np.zeros((runs, self.dim))
        d_vec[:, self.z_idx] = betas
        r_chain = np.empty((n_gates + 1, runs, self.dim))
        r_chain[0] = d_vec
        for k in range(n_gates):
            r_chain[k + 1] = r_chain[k]
            self._rotate(r_chain[k + 1], int(gen_ids[k]),
                         cos_all[:, k, None], sin_all[:, k, None])

        hh = np.einsum("rb,rb->r", h_rows, h_rows) if h_rows.shape[0] > 1 \
            else float(h_rows[0] @ h_rows[0])
        dd = np.einsum("rb,rb->r", d_vec, d_vec)
        cross = np.einsum("rb,rb->r", r_chain[n_gates],
                          np.broadcast_to(h_rows, (runs, self.dim)))
        loss = hh + dd - 2.0 * cross + resid

        grad_alpha = np.zeros_like(alphas)
        l_vec = np.array(np.broadcast_to(h_rows, (runs, self.dim)))
        for k in range(n_gates - 1, -1, -1):
            c = cos_all[:, k, None]
            s = sin_all[:, k, None]
            dots = self._derivative_dot(l_vec, r_chain[k], int(gen_ids[k]), c, s)
            grad_alpha[:, param_ids[k]] += -2.0 * dots
            self._rotate(l_vec, int(gen_ids[k]), c, -s)  # inverse rotation
        grad_beta = 2.0 * betas - 2.0 * l_vec[:, self.z_idx]
        return loss, grad_alpha, grad_beta


@lru_cache(maxsize=8)
def _engine(n: int) -> _AdjointEngine:
    return _AdjointEngine(n)


# ---------------------------------------------------------------------------
# Public cost / gradient / unitary
# ---------------------------------------------------------------------------

def ansatz_gate_list(a: CartanAnsatz) -> list[tuple[str, float]]:
    """(generator word, angle) per gate in application order."""
    eng = _engine(a.n)
    gen_ids, param_ids = eng.gate_sequence(a.L, a.tied)
    return [(eng.gen_words[g], float(a.alpha[p])) for g, p in zip(gen_ids, param_ids)]


def apply_ansatz_W(a: CartanAnsatz, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Dense unitary of the brickwork ansatz (first gate rightmost)."""
    _check_cap(a.n, dense_cap)
    dim = 2**a.n
    w = np.eye(dim, dtype=complex)
    for word, angle in ansatz_gate_list(a):
        p = PauliString(1.0, word).matrix()
        gate = math.cos(angle) * np.eye(dim) + 1j * math.sin(angle) * p
        w = gate @ w
    return w


def diagonal_model_matrix(a: CartanAnsatz) -> np.ndarray:
    """Diagonal entries of D(beta) over computational basis states."""
    states = np.arange(2**a.n)
    diag = np.zeros(2**a.n)
    for mu in range(a.n):
        z = 1.0 - 2.0 * ((states >> mu) & 1)
        diag += a.beta[mu] * z
    return diag


def vhd_cost(h: PauliSum, a: CartanAnsatz) -> float:
    """Normalized Hilbert-Schmidt cost ||H - W D W^dag||^2 / 2^n, exactly."""
    eng = _engine(a.n)
    h_vec, resid = eng.embed(h)
    loss, _, _ = eng.cost_and_grad(h_vec, resid, a.alpha[None, :], a.beta[None, :],
                                  a.L, a.tied)
    return float(loss[0])


def vhd_gradient(h: PauliSum, a: CartanAnsatz) -> tuple[np.ndarray, np.ndarray]:
    """(d cost / d alpha, d cost / d beta).

    The beta gradient is analytic (the cost is quadratic in beta).  Each
    untied angle gradient equals the two-point shift C(a + pi/4) - C(a - pi/4);
    tied angles accumulate that rule over their two gate occurrences.
    """
    eng = _engine(a.n)
    h_vec, resid = eng.embed(h)
    _, ga, gb = eng.cost_and_grad(h_vec, resid, a.alpha[None, :], a.beta[None, :],
                                  a.L, a.tied)
    return ga[0], gb[0]


def off_diagonal_audit(h: PauliSum, a: CartanAnsatz,
                       dense_cap: int = DEFAULT_DENSE_CAP) -> tuple[float, np.ndarray]:
    """(max |off-diagonal|, rotated matrix) of W^dag H W."""
    w = apply_ansatz_W(a, dense_cap)
    rotated = w.conj().T @ pauli_sum_to_matrix(h, dense_cap) @ w
    off = rotated - np.diag(np.diag(rotated))
    return float(np.max(np.abs(off))), rotated


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

class _Adam:
    """Standard first/second-moment optimizer with bias correction.

    The learning rate is per batch row so that runs can anneal independently.
    """

    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = np.full(shape[0], lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return params - self.lr[:, None] * mhat / (np.sqrt(vhat) + self.eps)

    def scale_lr(self, rows: np.ndarray, factor: float, floor: float) -> None:
        self.lr[rows] = np.maximum(self.lr[rows] * factor, floor)

    def drop_rows(self, keep: np.ndarray) -> None:
        self.m = self.m[keep]
        self.v = self.v[keep]
        self.lr = self.lr[keep]


def _beta_init_scale(h: PauliSum, dense_cap: int) -> float:
    if h.n <= dense_cap:
        return float(np.max(np.abs(pauli_sum_to_matrix(h, dense_cap))))
    return float(sum(abs(c) for c in h.collected().values()))


def _model_and_jacobian(eng: _AdjointEngine, alpha: np.ndarray, beta: np.ndarray,
                        L: int, tied: bool) -> tuple[np.ndarray, np.ndarray]:
    """Ad_W(alpha) d(beta) and its Jacobian over (alpha, beta), one run.

    All derivative columns ride through the gate chain as one growing batch:
    the column for gate k is created from the pre-gate state and then
    receives every later gate, so the total cost is O(gates) batched
    rotations rather than O(gates^2) scalar ones.
    """
    gen_ids, param_ids = eng.gate_sequence(L, tied)
    n_gates = gen_ids.size
    theta = alpha[param_ids]
    state = np.zeros((1, eng.dim))
    state[0, eng.z_idx] = beta

    alpha_cols = np.zeros((n_gates, eng.dim))
    beta_cols = np.zeros((beta.size, eng.dim))
    beta_cols[np.arange(beta.size), eng.z_idx] = 1.0
    for k in range(n_gates):
        gid = int(gen_ids[k])
        active, partner, sign = eng.tables[gid]
        ang = theta[k: k + 1]
        if k > 0:
            eng.apply_gate(alpha_cols[:k], gid, ang)  # slice view, mutated in place
        eng.apply_gate(beta_cols, gid, ang)
        a2 = 2.0 * theta[k]
        alpha_cols[k, active] = 2.0 * (-math.sin(a2) * state[0, active]
                                       - math.cos(a2) * sign * state[0, partner])
        eng.apply_gate(state, gid, ang)

    jac = np.zeros((eng.dim, alpha.size + beta.size))
    for k in range(n_gates):
        jac[:, param_ids[k]] += alpha_cols[k]
    jac[:, alpha.size:] = beta_cols.T
    return state[0].copy(), jac


def _polish_run(eng: _AdjointEngine, h_vec: np.ndarray, resid: float, alpha: np.ndarray,
                beta: np.ndarray, L: int, tied: bool, iters: int, stop_loss: float
                ) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Levenberg-Marquardt refinement of one run from its ADAM endpoint.

    The cost is the squared norm of the residual h - Ad_W d plus a constant,
    so Gauss-Newton steps converge quadratically once ADAM has found the
    basin; first-order dithering caps ADAM several orders above machine
    precision in ill-conditioned valleys.
    """
    n_a = alpha.size
    theta = np.concatenate([alpha, beta])
    damping = 1e-4
    losses: list[float] = []
    for _ in range(iters):
        model, jac = _model_and_jacobian(eng, theta[:n_a], theta[n_a:], L, tied)
        residual = h_vec - model
        loss = float(residual @ residual) + resid
        losses.append(loss)
        if loss < stop_loss:
            break
        grad = jac.T @ residual  # J of the residual is -jac
        normal = jac.T @ jac
        stepped = False
        for _ in range(40):
            lhs = normal + damping * np.diag(np.diag(normal)) + 1e-14 * np.eye(normal.shape[0])
            try:
                delta = np.linalg.solve(lhs, grad)
            except np.linalg.LinAlgError:
                damping *= 4.0
                continue
            trial = theta + delta
            t_loss = _loss_only(eng, trial[:n_a], trial[n_a:], L, tied, h_vec, resid)
            if t_loss < loss:
                theta = trial
                damping = max(damping / 3.0, 1e-12)
                stepped = True
                break
            damping *= 4.0
        if not stepped:
            break
    final = _loss_only(eng, theta[:n_a], theta[n_a:], L, tied, h_vec, resid)
    if not losses or final < losses[-1]:
        losses.append(final)  # LM only accepts improving steps
    return theta[:n_a], theta[n_a:], losses


def _loss_only(eng: _AdjointEngine, alpha: np.ndarray, beta: np.ndarray, L: int,
               tied: bool, h_vec: np.ndarray, resid: float) -> float:
    gen_ids, param_ids = eng.gate_sequence(L, tied)
    theta = alpha[param_ids]
    vec = np.zeros((1, eng.dim))
    vec[0, eng.z_idx] = beta
    for k in range(gen_ids.size):
        eng.apply_gate(vec, int(gen_ids[k]), theta[k: k + 1])
    diff = h_vec - vec[0]
    return float(diff @ diff) + resid


def vhd_train(h: PauliSum, n: int, L: int, cfg: TrainConfig,
              dense_cap: int = DEFAULT_DENSE_CAP) -> TrainReport:
    """Randomly restarted ADAM minimization of the diagonalization cost.

    Runs reaching ``stop_loss`` freeze early; non-convergence of the others
    is recorded, not raised.  Angles start uniform in [0, 2 pi), diagonal
    coefficients uniform within the Hamiltonian's dense max-norm.
    """
    return vhd_train_batch([h], n, L, cfg, dense_cap=dense_cap)[0]


def vhd_train_batch(hs: Sequence[PauliSum], n: int, L: int, cfg: TrainConfig,
                    dense_cap: int = DEFAULT_DENSE_CAP) -> list[TrainReport]:
    """Train several targets of the same size in one vectorized batch.

    All restarts of all Hamiltonians share the gate sequence, so one batched
    gradient pass drives the whole sweep.  Initializations are drawn from
    per-target streams keyed by (seed, target index): results are identical
    whether targets are trained jointly or one at a time.
    """
    eng = _engine(n)
    n_targets = len(hs)
    runs = n_targets * cfg.restarts
    n_alpha = CartanAnsatz.num_alpha(n, L, cfg.tied)

    h_rows = np.zeros((runs, eng.dim))
    resid = np.zeros(runs)
    alphas = np.empty((runs, n_alpha))
    betas = np.empty((runs, n))
    for i, h in enumerate(hs):
        if h.n != n:
            raise ValidationError("qubit count mismatch")
        vec, res = eng.embed(h)
        rng = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence((cfg.seed, i))))
        scale = _beta_init_scale(h, dense_cap)
        rows = slice(i * cfg.restarts, (i + 1) * cfg.restarts)
        h_rows[rows] = vec
        resid[rows] = res
        alphas[rows] = rng.uniform(0.0, 2.0 * math.pi, size=(cfg.restarts, n_alpha))
        betas[rows] = rng.uniform(-scale, scale, size=(cfg.restarts, n))

    histories: list[list[float]] = [[] for _ in range(runs)]
    best_loss = np.full(runs, np.inf)
    best_alpha = alphas.copy()
    best_beta = betas.copy()
    active = np.arange(runs)
    opt_a = _Adam((runs, n_alpha), cfg.lr_alpha)
    opt_b = _Adam((runs, n), cfg.lr_beta)
    plateau_ref = np.full(runs, np.inf)  # loss the current rate must halve
    stalled = np.zeros(runs, dtype=int)

    for _ in range(cfg.max_iters):
        loss, ga, gb = eng.cost_and_grad(h_rows, resid, alphas, betas, L, cfg.tied)
        for row, run in enumerate(active):
            histories[run].append(float(loss[row]))
            if loss[row] < best_loss[run]:
                best_loss[run] = loss[row]
                best_alpha[run] = alphas[row]
                best_beta[run] = betas[row]
        done = loss < cfg.stop_loss
        if np.any(done):
            keep = ~done
            active = active[keep]
            if active.size == 0:
                break
            alphas, betas = alphas[keep], betas[keep]
            h_rows, resid = h_rows[keep], resid[keep]
            ga, gb = ga[keep], gb[keep]
            loss = loss[keep]
            plateau_ref, stalled = plateau_ref[keep], stalled[keep]
            opt_a.drop_rows(keep)
            opt_b.drop_rows(keep)
        improved = loss < 0.5 * plateau_ref
        plateau_ref = np.where(improved, loss, plateau_ref)
        stalled = np.where(improved, 0, stalled + 1)
        halve = stalled >= cfg.plateau_patience
        if np.any(halve):
            opt_a.scale_lr(halve, 0.5, cfg.min_lr)
            opt_b.scale_lr(halve, 0.5, cfg.min_lr)
            stalled = np.where(halve, 0, stalled)
        alphas = opt_a.step(alphas, ga)
        betas = opt_b.step(betas, gb)

    if cfg.polish_iters > 0:
        # Quadratic refinement of runs ADAM left above the stopping loss:
        # first-order dithering floors orders above machine precision in
        # ill-conditioned valleys, while Gauss-Newton steps finish the job.
        for run in range(runs):
            if best_loss[run] < cfg.stop_loss:
                continue
            vec, res = eng.embed(hs[run // cfg.restarts])
            alpha, beta, losses = _polish_run(eng, vec, float(res), best_alpha[run],
                                              best_beta[run], L, cfg.tied,
                                              cfg.polish_iters, cfg.stop_loss)
            histories[run].extend(losses)
            if losses and losses[-1] < best_loss[run]:
                best_loss[run] = losses[-1]
                best_alpha[run] = alpha
                best_beta[run] = beta

    reports = []
    for i in range(n_targets):
        rows = range(i * cfg.restarts, (i + 1) * cfg.restarts)
        sub_best = np.array([best_loss[r] for r in rows])
        winner = int(np.argmin(sub_best))
        row = i * cfg.restarts + winner
        params = CartanAnsatz(n=n, L=L, alpha=best_alpha[row], beta=best_beta[row],
                              tied=cfg.tied)
        reports.append(TrainReport(
            loss_history=tuple(np.array(histories[r]) for r in rows),
            best_loss=float(sub_best[winner]), best_params=params,
            converged_runs=int(np.sum(sub_best < cfg.stop_loss)),
            stop_loss=cfg.stop_loss))
    return reports


# ---------------------------------------------------------------------------
# History states from a trained diagonalization
# ---------------------------------------------------------------------------

def diagonalized_history_circuit(a: CartanAnsatz, psi0: StateLike, m: int, epsilon: float,
                                 omit_final_w: bool = False,
                                 dense_cap: int = DEFAULT_DENSE_CAP) -> Circuit:
    """History-state circuit using U(eps t) = W exp(-i D eps t) W^dag.

    Clock Hadamards, W^dag on the system, then for clock qubit j one
    controlled single-qubit Z rotation per site (angle beta_mu eps 2^(j-1)),
    then W.  With ``omit_final_w`` the last sweep is dropped; the clock
    marginal's spectrum is unchanged by that local unitary.
    """
    n = a.n
    q = m + n
    circ = Circuit(q, dense_cap)
    init = np.zeros(2**q, dtype=complex)
    init[: 2**n] = as_amplitudes(psi0)
    circ.set_state(init)
    for j in range(1, m + 1):
        circ.h(n + j - 1)
    gates = ansatz_gate_list(a)

    def bond_targets(word: str) -> list[int]:
        sites = [i + 1 for i, ch in enumerate(word) if ch != "I"]
        return [sites[1] - 1, sites[0] - 1]  # higher site first (MSB of the 4x4 gate)

    def gate_matrix(word: str, angle: float, dagger: bool) -> np.ndarray:
        sites = [i + 1 for i, ch in enumerate(word) if ch != "I"]
        two = np.kron(PAULI_MATRICES[word[sites[1] - 1]], PAULI_MATRICES[word[sites[0] - 1]])
        sgn = -1.0 if dagger else 1.0
        return math.cos(angle) * np.eye(4) + sgn * 1j * math.sin(angle) * two

    for word, angle in reversed(gates):  # W^dag applies the daggered gates in reverse
        circ.u(gate_matrix(word, angle, dagger=True), bond_targets(word), name="w-dag-gate")
    for j in range(1, m + 1):
        tau = epsilon * 2 ** (j - 1)
        for mu in range(1, n + 1):
            rz = np.diag([np.exp(-1j * a.beta[mu - 1] * tau),
                          np.exp(1j * a.beta[mu - 1] * tau)])
            circ.cu(n + j - 1, rz, [mu - 1], name="c-rz")
    if not omit_final_w:
        for word, angle in gates:
            circ.u(gate_matrix(word, angle, dagger=False), bond_targets(word), name="w-gate")
    return circ


def diagonalized_history_builder(a: CartanAnsatz, m: int, epsilon: float,
                                 h: PauliSum | None = None,
                                 max_cost: float | None = None,
                                 omit_final_w: bool = False,
                                 dense_cap: int = DEFAULT_DENSE_CAP
                                 ) -> Callable[[StateLike], HistoryState]:
    """History-state constructor from a trained (W, D) pair.

    When ``h`` and ``max_cost`` are given the trained cost is audited first
    and the builder is refused if it exceeds the threshold.
    """
    if h is not None and max_cost is not None:
        cost = vhd_cost(h, a)
        if cost > max_cost:
            raise ThresholdViolation(
                f"trained cost {cost:.3e} exceeds the threshold {max_cost:.3e}")

    def build(psi0: StateLike) -> HistoryState:
        circ = diagonalized_history_circuit(a, psi0, m, epsilon, omit_final_w, dense_cap)
        return HistoryState(state=circ.state, n=a.n, m=m, epsilon=float(epsilon),
                            T=float(2**m * epsilon))

    build.circuit = lambda psi0: diagonalized_history_circuit(  # type: ignore[attr-defined]
        a, psi0, m, epsilon, omit_final_w, dense_cap)
    return build
