"""Dense statevector simulation.

States are plain ``complex128`` numpy arrays of length ``2**n``.  Amplitude
index ``b`` is the bitstring with site 0 as the most significant bit, which
matches the mask layout of :class:`piqae.pauli.PauliString`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .lattice import CouplingGraph, ModelSpec
from .pauli import PauliOperator, PauliString

log = logging.getLogger(__name__)

MAX_QUBITS = 24

StateVector = np.ndarray


def check_size(n: int, allow_large: bool = False) -> None:
    if n < 1:
        raise ValueError("need at least one qubit")
    if n > MAX_QUBITS and not allow_large:
        raise MemoryError(
            f"{n} qubits exceeds the statevector cap of {MAX_QUBITS}; pass allow_large=True to override"
        )


def n_qubits_of(state: np.ndarray) -> int:
    n = int(state.size).bit_length() - 1
    if state.ndim != 1 or (1 << n) != state.size or n < 1:
        raise ValueError("state length must be a power of two >= 2")
    return n


def _check_match(state: np.ndarray, n: int) -> None:
    if state.size != 1 << n:
        raise ValueError(f"state of length {state.size} does not hold {n} qubits")


@lru_cache(maxsize=8)
def _indices(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    idx.setflags(write=False)
    return idx


def parity_signs(n: int, z: int) -> np.ndarray:
    """``(-1)**popcount(b & z)`` for every basis index ``b``."""
    if z == 0:
        return np.ones(1 << n)
    par = np.bitwise_count(_indices(n) & z) & 1
    return 1.0 - 2.0 * par


def plus_state(n: int, allow_large: bool = False) -> StateVector:
    check_size(n, allow_large)
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=complex)


def basis_state(n: int, index: int = 0, allow_large: bool = False) -> StateVector:
    check_size(n, allow_large)
    out = np.zeros(1 << n, dtype=complex)
    out[index] = 1.0
    return out


def random_state(n: int, rng: np.random.Generator) -> StateVector:
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return v / np.linalg.norm(v)


def apply_pauli(state: StateVector, p: PauliString) -> StateVector:
    """Return ``P|state>`` (a new array)."""
    n = p.n_qubits
    _check_match(state, n)
    out = state * parity_signs(n, p.z) if p.z else state.copy()
    if p.x:
        out = out[_indices(n) ^ p.x]
    k = (p.x & p.z).bit_count() % 4
    if k:
        out *= (1, 1j, -1, -1j)[k]
    return out


def apply_pauli_rotation(state: StateVector, p: PauliString, theta: float) -> StateVector:
    """``exp(-i theta/2 P)|state> = cos(theta/2)|state> - i sin(theta/2) P|state>``."""
    return np.cos(theta / 2) * state - 1j * np.sin(theta / 2) * apply_pauli(state, p)


def apply_single_qubit(state: StateVector, site: int, gate: np.ndarray, n: int) -> StateVector:
    """Apply a 2x2 ``gate`` on ``site`` (site 0 = most significant bit)."""
    view = state.reshape(1 << site, 2, 1 << (n - 1 - site))
    return np.einsum("ab,ibj->iaj", gate, view).reshape(-1)


def x_rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


class CompiledOperator:
    """Pauli sum grouped by X mask for fast repeated matvecs.

    Each group stores the diagonal ``sum_z c i**|x&z| (-1)**|b&z|`` so that
    ``A|psi>[b] = sum_x diag_x[b ^ x] psi[b ^ x]``.
    """

    def __init__(self, op: PauliOperator):
        self.n_qubits = n = op.n_qubits
        groups: dict[int, np.ndarray] = {}
        for p, c in op.items():
            d = groups.get(p.x)
            if d is None:
                d = groups[p.x] = np.zeros(1 << n, dtype=complex)
            d += c * (1, 1j, -1, -1j)[(p.x & p.z).bit_count() % 4] * parity_signs(n, p.z)
        self.groups = [(x, groups[x]) for x in sorted(groups)]

    def apply(self, state: StateVector) -> StateVector:
        _check_match(state, self.n_qubits)
        idx = _indices(self.n_qubits)
        out = np.zeros_like(state, dtype=complex)
        for x, diag in self.groups:
            tmp = diag * state
            out += tmp[idx ^ x] if x else tmp
        return out


def apply_operator(state: StateVector, op: PauliOperator | CompiledOperator) -> StateVector:
    """``sum_j c_j P_j |state>`` without a dense matrix; result is unnormalized."""
    comp = op if isinstance(op, CompiledOperator) else CompiledOperator(op)
    return comp.apply(state)


def expval(state: StateVector, op: PauliString | PauliOperator | CompiledOperator):
    """``<state|O|state>``; real for Hermitian ``O``."""
    if isinstance(op, PauliString):
        return float(np.vdot(state, apply_pauli(state, op)).real)
    val = np.vdot(state, apply_operator(state, op))
    if isinstance(op, PauliOperator) and not op.is_hermitian():
        return complex(val)
    return float(val.real)


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.size != b.size:
        raise ValueError("state dimension mismatch")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform: ``out[z] = sum_b v[b] (-1)**|b&z|``."""
    a = np.asarray(values)
    size = a.size
    h = 1
    while h < size:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1)
        h *= 2
    return a.reshape(size)


def pauli_expvals(state: StateVector, xs: Sequence[int], zs: Sequence[int]) -> np.ndarray:
    """Expectation values of many strings given by mask arrays.

    Strings sharing an X mask share one product ``conj(psi) * psi[b ^ x]``;
    when a mask has many Z partners, a single Walsh-Hadamard transform
    yields all of them at once.
    """
    n = n_qubits_of(state)
    xs = np.asarray(xs, dtype=np.int64)
    zs = np.asarray(zs, dtype=np.int64)
    out = np.empty(xs.size)
    if xs.size == 0:
        return out
    idx = _indices(n)
    conj = state.conj()
    order = np.argsort(xs, kind="stable")
    bounds = np.flatnonzero(np.diff(xs[order])) + 1
    for chunk in np.split(order, bounds):
        x = int(xs[chunk[0]])
        w = conj * (state[idx ^ x] if x else state)
        zc = zs[chunk]
        if chunk.size > 2 * n:
            sums = fwht(w)[zc]
        else:
            sums = np.array([w @ parity_signs(n, int(z)) if z else w.sum() for z in zc])
        k = np.bitwise_count(zc & x) % 4
        out[chunk] = (sums * np.array([1, -1j, -1, 1j])[k]).real
    return out


# --- Hamiltonian variational ansatz -------------------------------------


@dataclass(frozen=True)
class HvaParams:
    """Per-layer HVA angles; ``beta`` is ``None`` for the TFIM ansatz."""

    alpha: tuple[float, ...]
    gamma: tuple[float, ...]
    beta: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "gamma", tuple(float(a) for a in self.gamma))
        if self.beta is not None:
            object.__setattr__(self, "beta", tuple(float(a) for a in self.beta))
            if len(self.beta) != len(self.alpha):
                raise ValueError("beta must have one angle per layer")
        if len(self.gamma) != len(self.alpha):
            raise ValueError("gamma must have one angle per layer")

    @property
    def layers(self) -> int:
        return len(self.alpha)

    @property
    def is_tfim(self) -> bool:
        return self.beta is None

    def flat(self) -> np.ndarray:
        """Angles per layer as ``(alpha, beta, gamma)`` or ``(alpha, gamma)``."""
        if self.beta is None:
            cols = (self.alpha, self.gamma)
        else:
            cols = (self.alpha, self.beta, self.gamma)
        return np.array(cols, dtype=float).T.reshape(-1)

    @classmethod
    def from_flat(cls, values: Sequence[float], tfim: bool) -> "HvaParams":
        width = 2 if tfim else 3
        arr = np.asarray(values, dtype=float)
        if arr.size % width:
            raise ValueError(f"expected a multiple of {width} angles, got {arr.size}")
        arr = arr.reshape(-1, width)
        if tfim:
            return cls(alpha=arr[:, 0], gamma=arr[:, 1])
        return cls(alpha=arr[:, 0], beta=arr[:, 1], gamma=arr[:, 2])

    @classmethod
    def zeros(cls, layers: int, tfim: bool) -> "HvaParams":
        return cls.from_flat(np.zeros(layers * (2 if tfim else 3)), tfim)

    def n_params(self) -> int:
        return self.layers * (2 if self.is_tfim else 3)


@lru_cache(maxsize=16)
def _zz_diagonal(graph: CouplingGraph) -> np.ndarray:
    n = graph.n_sites
    idx = _indices(n)
    spins = [1 - 2 * ((idx >> (n - 1 - i)) & 1) for i in range(n)]
    d = np.zeros(1 << n)
    for i, j in graph.edges:
        d += spins[i] * spins[j]
    d.setflags(write=False)
    return d


@lru_cache(maxsize=16)
def _z_diagonal(n: int) -> np.ndarray:
    d = n - 2.0 * np.bitwise_count(_indices(n)).astype(float)
    d.setflags(write=False)
    return d


def apply_x_layer(state: StateVector, gamma: float, n: int) -> StateVector:
    gate = x_rotation(gamma)
    view = state.reshape((2,) * n)
    for site in range(n):
        view = np.moveaxis(np.tensordot(gate, view, axes=(1, site)), 0, site)
    return np.ascontiguousarray(view).reshape(-1)


def _check_params(spec: ModelSpec, params: HvaParams) -> None:
    if spec.is_tfim != params.is_tfim:
        kind = "TFIM" if spec.is_tfim else "MFIM"
        raise ValueError(f"HVA parameters do not match the {kind} ansatz")


def prepare_hva(spec: ModelSpec, params: HvaParams, allow_large: bool = False) -> StateVector:
    """HVA state: each layer applies ``U^zz(alpha)``, then ``U^z(beta)``, then ``U^x(gamma)``.

    Layer 1 acts first on ``|+>^N``.  Terms inside each unitary commute, so
    the diagonal pieces are applied in one shot.
    """
    _check_params(spec, params)
    n = spec.n_sites
    state = plus_state(n, allow_large)
    zz = _zz_diagonal(spec.graph)
    for layer in range(params.layers):
        phase = params.alpha[layer] * zz
        if params.beta is not None:
            phase = phase + params.beta[layer] * _z_diagonal(n)
        state = state * np.exp(-0.5j * phase)
        state = apply_x_layer(state, params.gamma[layer], n)
    return state


def hva_rotation_sequence(spec: ModelSpec, params: HvaParams) -> list[tuple[PauliString, float]]:
    """The HVA circuit as an explicit list of single-string rotations."""
    _check_params(spec, params)
    n = spec.n_sites
    seq = []
    for layer in range(params.layers):
        for i, j in spec.graph.edges:
            seq.append((PauliString.from_sites(n, {i: "Z", j: "Z"}), params.alpha[layer]))
        if params.beta is not None:
            for i in range(n):
                seq.append((PauliString.from_sites(n, {i: "Z"}), params.beta[layer]))
        for i in range(n):
            seq.append((PauliString.from_sites(n, {i: "X"}), params.gamma[layer]))
    return seq


# --- exact diagonalization ---------------------------------------------


@dataclass
class EdResult:
    ground_energy: float
    ground_state: StateVector
    residual_norm: float
    iterations: int
    converged: bool


def ground_state_ed(
    op: PauliOperator,
    krylov_dim: int = 200,
    tol: float = 1e-10,
    max_iter: int = 500,
    seed: int = 12345,
    allow_large: bool = False,
) -> EdResult:
    """Lowest eigenpair by restarted Lanczos with full reorthogonalization.

    Each cycle builds at most ``krylov_dim`` vectors, then restarts from the
    current Ritz vector.  ``max_iter`` caps the total number of matvecs.
    """
    n = op.n_qubits
    check_size(n, allow_large)
    dim = 1 << n
    comp = CompiledOperator(op)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    m_cap = max(2, min(krylov_dim, dim))
    total = 0
    energy, residual = np.nan, np.inf
    while True:
        basis = np.empty((m_cap, dim), dtype=complex)
        alphas, betas = [], []
        basis[0] = v
        m = 0
        for j in range(m_cap):
            w = comp.apply(basis[j])
            total += 1
            a = np.vdot(basis[j], w).real
            alphas.append(a)
            block = basis[: j + 1]
            for _ in range(2):
                w -= block.T @ (block.conj() @ w)
            b = np.linalg.norm(w)
            m = j + 1
            if b < 1e-14 or m == m_cap or total >= max_iter:
                break
            # cheap Ritz residual estimate
            if m % 10 == 0:
                t = _tridiag(alphas, betas)
                evals, evecs = np.linalg.eigh(t)
                if abs(b * evecs[-1, 0]) < tol * 0.1:
                    break
            betas.append(b)
            basis[j + 1] = w / b
        t = _tridiag(alphas, betas[: m - 1])
        evals, evecs = np.linalg.eigh(t)
        v = evecs[:, 0] @ basis[:m]
        v /= np.linalg.norm(v)
        r = comp.apply(v)
        energy = float(np.vdot(v, r).real)
        residual = float(np.linalg.norm(r - energy * v))
        total += 1
        if residual <= tol or total >= max_iter:
            break
    converged = residual <= tol
    if not converged:
        log.warning("Lanczos stopped after %d matvecs with residual %.3e", total, residual)
    return EdResult(energy, v, residual, total, converged)


def _tridiag(alphas, betas) -> np.ndarray:
    t = np.diag(np.asarray(alphas, dtype=float))
    if betas:
        off = np.asarray(betas, dtype=float)
        t += np.diag(off, 1) + np.diag(off, -1)
    return t


# --- binary dump -----------------------------------------------------------


def dump_amplitudes(state: StateVector, path) -> None:
    """Little-endian interleaved (re, im) float64 pairs, index = bitstring."""
    np.asarray(state, dtype="<c16").tofile(path)


def load_amplitudes(path) -> StateVector:
    return np.fromfile(path, dtype="<c16").astype(complex)
