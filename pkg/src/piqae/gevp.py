"""Generalized eigenvalue problem ``H c = E S c`` with overlap truncation.

The overlap matrix is diagonalized once; keeping its ``M`` largest
eigenvectors and whitening them by ``1/sqrt(s_i)`` (canonical
orthogonalization) turns the truncated problem into an ordinary Hermitian
one.  Truncation dimensions come either from a fixed eigenvalue threshold or
from the trace criterion, which picks the ``M`` whose partial eigenvalue sum
is closest to ``N_K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .fgks import FgksBasis, hermitize
from .pauli import PauliOperator
from .statevector import CompiledOperator, StateVector, apply_pauli, fidelity as _fidelity

XI_C = 1e-6


@dataclass
class OverlapSpectrum:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns


def overlap_spectrum(S: np.ndarray, herm_tol: float = 1e-8) -> OverlapSpectrum:
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("overlap matrix must be square")
    dev = np.max(np.abs(S - S.conj().T)) if S.size else 0.0
    if dev > herm_tol:
        raise ValueError(f"overlap matrix is not Hermitian (max deviation {dev:.2e})")
    vals, vecs = np.linalg.eigh(hermitize(S))
    vals, vecs = vals[::-1].copy(), vecs[:, ::-1].copy()
    # fix each column's phase: largest-magnitude entry real positive
    lead = np.argmax(np.abs(vecs), axis=0)
    ph = vecs[lead, np.arange(vecs.shape[1])]
    vecs /= ph / np.abs(ph)
    return OverlapSpectrum(vals, vecs)


def threshold_select(spec: OverlapSpectrum, xi_c: float = XI_C) -> int:
    if xi_c <= 0:
        raise ValueError("threshold must be positive")
    return int(np.count_nonzero(spec.values > xi_c))


def trace_distances(spec: OverlapSpectrum, N_K: int) -> np.ndarray:
    """``|sum_{i<=M} s_i - N_K|`` for ``M = 1 .. len(s)``."""
    return np.abs(np.cumsum(spec.values) - N_K)


def strace_select(spec: OverlapSpectrum, N_K: int, tie_tol: float = 1e-10) -> int:
    """Trace criterion over the admissible range ``s_M > 0``.

    The full eigenvalue sum always equals the trace, and a noisy overlap
    matrix keeps a unit diagonal, so an unrestricted minimum would always
    sit at ``M = N_K``.  Only leading positive eigenvalues are scanned;
    distances within ``tie_tol`` of the minimum tie toward smaller ``M``.
    """
    if N_K < 1:
        raise ValueError("N_K must be at least 1")
    limit = max(1, positive_count(spec))
    dist = trace_distances(spec, N_K)[:limit]
    return int(np.flatnonzero(dist <= dist.min() + tie_tol)[0]) + 1


def positive_count(spec: OverlapSpectrum) -> int:
    """Largest admissible truncation dimension (leading strictly positive eigenvalues)."""
    nonpos = np.flatnonzero(spec.values <= 0)
    return int(nonpos[0]) if nonpos.size else spec.values.size


def numerical_rank(spec: OverlapSpectrum) -> int:
    """Number of eigenvalues above rounding level (``s_max * N * eps``).

    For noiseless overlap matrices, eigenvalues below this level are rounding
    noise; truncating beyond them yields meaningless coefficients.
    """
    v = spec.values
    if v.size == 0:
        return 0
    tol = max(v[0], 0.0) * v.size * np.finfo(float).eps
    return int(np.count_nonzero(v > tol))


@dataclass
class GevpResult:
    M: int
    eigenvalues: np.ndarray  # ascending, truncated problem
    vectors: np.ndarray  # orthonormal eigenvectors of the whitened M x M problem
    coeffs_truncated: np.ndarray  # c_i over the overlap eigenvectors |s_i>
    coeffs_original: np.ndarray  # c'_k over the FGKS labels
    diagnostics: dict = field(default_factory=dict)

    @property
    def energy(self) -> float:
        return float(self.eigenvalues[0])


def solve_truncated(
    H: np.ndarray, S: np.ndarray, M: int, spectrum: OverlapSpectrum | None = None
) -> GevpResult:
    spec = spectrum if spectrum is not None else overlap_spectrum(S)
    n = spec.values.size
    if not 1 <= M <= n:
        raise ValueError(f"M={M} outside [1, {n}]")
    s = spec.values[:M]
    if s[-1] <= 0:
        raise ValueError(
            f"overlap eigenvalue s_{M} = {s[-1]:.3e} is not positive; choose M <= {positive_count(spec)}"
        )
    y = spec.vectors[:, :M] / np.sqrt(s)
    return _solve_whitened(hermitize(y.conj().T @ H @ y), y, s, M)


def _solve_whitened(h: np.ndarray, y: np.ndarray, s: np.ndarray, M: int) -> GevpResult:
    vals, vecs = np.linalg.eigh(h)
    w = vecs[:, 0]
    return GevpResult(M, vals, vecs, w / np.sqrt(s), y @ w)


class TruncationSweep:
    """Solve the truncated problem for many ``M`` from one decomposition.

    The overlap-eigenbasis image of ``H`` is formed once; each ``M`` only
    needs the leading block, whitened.
    """

    def __init__(self, H: np.ndarray, S: np.ndarray, spectrum: OverlapSpectrum | None = None):
        self.spectrum = spectrum if spectrum is not None else overlap_spectrum(S)
        u = self.spectrum.vectors
        self.H_rot = hermitize(u.conj().T @ H @ u)
        self.max_M = positive_count(self.spectrum)

    def ground(self, M: int) -> GevpResult:
        if not 1 <= M <= self.max_M:
            raise ValueError(f"M={M} outside [1, {self.max_M}]")
        s = self.spectrum.values[:M]
        d = 1 / np.sqrt(s)
        h = self.H_rot[:M, :M] * d[:, None] * d[None, :]
        vals, vecs = scipy.linalg.eigh(h, subset_by_index=[0, 0], driver="evr")
        w = vecs[:, 0]
        c = w * d
        res = GevpResult(M, vals, vecs, c, self.spectrum.vectors[:, :M] @ c)
        return res

    def energies(self, Ms: Sequence[int]) -> np.ndarray:
        return np.array([self.ground(M).energy for M in Ms])


def rayleigh_energy(c: np.ndarray, H: np.ndarray, S: np.ndarray) -> float:
    """``c^dag H c / c^dag S c``."""
    num = np.vdot(c, H @ c)
    den = np.vdot(c, S @ c)
    return float((num / den).real)


def reconstruct_state(result: GevpResult, basis: FgksBasis, state: StateVector) -> StateVector:
    """``|g> = sum_k c'_k P_k |psi>``, unnormalized."""
    out = np.zeros_like(state, dtype=complex)
    for c, p in zip(result.coeffs_original, basis.labels):
        if c != 0:
            out += c * apply_pauli(state, p)
    return out


def diagnostics(
    result: GevpResult,
    basis: FgksBasis,
    zero_moment_state: StateVector,
    H: PauliOperator,
    ground_state: StateVector | None = None,
    ground_energy: float | None = None,
) -> GevpResult:
    """Attach exact energy, error per site, and fidelity of the reconstructed state."""
    g = reconstruct_state(result, basis, zero_moment_state)
    norm = np.linalg.norm(g)
    if norm < 1e-10:
        raise ValueError("reconstructed state has vanishing norm (degenerate coefficients)")
    g /= norm
    comp = CompiledOperator(H)
    e = float(np.vdot(g, comp.apply(g)).real)
    n = H.n_qubits
    diag = {"exact_energy": e, "norm": float(norm)}
    if ground_energy is not None:
        diag["epsilon"] = (result.energy - ground_energy) / n
        diag["exact_epsilon"] = (e - ground_energy) / n
    if ground_state is not None:
        diag["fidelity"] = _fidelity(g, ground_state)
    result.diagnostics.update(diag)
    return result


class ExactReference:
    """Noiseless quantities for fast per-M diagnostics.

    Because ``|g> = sum_k c'_k P_k|psi>``, its exact energy and norm are
    quadratic forms in ``c'`` with the noiseless matrices, and its overlap
    with the ground state is linear in ``c'``.
    """

    def __init__(self, H_exact: np.ndarray, S_exact: np.ndarray, overlaps: np.ndarray | None = None):
        self.H = H_exact
        self.S = S_exact
        self.overlaps = overlaps  # <G|P_k|psi>

    @classmethod
    def build(cls, H_exact, S_exact, basis: FgksBasis, state: StateVector, ground_state=None):
        ov = None
        if ground_state is not None:
            ov = np.array([np.vdot(ground_state, apply_pauli(state, p)) for p in basis.labels])
        return cls(H_exact, S_exact, ov)

    def evaluate(self, c: np.ndarray) -> tuple[float, float | None]:
        """Exact energy and fidelity of the normalized state with coefficients ``c``."""
        norm2 = np.vdot(c, self.S @ c).real
        if norm2 < 1e-20:
            raise ValueError("reconstructed state has vanishing norm (degenerate coefficients)")
        e = float(np.vdot(c, self.H @ c).real / norm2)
        f = None
        if self.overlaps is not None:
            f = float(min(1.0, abs(self.overlaps @ c) ** 2 / norm2))
        return e, f


def zne_extrapolate(lams: Sequence[float], energies: Sequence[float], order: int = 2) -> float:
    """Least-squares polynomial fit of ``E(lambda)`` evaluated at zero."""
    lams = np.asarray(lams, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if lams.shape != energies.shape:
        raise ValueError("lambda and energy arrays differ in length")
    if np.unique(lams).size < order + 1:
        raise ValueError(f"order-{order} fit needs at least {order + 1} distinct lambda values")
    coef = np.polynomial.polynomial.polyfit(lams, energies, order)
    return float(coef[0])
