"""Classical optimization of HVA angles against the exact statevector energy."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.optimize

from .lattice import ModelSpec, build_hamiltonian
from .statevector import CompiledOperator, HvaParams, prepare_hva

log = logging.getLogger(__name__)

FD_STEP = 1e-5
GTOL = 1e-8
MAX_ITER = 500
# BFGS may stop on precision loss at the optimum; accept such stops when the
# gradient is this small
GRAD_ACCEPT = 1e-5


@dataclass
class VqeResult:
    params: HvaParams
    energy: float
    energy_error_per_site: float | None
    restarts_used: int
    converged: bool


def wrap_angles(values: np.ndarray) -> np.ndarray:
    """Map angles into ``(-pi, pi]``."""
    w = np.mod(np.asarray(values, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w[w <= -np.pi + 1e-15] = np.pi
    return w


def equivalent_angles(flat: np.ndarray, tfim: bool) -> list[np.ndarray]:
    """Angle vectors with identical energy under the ansatz's exact symmetries.

    Every angle is ``2 pi``-periodic up to a global phase.  The Hamiltonian,
    the initial state and every generator are real, so negating all angles
    (complex conjugation of the state) keeps the energy.  For the TFIM the
    global spin flip commutes with everything, so each mixing angle is
    additionally ``pi``-periodic.
    """
    base = [np.asarray(flat, dtype=float), -np.asarray(flat, dtype=float)]
    if tfim:
        shifted = []
        for v in base:
            w = v.reshape(-1, 2).copy()
            w[:, 1] = np.mod(w[:, 1] + np.pi / 2, np.pi) - np.pi / 2
            shifted.append(w.reshape(-1))
        base = shifted
    return [wrap_angles(v) for v in base]


def canonicalize(params: HvaParams, reference: Sequence[float] | None = None) -> HvaParams:
    """Pick one representative among symmetry-equivalent angle vectors.

    With a ``reference`` the representative closest to it is returned;
    otherwise the one whose first mixing angle is non-negative.
    """
    tfim = params.is_tfim
    cands = equivalent_angles(params.flat(), tfim)
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        best = min(cands, key=lambda v: float(np.abs(wrap_angles(v - ref)).max()))
    else:
        gamma_pos = 1 if tfim else 2
        best = next((v for v in cands if v[gamma_pos] >= 0), cands[0])
    return HvaParams.from_flat(best, tfim)


class EnergyFunction:
    """``theta -> <Psi(theta)|H|Psi(theta)>`` with central-difference gradients."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.op = CompiledOperator(build_hamiltonian(spec))
        self.tfim = spec.is_tfim
        self.evaluations = 0

    def __call__(self, theta: np.ndarray) -> float:
        self.evaluations += 1
        state = prepare_hva(self.spec, HvaParams.from_flat(theta, self.tfim))
        return float(np.vdot(state, self.op.apply(state)).real)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        g = np.empty(theta.size)
        for i in range(theta.size):
            d = np.zeros(theta.size)
            d[i] = FD_STEP
            g[i] = (self(theta + d) - self(theta - d)) / (2 * FD_STEP)
        return g


def vqe_optimize(
    spec: ModelSpec,
    L: int,
    seed: int = 0,
    restarts: int = 8,
    ground_energy: float | None = None,
    reference: Sequence[float] | None = None,
) -> VqeResult:
    """Multi-start BFGS over HVA angles.

    Start 0 is the all-zero point (the plain ``|+>`` energy is therefore an
    upper bound on the result); the remaining starts are uniform in
    ``[-pi, pi)`` from a seeded generator.  Ties go to the lowest start index.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    f = EnergyFunction(spec)
    n_par = L * (2 if spec.is_tfim else 3)
    rng = np.random.default_rng(seed)
    starts = [np.zeros(n_par)] + [rng.uniform(-np.pi, np.pi, n_par) for _ in range(restarts - 1)]
    best = None
    for idx, x0 in enumerate(starts):
        res = scipy.optimize.minimize(
            f, x0, jac=f.gradient, method="BFGS", options={"gtol": GTOL, "maxiter": MAX_ITER}
        )
        log.debug("restart %d: E=%.12f success=%s", idx, res.fun, res.success)
        if best is None or res.fun < best[0].fun - 1e-12:
            best = (res, idx)
    res = best[0]
    converged = bool(res.success or np.linalg.norm(f.gradient(res.x)) < GRAD_ACCEPT)
    params = canonicalize(HvaParams.from_flat(res.x, spec.is_tfim), reference)
    err = None if ground_energy is None else (float(res.fun) - ground_energy) / spec.n_sites
    return VqeResult(params, float(res.fun), err, len(starts), converged)
