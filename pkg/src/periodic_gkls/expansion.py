"""Slow-driving expansion of the periodic steady state.

Order 0 is the instantaneous Gibbs distribution. Order 1 adds the lag of the
populations behind the moving Gibbs vector and the coherences induced by the
rotating eigenbasis. Order 2 propagates the populations under the effective
generator obtained by eliminating the coherence sector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import NonSimpleKernel, SingularCoherenceBlock, frozen, max_abs
from .dissipator import DissipatorSpec, gibbs_weights
from .liouville import GeneratorBlocks, StateVec, assemble_generator, build_K
from .protocols import Protocol
from .specmat import SpectralDecomposition, eigendecompose, jacobi_eigh

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-10
BALANCE_TOL = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class RateSpectrum:
    """Eigenvalues with right vectors as columns and left vectors as rows.

    Index 0 holds the zero mode: right[:, 0] sums to 1 and left[0] is all ones.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def stationary(self) -> np.ndarray:
        return self.right[:, 0].real

    def projector(self) -> np.ndarray:
        return np.outer(self.right[:, 0], self.left[0])


def _detailed_balance(k: np.ndarray, pi: np.ndarray, scale: float) -> bool:
    if pi.min() <= 0:
        return False
    flux = k * pi[None, :]
    return max_abs(flux - flux.T) <= BALANCE_TOL * scale


def _symmetric_modes(k: np.ndarray, pi: np.ndarray):
    root = np.sqrt(pi)
    values, vectors = jacobi_eigh(k * root[None, :] / root[:, None])
    return values.astype(complex), root[:, None] * vectors, vectors.conj().T / root[None, :]


def _general_modes(k: np.ndarray):
    values, vl, vr = scipy.linalg.eig(k, left=True, right=True)
    left = vl.conj().T
    left /= np.einsum("ij,ji->i", left, vr)[:, None]
    return values, vr, left


def rate_spectrum(K) -> RateSpectrum:
    """Biorthonormal spectral decomposition of a transition-rate matrix."""
    k = np.asarray(K)
    if np.iscomplexobj(k):
        if max_abs(k.imag) > ZERO_TOL * max(1.0, max_abs(k)):
            raise NonSimpleKernel("transition-rate matrix must be real")
        k = k.real
    k = k.astype(float)
    scale = float(np.linalg.norm(k))
    kernel = scipy.linalg.null_space(k, rcond=ZERO_TOL) if scale > 0 else np.eye(k.shape[0])
    if kernel.shape[1] != 1:
        raise NonSimpleKernel(f"zero eigenvalue has multiplicity {kernel.shape[1]}")
    pi = kernel[:, 0]
    if abs(pi.sum()) < ZERO_TOL:
        raise NonSimpleKernel("stationary vector has zero entry sum")
    pi = pi / pi.sum()

    if _detailed_balance(k, pi, scale):
        values, right, left = _symmetric_modes(k, pi)
    else:
        logger.debug("rate matrix breaks detailed balance, using the general eigensolver")
        values, right, left = _general_modes(k)

    order = np.argsort(np.abs(values), kind="stable")
    values, right, left = values[order], right[:, order], left[order]
    if len(values) > 1 and abs(values[1]) < ZERO_TOL * scale:
        raise NonSimpleKernel("two eigenvalues below the zero threshold")
    norm = right[:, 0].sum()
    right[:, 0] /= norm
    left[0] *= norm
    values[0] = 0.0
    return RateSpectrum(frozen(values), frozen(right), frozen(left))


def reduced_inverse(spec: RateSpectrum) -> np.ndarray:
    """sum over nonzero modes of |R_n><L_n| / Lambda_n."""
    n = spec.eigenvalues.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for i in range(1, n):
        out += np.outer(spec.right[:, i], spec.left[i]) / spec.eigenvalues[i]
    if max_abs(out.imag) <= 1e-12 * max(1.0, max_abs(out)):
        return out.real
    return out


@dataclass(frozen=True, eq=False)
class ExpansionResult:
    order: int
    pop_terms: list[np.ndarray]
    coh_terms: list[np.ndarray]
    cd_applied: bool = False
    time: float = 0.0
    basis: SpectralDecomposition | None = field(default=None)

    def state(self) -> StateVec:
        return StateVec(np.sum(self.pop_terms, axis=0), np.sum(self.coh_terms, axis=0))


def _gibbs_populations(path: Protocol, t: float, beta: float) -> tuple[np.ndarray, SpectralDecomposition]:
    basis = eigendecompose(path.hamiltonian(t), time=t)
    return gibbs_weights(basis.eigenvalues, beta), basis


def zeroth_order(path: Protocol, t: float, d_config: DissipatorSpec) -> ExpansionResult:
    pop, basis = _gibbs_populations(path, t, d_config.beta)
    n = basis.dim
    return ExpansionResult(0, [pop], [np.zeros(n * (n - 1), dtype=complex)], time=t, basis=basis)


def _stationary_rate(path: Protocol, t: float, d_config: DissipatorSpec) -> np.ndarray:
    basis = eigendecompose(path.hamiltonian(t), time=t)
    return rate_spectrum(build_K(d_config.at(basis))).stationary


def _solve(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(matrix)
    logger.debug("condition number of %s: %.3e", what, cond)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularCoherenceBlock(f"{what} is numerically singular (cond {cond:.3e})")
    return np.linalg.solve(matrix, rhs)


def coherence_correction(blocks: GeneratorBlocks, pop: np.ndarray, with_cd: bool = False) -> np.ndarray:
    """Coherences slaved to the populations `pop` at first order."""
    source = blocks.a21 @ pop
    coh = -_solve(blocks.kcoh, source, "coherence block")
    if with_cd:
        coh += _solve(-1j * np.diag(blocks.delta), source, "gap matrix")
    return coh


def first_order(path: Protocol, t: float, d_config: DissipatorSpec, with_cd: bool = False,
                fd_step: float | None = None) -> ExpansionResult:
    """Orders 0 and 1 at time t, in the eigenbasis of H(t).

    With `with_cd` the populations are unchanged and the coherences lose
    the part driven by the unitary rotation of the eigenbasis.
    """
    blocks = assemble_generator(path, t, d_config, fd_step=fd_step)
    spec = rate_spectrum(blocks.K)
    r0 = spec.stationary
    step = path.default_fd_step() if fd_step is None else fd_step
    dr0 = (_stationary_rate(path, t + step, d_config)
           - _stationary_rate(path, t - step, d_config)) / (2.0 * step)
    pop1 = np.real_if_close(reduced_inverse(spec) @ dr0)
    coh1 = coherence_correction(blocks, r0, with_cd)
    n = blocks.dim
    return ExpansionResult(
        order=1,
        pop_terms=[r0, pop1],
        coh_terms=[np.zeros(n * (n - 1), dtype=complex), coh1],
        cd_applied=with_cd,
        time=t,
        basis=blocks.basis,
    )


def effective_population_generator(blocks: GeneratorBlocks) -> np.ndarray:
    """K corrected by adiabatic elimination of the coherence sector."""
    correction = blocks.a12 @ _solve(blocks.kcoh, blocks.a21, "coherence block")
    return blocks.K - correction


def second_order(path: Protocol, times, d_config: DissipatorSpec, with_cd: bool = False,
                 substeps: int = 4, fd_step: float | None = None) -> list[ExpansionResult]:
    """Populations propagated under the effective generator across `times`.

    The propagation starts from the Gibbs populations at times[0] and uses
    exponential-midpoint steps. Coherences follow the propagated
    populations through `coherence_correction`.
    """
    times = np.asarray(times, dtype=float)
    pop = _gibbs_populations(path, float(times[0]), d_config.beta)[0].astype(complex)
    results = []
    for i, t in enumerate(times):
        if i > 0:
            edges = np.linspace(times[i - 1], t, substeps + 1)
            for a, b in zip(edges, edges[1:]):
                mid = assemble_generator(path, 0.5 * (a + b), d_config, fd_step=fd_step)
                pop = scipy.linalg.expm((b - a) * effective_population_generator(mid)) @ pop
        first = first_order(path, float(t), d_config, with_cd, fd_step)
        blocks = assemble_generator(path, float(t), d_config, fd_step=fd_step)
        coh = coherence_correction(blocks, pop, with_cd)
        p0, p1 = first.pop_terms
        c0, c1 = first.coh_terms
        results.append(ExpansionResult(
            order=2,
            pop_terms=[p0, p1, np.real_if_close(pop) - p0 - p1],
            coh_terms=[c0, c1, coh - c1],
            cd_applied=with_cd,
            time=float(t),
            basis=first.basis,
        ))
    return results
