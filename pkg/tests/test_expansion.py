"""Tests for the rate-matrix spectrum and the slow-driving expansion."""

import numpy as np
import pytest
from periodic_gkls.core import NonSimpleKernel, SingularCoherenceBlock
from periodic_gkls.dissipator import DissipatorSpec, gibbs_weights
from periodic_gkls.expansion import (
    coherence_correction, effective_population_generator, first_order, rate_spectrum,
    reduced_inverse, second_order, zeroth_order,
)
from periodic_gkls.liouville import GeneratorBlocks, assemble_generator
from periodic_gkls.protocols import ConstantProtocol, NutatingProtocol, RotatingProtocol, SplineProtocol
from periodic_gkls.specmat import eigendecompose


BALANCED = np.array([[-0.3, 0.5], [0.3, -0.5]])
CYCLIC = np.array([[-1.0, 0.0, 2.0], [1.0, -2.0, 0.0], [0.0, 2.0, -2.0]])


# ── rate_spectrum ───────────────────────────────────────────────────────


def test_two_state_spectrum():
    spec = rate_spectrum(BALANCED)
    assert spec.eigenvalues == pytest.approx([0.0, -0.8])
    assert spec.stationary == pytest.approx([0.625, 0.375])
    assert spec.left[0] == pytest.approx([1.0, 1.0])


@pytest.mark.parametrize("k", [BALANCED, CYCLIC], ids=["detailed-balance", "cyclic"])
def test_spectrum_biorthonormal(k):
    spec = rate_spectrum(k)
    n = k.shape[0]
    assert np.allclose(spec.left @ spec.right, np.eye(n), atol=1e-10)
    assert np.allclose(k @ spec.right, spec.right * spec.eigenvalues[None, :], atol=1e-10)
    assert np.allclose(k @ spec.stationary, 0.0, atol=1e-12)
    assert spec.stationary.sum() == pytest.approx(1.0)


def test_cyclic_stationary_vector():
    spec = rate_spectrum(CYCLIC)
    assert spec.stationary == pytest.approx(np.array([4.0, 2.0, 2.0]) / 8.0)


@pytest.mark.parametrize("k", [
    np.zeros((2, 2)),
    np.array([[-1.0, 1.0, 0.0, 0.0], [1.0, -1.0, 0.0, 0.0],
              [0.0, 0.0, -1.0, 1.0], [0.0, 0.0, 1.0, -1.0]]),
], ids=["zero", "disconnected"])
def test_degenerate_kernel(k):
    with pytest.raises(NonSimpleKernel):
        rate_spectrum(k)


@pytest.mark.parametrize("k", [BALANCED, CYCLIC], ids=["detailed-balance", "cyclic"])
def test_reduced_inverse(k):
    spec = rate_spectrum(k)
    n = k.shape[0]
    assert np.allclose(k @ reduced_inverse(spec), np.eye(n) - spec.projector(), atol=1e-10)
    assert np.allclose(np.ones(n) @ reduced_inverse(spec), 0.0, atol=1e-10)


# ── orders 0 and 1 ──────────────────────────────────────────────────────


def test_zeroth_order_is_gibbs(reservoir):
    res = zeroth_order(RotatingProtocol(1.0, 0.1), 2.0, reservoir("z"))
    assert res.order == 0
    assert res.state().pop == pytest.approx(gibbs_weights(np.array([-0.5, 0.5]), 1.0))
    assert np.abs(res.state().coh).max() == 0.0


def test_first_order_constant_splitting_has_no_population_lag(reservoir):
    res = first_order(NutatingProtocol(1.0, 0.05), 9.0, reservoir("x"))
    assert np.abs(res.pop_terms[1]).max() < 1e-9


def test_first_order_population_lag_is_traceless(reservoir):
    path = SplineProtocol(0.05, h=[1.0, 1.2, 0.9, 1.1], theta=[0.6, 0.9, 1.1, 0.8],
                          phi=[0.0, 0.3, -0.2, 0.1])
    res = first_order(path, 11.0, reservoir("z"))
    assert np.abs(res.pop_terms[1]).max() > 1e-4
    assert abs(res.pop_terms[1].sum()) < 1e-9


def test_first_order_coherences_conjugate(reservoir):
    res = first_order(RotatingProtocol(1.0, 0.05), 4.0, reservoir("z"))
    assert res.state().conjugation_error() < 1e-12


def test_cd_keeps_populations(reservoir):
    path = NutatingProtocol(1.0, 0.05)
    plain = first_order(path, 6.0, reservoir("z"))
    cd = first_order(path, 6.0, reservoir("z"), with_cd=True)
    assert cd.cd_applied
    assert np.allclose(cd.pop_terms[1], plain.pop_terms[1])
    assert np.abs(cd.coh_terms[1]).max() < np.abs(plain.coh_terms[1]).max()


def test_cd_without_dissipation_removes_coherences(reservoir):
    spec = reservoir("z", gap=0.0)
    blocks = assemble_generator(RotatingProtocol(1.0, 0.05), 3.0, spec)
    pop = np.array([0.6, 0.4])
    assert np.abs(coherence_correction(blocks, pop, with_cd=True)).max() < 1e-14


def test_first_order_scales_with_omega(reservoir):
    slow = first_order(RotatingProtocol(1.0, 0.02), 0.0, reservoir("z"))
    fast = first_order(RotatingProtocol(1.0, 0.04), 0.0, reservoir("z"))
    ratio = np.abs(fast.coh_terms[1]).max() / np.abs(slow.coh_terms[1]).max()
    assert ratio == pytest.approx(2.0, rel=1e-6)


def test_singular_coherence_block(reservoir):
    blocks = assemble_generator(RotatingProtocol(1.0, 0.1), 0.0, reservoir("z"))
    broken = GeneratorBlocks(blocks.K, np.zeros_like(blocks.kcoh), blocks.a12, blocks.a21, blocks.a2,
                             blocks.delta, blocks.time, blocks.basis, blocks.derivatives)
    with pytest.raises(SingularCoherenceBlock):
        coherence_correction(broken, np.array([0.7, 0.3]))


# ── effective generator and order 2 ─────────────────────────────────────


def test_effective_generator_static_is_K(reservoir):
    blocks = assemble_generator(ConstantProtocol(1.0), 0.0, reservoir("z"))
    assert np.array_equal(effective_population_generator(blocks), blocks.K)


def test_effective_generator_preserves_trace(reservoir):
    blocks = assemble_generator(NutatingProtocol(1.0, 0.1), 5.0, reservoir("x", zero=0.1))
    k_eff = effective_population_generator(blocks)
    assert np.abs(np.ones(2) @ k_eff).max() < 1e-12
    assert np.abs(np.imag(k_eff)).max() < 1e-12


def test_effective_correction_scales_as_omega_squared(reservoir):
    def correction(omega):
        blocks = assemble_generator(RotatingProtocol(1.0, omega), 0.0, reservoir("z"))
        return np.linalg.norm(effective_population_generator(blocks) - blocks.K)
    assert correction(0.04) / correction(0.02) == pytest.approx(4.0, rel=1e-5)


def test_second_order_results(reservoir):
    path = RotatingProtocol(1.0, 0.2)
    times = np.linspace(0.0, 0.25 * path.period, 3)
    results = second_order(path, times, reservoir("z"))
    assert [r.order for r in results] == [2, 2, 2]
    assert [r.time for r in results] == pytest.approx(times.tolist())
    for r in results:
        assert len(r.pop_terms) == 3
        assert r.state().trace_error() < 1e-10


def test_second_order_starts_from_gibbs(reservoir):
    path = RotatingProtocol(1.0, 0.2)
    first = second_order(path, [0.0], reservoir("z"))[0]
    assert first.state().pop == pytest.approx(gibbs_weights(np.array([-0.5, 0.5]), 1.0))


def test_basis_recorded(reservoir):
    path = RotatingProtocol(1.0, 0.1)
    res = first_order(path, 1.0, reservoir("z"))
    assert np.allclose(res.basis.reconstruct(), eigendecompose(path.hamiltonian(1.0)).reconstruct())
