import numpy as np
import pytest

from distimator import bellvec as bv
from distimator import oracle
from distimator.bellvec import NoiseModel
from distimator.protocols import PROTOCOLS, distilled_state, noisy_success

from conftest import random_bell, random_model


def test_bell_vector_to_density_examples():
    rho = oracle.bell_vector_to_density([1, 0, 0, 0])
    expected = np.zeros((4, 4))
    expected[np.ix_([0, 3], [0, 3])] = 0.5
    np.testing.assert_allclose(rho, expected, atol=1e-15)
    np.testing.assert_allclose(oracle.bell_vector_to_density([0.25] * 4), np.eye(4) / 4, atol=1e-15)
    np.testing.assert_allclose(oracle.bell_diagonal_part(oracle.bell_vector_to_density([0.7, 0.1, 0.1, 0.1])),
                               [0.7, 0.1, 0.1, 0.1], atol=1e-15)


def test_bell_diagonal_part_of_product_state():
    ket = np.zeros((4, 4))
    ket[0, 0] = 1
    np.testing.assert_allclose(oracle.bell_diagonal_part(ket), [0.5, 0.5, 0, 0], atol=1e-15)


def test_twirl_roundtrip(rng):
    for q in random_bell(rng, 100):
        np.testing.assert_allclose(oracle.bell_diagonal_part(oracle.bell_vector_to_density(q)), q, atol=1e-14)


def test_pure_phi_plus_protocol_a():
    rho = oracle.bell_vector_to_density([1, 0, 0, 0])
    p, state = oracle.run_protocol_dense("A", rho, rho, NoiseModel.noiseless())
    assert p == pytest.approx(0.5)
    np.testing.assert_allclose(state, rho, atol=1e-14)


# implementer-chosen coherent test states: 0.9 |B_i> + 0.1 |B_j> with coherence c
def coherent_state(i, j, c):
    kets = oracle.BELL_KETS
    rho = (0.9 * np.outer(kets[i], kets[i].conj()) + 0.1 * np.outer(kets[j], kets[j].conj())
           + c * np.outer(kets[i], kets[j].conj()) + np.conj(c) * np.outer(kets[j], kets[i].conj()))
    return oracle.check_density(rho)


COHERENT_MODEL = NoiseModel.symmetric(y=0.02, m=0.03, eta_z=0.95, eta_x=0.97, t_dpo=2.0, t_dph=1.5)


@pytest.mark.parametrize("c", [0.05, 0.05j, 0.03 - 0.02j])
@pytest.mark.parametrize("pair", [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
def test_coincidence_statistics_ignore_coherences(pair, c):
    rho = coherent_state(*pair, c)
    diag = oracle.bell_vector_to_density(oracle.bell_diagonal_part(rho))
    for p in PROTOCOLS:
        p_coh, _ = oracle.run_protocol_dense(p, rho, rho, COHERENT_MODEL, 0.2, outcome="coincidence")
        p_diag, _ = oracle.run_protocol_dense(p, diag, diag, COHERENT_MODEL, 0.2, outcome="coincidence")
        assert p_coh == pytest.approx(p_diag, abs=1e-12)
        assert p_diag == pytest.approx(2 * float(noisy_success(p, oracle.bell_diagonal_part(rho), COHERENT_MODEL, 0.2)),
                                       abs=1e-12)


def test_both_up_ignores_coherence_invisible_to_readout():
    # a real Phi+/Phi- coherence has no X marginal, so the X readout of B and
    # the rotated Z readout of C cannot see it
    rho = coherent_state(0, 1, 0.05)
    q = oracle.bell_diagonal_part(rho)
    for p in "BC":
        p_coh, _ = oracle.run_protocol_dense(p, rho, rho, COHERENT_MODEL, 0.2)
        assert p_coh == pytest.approx(float(noisy_success(p, q, COHERENT_MODEL, 0.2)), abs=1e-12)


@pytest.mark.xfail(strict=True, reason="a real Phi+/Phi- coherence biases the Z marginals, which the both-up outcome of A sees")
def test_both_up_protocol_a_ignores_phi_coherence():
    rho = coherent_state(0, 1, 0.05)
    p_coh, _ = oracle.run_protocol_dense("A", rho, rho, COHERENT_MODEL, 0.2)
    assert p_coh == pytest.approx(float(noisy_success("A", oracle.bell_diagonal_part(rho), COHERENT_MODEL, 0.2)), abs=1e-12)


def test_fast_path_matches_oracle(rng):
    for _ in range(100):
        model = random_model(rng)
        dt = rng.exponential(0.3)
        qc, qt = random_bell(rng), random_bell(rng)
        for p in PROTOCOLS:
            p_dense, state = oracle.run_protocol_dense(
                p, oracle.bell_vector_to_density(qc), oracle.bell_vector_to_density(qt), model, dt
            )
            q_fast, p_fast = distilled_state(p, qc, model, dt, q_target=qt)
            assert abs(p_dense - p_fast) < 1e-10
            np.testing.assert_allclose(oracle.bell_diagonal_part(state), q_fast, atol=1e-10)
            oracle.check_density(state)


def test_channels_keep_density_matrices_valid(rng):
    for _ in range(50):
        rho = oracle.bell_vector_to_density(random_bell(rng))
        lam, zeta, m = rng.uniform(0, 1), rng.uniform(0, 0.5), rng.uniform(0, 1)
        for out in (
            oracle.depolarize_qubit(rho, 0, lam),
            oracle.dephase_qubit(rho, 1, zeta),
            oracle.noisy_rotation(rho, m, 1 - m),
            oracle.memory_noise(rho, random_model(rng), rng.exponential()),
        ):
            oracle.check_density(out)


def test_check_density_rejects_bad_input():
    with pytest.raises(ValueError):
        oracle.check_density(np.diag([1.5, -0.5, 0, 0]))
    with pytest.raises(ValueError):
        oracle.check_density(np.eye(4))


def test_degenerate_outcome():
    rho = oracle.bell_vector_to_density([0, 0, 1, 0])
    tgt = oracle.bell_vector_to_density([1, 0, 0, 0])
    with pytest.raises(bv.DegenerateOutcomeError):
        oracle.run_protocol_dense("A", rho, tgt, NoiseModel.noiseless())
