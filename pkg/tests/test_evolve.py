import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_density_matrix
import micromaser.evolve as evolve_module
from micromaser.channels import (
    AtomState,
    ThermalAtomSpec,
    discrete_map,
    generator_L0,
    kraus_thermal_atom,
    kraus_two_photon,
    loss_dissipator,
    parity_superop,
)
from micromaser.errors import EigensolverError
from micromaser.evolve import (
    ModelParams,
    block_hamiltonian,
    equivalent_two_photon,
    evolve_continuous,
    evolve_discrete,
    evolve_discrete_at,
    evolve_kraus_at,
    fidelity_trace,
    find_plateaus,
    full_model_map,
    full_model_propagator,
    spectrum,
    unvec,
    vec,
)
from micromaser.fock import basis, coherent_state, fidelity, ket_to_dm, parity_op
from micromaser.steady import pure_sector, pure_stationary
from micromaser.walls import phi_for_wall


def cat_regime_generator(n_max, kappa):
    atom = AtomState.from_excited(0.1)
    return generator_L0(kraus_two_photon(atom, 0.1, n_max), 1.0) + loss_dissipator(kappa, 0.0, n_max)


def stationary_of(generator):
    report = spectrum(generator, 1)
    rho = unvec(report.right_modes[:, 0])
    return rho / np.trace(rho)


def test_zero_steps_return_input(rng):
    rho = random_density_matrix(rng, 6)
    superop = discrete_map(kraus_two_photon(AtomState.from_excited(0.4), 0.9, 6))
    assert np.array_equal(evolve_discrete(superop, rho, 0)[0][1], rho)
    assert np.abs(evolve_continuous(superop - np.eye(36), rho, [0.0])[0][1] - rho).max() < 1e-15


@pytest.mark.parametrize(
    "K, c_e, expected_atoms",
    [(1, 0.2, 100), (5, 0.65, 1000), (15, 0.65, 15000)],
)
def test_vacuum_reaches_pure_state_within_expected_atom_count(K, c_e, expected_atoms):
    atom = AtomState.from_excited(c_e)
    phi = phi_for_wall(20, K)
    target, _ = pure_sector(atom, phi, 24, 1)
    superop = discrete_map(kraus_two_photon(atom, phi, 24))
    stride = max(expected_atoms // 100, 1)
    trajectory = evolve_discrete(superop, ket_to_dm(basis(24, 0)), 2 * expected_atoms, stride)
    reached = [k for k, rho in trajectory if fidelity(target, rho) >= 0.99]
    assert reached
    assert expected_atoms / 2 <= reached[0] <= 2 * expected_atoms


def test_parity_constant_along_trajectory():
    atom = AtomState.from_excited(0.5)
    superop = discrete_map(kraus_two_photon(atom, 0.8, 16))
    rho = ket_to_dm(coherent_state(16, 1.0))
    parity = parity_op(16)
    initial = np.trace(parity @ rho).real
    for _, state in evolve_discrete(superop, rho, 200, 10):
        assert abs(np.trace(parity @ state).real - initial) < 1e-10


def test_long_discrete_run_stays_normalized():
    atom = AtomState.from_excited(0.65)
    phi = phi_for_wall(20, 5)
    kraus = kraus_two_photon(atom, phi, 24)
    for _, rho in evolve_kraus_at(kraus, ket_to_dm(basis(24, 0)), [10**5]):
        assert abs(np.trace(rho) - 1) < 1e-8
        assert np.abs(rho - rho.conj().T).max() < 1e-8


def test_discrete_strategies_agree():
    kraus = kraus_two_photon(AtomState.from_excited(0.4), 0.6, 12)
    superop = discrete_map(kraus)
    rho = ket_to_dm(coherent_state(12, 0.7))
    stepped = dict(evolve_discrete(superop, rho, 64, 16))
    squared = dict(evolve_discrete_at(superop, rho, [16, 32, 64]))
    applied = dict(evolve_kraus_at(kraus, rho, [16, 32, 64]))
    for k in (16, 32, 64):
        assert np.abs(stepped[k] - squared[k]).max() < 1e-10
        assert np.abs(stepped[k] - applied[k]).max() < 1e-10


def test_pure_loss_decays_coherent_amplitude():
    kappa, alpha = 0.4, 1.5
    rho = ket_to_dm(coherent_state(30, alpha))
    for t, state in evolve_continuous(loss_dissipator(kappa, 0.0, 30), rho, [0.5, 2.0, 5.0]):
        expected = ket_to_dm(coherent_state(30, alpha * np.exp(-kappa * t / 2)))
        assert np.abs(state - expected).max() < 1e-6


def test_stepped_propagation_matches_dense(monkeypatch):
    generator = cat_regime_generator(12, 0.01)
    rho = ket_to_dm(coherent_state(12, 0.6))
    times = [0.0, 1.0, 10.0, 100.0]
    dense = evolve_continuous(generator, rho, times)
    monkeypatch.setattr(evolve_module, "DENSE_LIMIT", 10)
    stepped = evolve_continuous(generator, rho, times)
    for (_, first), (_, second) in zip(dense, stepped):
        assert np.abs(first - second).max() < 1e-8


def test_continuous_eigenvalues_follow_discrete_ones():
    nu = 2.5
    kraus = kraus_two_photon(AtomState.from_excited(0.35), 0.9, 8)
    mapped = nu * (np.linalg.eigvals(discrete_map(kraus)) - 1)
    continuous = np.linalg.eigvals(generator_L0(kraus, nu))
    distances = np.abs(mapped[:, None] - continuous[None, :])
    assert distances.min(axis=1).max() < 1e-8
    assert distances.min(axis=0).max() < 1e-8


def test_discrete_and_continuous_fixed_points_coincide():
    kraus = kraus_two_photon(AtomState.from_excited(0.35), 0.9, 10)
    generator = generator_L0(kraus, 1.0) + loss_dissipator(0.02, 0.1, 10)
    rho = stationary_of(generator)
    superop = np.eye(100) + generator
    assert np.abs(superop @ vec(rho) - vec(rho)).max() < 1e-10


def test_thermal_generator_has_two_stationary_states():
    spec = ThermalAtomSpec(p1=0.7, p3=0.3)
    generator = discrete_map(kraus_thermal_atom(spec, 0.8, (0.0, 0.0), 12)) - np.eye(144)
    report = spectrum(generator, 4)
    assert np.sum(np.abs(report.eigenvalues) < 1e-9) >= 2


def test_pure_loss_spectrum():
    kappa, n_max = 0.3, 7
    report = spectrum(loss_dissipator(kappa, 0.0, n_max))
    expected = np.sort([-kappa * (n + m) / 2 for n in range(n_max) for m in range(n_max)])
    assert np.abs(np.sort(report.eigenvalues.real) - expected).max() < 1e-8
    assert np.abs(report.eigenvalues.imag).max() < 1e-8


def test_spectrum_ordering_and_biorthogonality():
    generator = cat_regime_generator(10, 0.05)
    report = spectrum(generator, 8)
    assert np.all(np.diff(report.eigenvalues.real) <= 1e-12)
    assert abs(report.eigenvalues[0]) < 1e-9
    overlaps = report.left_modes.conj().T @ report.right_modes
    assert np.abs(np.diag(overlaps) - 1).max() < 1e-8


def test_spectrum_rejects_growing_generator():
    with pytest.raises(EigensolverError):
        spectrum(np.eye(4))


def test_metastable_gap_flag_in_cat_regime():
    report = spectrum(cat_regime_generator(20, 1e-6), 4)
    assert abs(report.eigenvalues[1].real / report.eigenvalues[2].real) <= 0.1
    assert report.metastable_flags[1]


def test_fidelity_trace_endpoint():
    generator = cat_regime_generator(10, 0.05)
    trajectory = evolve_continuous(generator, ket_to_dm(basis(10, 0)), [0.0, 1.0, 5.0])
    assert abs(fidelity_trace(trajectory, trajectory[-1][1])[-1][1] - 1) < 1e-8


def test_cat_regime_fidelity_shows_two_plateaus():
    generator = cat_regime_generator(20, 1e-6)
    target = stationary_of(generator)
    times = np.logspace(-1, 9, 41)
    trajectory = evolve_continuous(generator, ket_to_dm(coherent_state(20, 0.6)), times)
    values = [f for _, f in fidelity_trace(trajectory, target)]
    plateaus = find_plateaus(times, values)
    assert len(plateaus) >= 2
    assert plateaus[0][1] < plateaus[1][0]


def test_fidelity_converges_within_ten_relaxation_times():
    atom = AtomState.from_excited(0.3)
    generator = generator_L0(kraus_two_photon(atom, 0.7, 20), 1.0) + loss_dissipator(0.05, 0.0, 20)
    report = spectrum(generator, 2)
    target = stationary_of(generator)
    times = np.linspace(0, 10 / abs(report.eigenvalues[1].real), 40)
    values = [f for _, f in fidelity_trace(evolve_continuous(generator, ket_to_dm(basis(20, 0)), times), target)]
    assert values[-1] >= 1 - 1e-3
    assert np.min(np.diff(values)) > -1e-9


def test_find_plateaus_on_synthetic_steps():
    times = np.logspace(0, 8, 81)
    values = np.where(times < 1e3, 0.5, 0.9)
    assert find_plateaus(times, values) == [(1.0, pytest.approx(10 ** 2.9)), (pytest.approx(1e3), pytest.approx(1e8))]


@given(st.floats(0.05, 0.95), st.floats(0.1, 2.0), st.sampled_from([0.0, 0.1, 1.0, 100.0]))
def test_propagation_keeps_trace_and_positivity(c_e, phi, t):
    generator = generator_L0(kraus_two_photon(AtomState.from_excited(c_e), phi, 8), 1.0) + loss_dissipator(0.1, 0.2, 8)
    rho = ket_to_dm(coherent_state(8, 0.5))
    _, state = evolve_continuous(generator, rho, [t])[0]
    assert abs(np.trace(state) - 1) < 1e-9
    assert np.linalg.eigvalsh(state).min() >= -1e-8


def test_parity_conserved_under_ideal_generator():
    generator = generator_L0(kraus_two_photon(AtomState.from_excited(0.4), 0.8, 12), 1.0)
    parity = parity_superop(12)
    assert np.abs(generator @ parity - parity @ generator).max() < 1e-12
    rho = ket_to_dm(coherent_state(12, 0.9))
    initial = np.trace(parity_op(12) @ rho).real
    for _, state in evolve_continuous(generator, rho, [1.0, 10.0, 100.0]):
        assert abs(np.trace(parity_op(12) @ state).real - initial) < 1e-10


def uniform_params(ratio, phi):
    detuning = float(ratio)
    return ModelParams.uniform(1.0, detuning, phi * detuning)


def test_full_model_completeness_and_parity():
    params = uniform_params(10, 0.8)
    kraus = full_model_map(params, AtomState.from_excited(0.4), 10)
    assert kraus.completeness_error() < 1e-10
    parity = parity_op(10)
    for j, op in enumerate(kraus.operators[:5]):
        assert np.abs(op @ parity - (-1) ** (j + 1) * parity @ op).max() < 1e-12


def test_full_model_propagator_respects_excitation_blocks():
    params = uniform_params(5, 0.5)
    blocks = full_model_propagator(params, 6)
    excitations = (0, 1, 2, 3, 4, 3)
    for (out_level, in_level), matrix in blocks.items():
        rows, columns = np.nonzero(matrix)
        totals_out = rows + excitations[out_level]
        totals_in = columns + excitations[in_level]
        assert np.array_equal(totals_out, totals_in)


def test_block_hamiltonian_is_hermitian():
    params = ModelParams((0.3, 0.5 + 0.2j, 0.4, 0.1j), (5.0, 7.0, -7.0, -6.0), 3.0, 0.2 - 0.1j, 1.0)
    for excitations in range(6):
        matrix, states = block_hamiltonian(params, excitations, 8)
        assert np.abs(matrix - matrix.conj().T).max() == 0
        assert len(states) == matrix.shape[0]


def test_full_model_requires_resonance():
    params = ModelParams((1, 1, 1, 1), (10.0, 10.0, -9.0, -10.0), -20.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        full_model_map(params, AtomState.from_excited(0.3), 6)


def plateau_end(ratio, c_e=0.3, phi=1.0, n_max=24):
    params = uniform_params(ratio, phi)
    atom = AtomState.from_excited(c_e)
    phi_two, atom_two = equivalent_two_photon(params, atom)
    target = pure_stationary(atom_two, phi_two, n_max).psi_plus
    superop = discrete_map(full_model_map(params, atom, n_max))
    ks = np.unique(np.round(np.logspace(0, 4, 81)).astype(int))
    values = np.array([fidelity(target, rho) for _, rho in evolve_discrete_at(superop, ket_to_dm(basis(n_max, 0)), ks)])
    return values.max(), ks[values >= 0.99].max()


def test_full_model_plateau_lengthens_with_detuning():
    best_30, end_30 = plateau_end(30)
    best_60, end_60 = plateau_end(60)
    assert best_30 >= 0.99 and best_60 >= 0.99
    assert end_60 >= 3 * end_30
