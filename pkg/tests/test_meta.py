import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from micromaser.adiabatic import higher_order_kraus
from micromaser.channels import (
    AtomState,
    KrausSet,
    MixedAtomSpec,
    beam_averaged_map,
    decay_modified_map,
    discrete_map,
    generator_L0,
    kraus_mixed_atom,
    kraus_two_photon,
    loss_dissipator,
)
from micromaser.errors import DegenerateError, MicromaserError
from micromaser.evolve import LEVELS, ModelParams, equivalent_two_photon, evolve_continuous, evolve_discrete_at, spectrum, unvec
from micromaser.fock import basis, coherent_state, fidelity, ket_to_dm, number_op
from micromaser.meta import (
    DecayRates,
    DfsGenerator,
    LadderNoise,
    beam_dephasing_bound,
    combined_steady,
    decay_bounds,
    dephasing_generator,
    dfs_assemble,
    dfs_coordinates,
    dfs_eigen_and_classical,
    eff_correction_generator,
    eff_dephasing_rate,
    eff_loss_generator,
    hardwall_ladder,
    ladder_states,
    loss_eigenvalues_analytic,
    mixed_dephasing_bounds,
    x_closed_form,
)
from micromaser.steady import StationaryPair, conserved_coherence, pure_stationary
from micromaser.walls import phi_for_wall


def dfs_setup(c_e, phi, n_max):
    atom = AtomState.from_excited(c_e)
    kraus = kraus_two_photon(atom, phi, n_max)
    pair = pure_stationary(atom, phi, n_max)
    return atom, kraus, pair, conserved_coherence(generator_L0(kraus, 1.0), pair)


def trace_distance(first, second):
    return 0.5 * float(np.abs(np.linalg.eigvalsh(first - second)).sum())


def test_equal_means_close_the_coherence_gap():
    values = loss_eigenvalues_analytic(1.5, 1.5, 1.0, 0.2)
    assert values[1] == 0.0
    assert values[3] == pytest.approx(-0.2 * 3.0)


def test_loss_generator_matches_closed_form_eigenvalues():
    for c_e, phi in ((0.1, 0.1), (0.2, 1.0), (0.3, 0.7)):
        _, _, pair, coherence = dfs_setup(c_e, phi, 30)
        generator = eff_loss_generator(pair, coherence, 0.37)
        meta = generator.metadata
        numeric = np.sort(np.linalg.eigvals(generator.matrix).real)
        analytic = np.sort(loss_eigenvalues_analytic(meta["n_plus"], meta["n_minus"], meta["eta_loss"], 0.37))
        assert np.abs(numeric - analytic).max() < 1e-12
        assert generator.block_leakage() < 1e-12


def test_loss_overlap_examples():
    _, _, pair, coherence = dfs_setup(0.1, 0.1, 30)
    assert abs(abs(eff_loss_generator(pair, coherence, 1.0).metadata["eta_loss"]) - 1) < 1e-2
    _, _, pair, coherence = dfs_setup(0.2, 1.0, 30)
    meta = eff_loss_generator(pair, coherence, 1.0).metadata
    assert abs(abs(meta["eta_loss"]) - 0.99) < 0.02
    assert abs(meta["n_plus"] - 0.11) < 0.02
    assert abs(meta["n_minus"] - 1.01) < 0.02


def test_effective_loss_tracks_full_dynamics_in_the_cat_regime():
    kappa = 1e-6
    atom, kraus, pair, coherence = dfs_setup(0.1, 0.1, 20)
    generator = generator_L0(kraus, 1.0) + loss_dissipator(kappa, 0.0, 20)
    effective = eff_loss_generator(pair, coherence, kappa)
    rho = ket_to_dm(coherent_state(20, 0.6))
    start = dfs_coordinates(rho, pair, coherence)
    for t, state in evolve_continuous(generator, rho, [10.0, 1e2, 1e3, 1e4, 1e5]):
        projected = dfs_assemble(dfs_coordinates(state, pair, coherence), pair)
        predicted = dfs_assemble(effective.evolve(start, t), pair)
        assert trace_distance(projected, predicted) < 0.02


def test_classical_decomposition_in_the_cat_regime():
    _, _, pair, coherence = dfs_setup(0.1, 0.1, 30)
    report = dfs_eigen_and_classical(eff_loss_generator(pair, coherence, 1e-6), pair)
    assert report.classical
    assert abs(report.eigenvalues[1].real) <= 0.1 * abs(report.eigenvalues[2].real)
    meta = eff_loss_generator(pair, coherence, 1e-6).metadata
    assert report.eigenvalues[3].real == pytest.approx(-1e-6 * (meta["n_plus"] + meta["n_minus"]), rel=1e-10)
    assert report.gamma_loss == pytest.approx(0.5e-6 * (meta["n_plus"] + meta["n_minus"]))
    first, second = report.metastable_states
    assert abs(np.vdot(first, second)) < 1e-12


def test_jump_is_a_spin_flip_for_equal_means():
    pair = StationaryPair(basis(4, 0), basis(4, 1), AtomState.from_excited(0.1), 0.1, (4, 4))
    matrix = np.diag([0, 0, -2.0, -2.0]).astype(complex)
    report = dfs_eigen_and_classical(DfsGenerator(matrix, {"n_plus": 2.0, "n_minus": 2.0, "kappa": 1.0, "eta_loss": 1.0}), pair)
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    expected = (np.outer(plus, plus) - np.outer(minus, minus)) / np.sqrt(2)
    assert np.abs(report.jump - expected).max() < 1e-12


def test_combined_steady_examples():
    pair = pure_stationary(AtomState.from_excited(0.3), 0.7, 30)
    assert combined_steady(pair, (1.0, 3.0), (0.0, 0.0), 0.1, 1.0).p_plus == pytest.approx(0.75)
    assert combined_steady(pair, (1.0, 3.0), (0.2, 0.6), 0.0, 1.0).p_plus == pytest.approx(0.75)
    assert combined_steady(pair, (2.0, 2.0), (0.5, 0.5), 0.3, 1.0).p_plus == pytest.approx(0.5)
    state = combined_steady(pair, (1.0, 3.0), (0.2, 0.4), 0.1, 1.0)
    assert abs(np.vdot(pair.psi_plus, state.rho @ pair.psi_minus)) < 1e-12
    with pytest.raises(DegenerateError):
        combined_steady(pair, (1.0, 3.0), (0.0, 0.0), 0.0, 1.0)


def full_model_dfs(ratio, c_e=0.3, phi=1.0, n_max=24):
    params = ModelParams.uniform(1.0, float(ratio), phi * ratio)
    atom = AtomState.from_excited(c_e)
    phi_two, atom_two = equivalent_two_photon(params, atom)
    kraus = kraus_two_photon(atom_two, phi_two, n_max)
    pair = pure_stationary(atom_two, phi_two, n_max)
    coherence = conserved_coherence(generator_L0(kraus, 1.0), pair)
    full = higher_order_kraus(params, atom, n_max)
    return params, atom, pair, coherence, full


def test_swap_weight_closed_form_agrees_with_kraus_evaluation():
    errors = []
    for ratio in (30, 60, 120):
        params, atom, pair, coherence, full = full_model_dfs(ratio)
        meta = eff_correction_generator(pair, coherence, full, 1.0).metadata
        closed = (x_closed_form(params, atom, pair.psi_plus), x_closed_form(params, atom, pair.psi_minus))
        errors.append(max(abs(closed[0] / meta["X_plus"] - 1), abs(closed[1] / meta["X_minus"] - 1)))
    assert errors[0] < 0.1
    assert errors[2] < errors[0]


def test_correction_generator_predicts_full_model_populations():
    for ratio in (30, 120):
        _, _, pair, coherence, full = full_model_dfs(ratio)
        generator = eff_correction_generator(pair, coherence, full, 1.0)
        meta = generator.metadata
        predicted = meta["X_minus"] / (meta["X_minus"] + meta["X_plus"])
        report = spectrum(discrete_map(full) - np.eye(24 * 24), 1)
        rho = unvec(report.right_modes[:, 0])
        rho = rho / np.trace(rho)
        assert abs(np.vdot(pair.psi_plus, rho @ pair.psi_plus).real - predicted) < 0.02
        assert generator.block_leakage() < 1e-12
        assert abs(meta["eta"]) <= 1


def test_correction_generator_tracks_long_time_fidelity():
    _, _, pair, coherence, full = full_model_dfs(30)
    generator = eff_correction_generator(pair, coherence, full, 1.0)
    rho = ket_to_dm(basis(24, 0))
    start = dfs_coordinates(rho, pair, coherence)
    ks = np.unique(np.round(np.logspace(1, 4, 16)).astype(int))
    for k, state in evolve_discrete_at(discrete_map(full), rho, ks):
        predicted = dfs_assemble(generator.evolve(start, k), pair)
        assert abs(fidelity(pair.psi_plus, state) - fidelity(pair.psi_plus, predicted)) < 0.02


def test_ideal_kraus_give_zero_correction():
    atom, kraus, pair, coherence = dfs_setup(0.3, 0.7, 30)
    zero = np.zeros((30, 30))
    six_level = KrausSet((zero, kraus["g"], zero, kraus["e"], zero, zero), LEVELS)
    generator = eff_correction_generator(pair, coherence, six_level, 1.0)
    assert np.abs(generator.matrix).max() < 1e-10


def test_dephasing_rate_examples():
    atom, kraus, pair, coherence = dfs_setup(0.3, 0.7, 30)
    base = discrete_map(kraus)
    assert eff_dephasing_rate(base, base, pair, coherence, 1.0) == (0.0, 0.0)
    for sigma in (1e-3, 1e-2, 3e-2):
        omega, gamma = eff_dephasing_rate(beam_averaged_map(atom, 0.7, sigma, 30), base, pair, coherence, 1.0)
        assert abs(omega) < 1e-8
        assert -1e-10 <= gamma <= beam_dephasing_bound(pair, atom, sigma**2, 1.0)


@pytest.mark.parametrize(
    "weights",
    [(0.9, 0.05, 0.02, 0.02, 0.01, 0.0), (0.8, 0.0, 0.1, 0.0, 0.0, 0.1), (0.7, 0.1, 0.0, 0.1, 0.1, 0.0)],
)
@pytest.mark.parametrize("stark_phases", [(0.0, 0.0), (0.3, 0.2)])
def test_mixed_atom_dephasing_within_bounds(weights, stark_phases):
    atom, kraus, pair, coherence = dfs_setup(0.3, 0.7, 30)
    spec = MixedAtomSpec(atom, *weights)
    perturbed = discrete_map(kraus_mixed_atom(spec, 0.7, stark_phases, 30))
    omega, gamma = eff_dephasing_rate(perturbed, discrete_map(kraus), pair, coherence, 1.0)
    gamma_bound, omega_bound = mixed_dephasing_bounds(spec, 1.0)
    assert -1e-10 <= gamma <= gamma_bound
    assert abs(omega) <= omega_bound


def test_dephasing_generator_shape():
    matrix = dephasing_generator(0.2, 0.05).matrix
    assert matrix[2, 2] == -0.2j - 0.05 and matrix[3, 3] == 0.2j - 0.05
    assert np.count_nonzero(matrix) == 2


def test_decay_bound_examples():
    atom = AtomState.from_excited(0.4)
    zero = decay_bounds(atom, DecayRates(), 2.0, 1.0, 3.0)
    assert zero == {"gamma_deph_bound": 0.0, "omega_bound": 0.0, "nu_reduced": 3.0}
    uncoupled = DecayRates(uncoupled1=0.1, uncoupled3=0.2)
    short, long = (decay_bounds(atom, uncoupled, t, 1.0, 1.0) for t in (1.0, 5.0))
    assert short["gamma_deph_bound"] == long["gamma_deph_bound"]
    no_frequency = DecayRates(gamma13=0.2, uncoupled1=0.1, uncoupled3=0.3)
    assert decay_bounds(atom, no_frequency, 2.0, 1.0, 1.0)["omega_bound"] == 0.0
    with pytest.raises(ValueError):
        DecayRates(gamma01=-1.0)


def test_ladder_with_loss_balances_odd_wall_states():
    atom = AtomState.from_excited(0.3)
    phi = phi_for_wall(1, 1)
    ladder = hardwall_ladder(atom, phi, 14, LadderNoise(kappa=0.1))
    assert ladder.labels == [(0, "+"), (0, "-"), (1, "-")]
    distribution = ladder.stationary()
    assert ladder.detailed_balance(distribution)
    number = number_op(14)
    even = ladder.states[0]
    a_rho_a = np.diag(np.sqrt(np.arange(1, 14)), 1) @ even.rho @ np.diag(np.sqrt(np.arange(1, 14)), -1)
    for index in (1, 2):
        odd = ladder.states[index]
        feed = float(np.real(np.diag(a_rho_a))[odd.support].sum())
        mean_odd = float(np.trace(number @ odd.rho).real)
        assert distribution[index] / distribution[0] == pytest.approx(feed / mean_odd, rel=1e-9)


def test_ladder_without_noise_is_zero():
    ladder = hardwall_ladder(AtomState.from_excited(0.3), phi_for_wall(1, 1), 14, LadderNoise())
    assert np.all(ladder.rates == 0)


def test_ladder_states_stationary_under_ideal_dynamics():
    atom = AtomState.from_excited(0.3)
    phi = phi_for_wall(1, 1)
    kraus = kraus_two_photon(atom, phi, 14)
    for state in ladder_states(atom, phi, 14):
        assert np.abs(kraus.apply(state.rho) - state.rho).max() < 1e-10
        assert abs(np.trace(state.rho) - 1) < 1e-12


def trapping_index(ladder):
    return ladder.labels.index((0, "-"))


def test_excited_pumping_only_climbs():
    atom = AtomState(0.0, 1.0)
    phi = phi_for_wall(11, 1)
    for noise in (LadderNoise(kappa=0.1), LadderNoise(beam_sigma=0.01), LadderNoise(gamma1=0.1, tau=1.0)):
        ladder = hardwall_ladder(atom, phi, 16, noise)
        assert ladder.upward_only()
        assert ladder.states[trapping_index(ladder)].rho[11, 11] == 1
    assert hardwall_ladder(atom, phi, 16, LadderNoise(kappa=0.1)).out_rate(1) == pytest.approx(1.1)


def test_trapping_state_lifetime_matches_full_simulation():
    atom = AtomState(0.0, 1.0)
    phi = phi_for_wall(11, 1)
    rho = ket_to_dm(basis(16, 11))
    # Loss must stay slow against the pumping out of |10> and |12>, or photons return to |11>.
    kappa = 1e-4
    ladder = hardwall_ladder(atom, phi, 16, LadderNoise(kappa=kappa))
    rate = ladder.out_rate(trapping_index(ladder))
    generator = generator_L0(kraus_two_photon(atom, phi, 16), 1.0) + loss_dissipator(kappa, 0.0, 16)
    (t, state), = evolve_continuous(generator, rho, [1.0 / rate])
    assert abs(-np.log(state[11, 11].real) / t / rate - 1) < 0.1
    for noise, superop in (
        (LadderNoise(beam_sigma=0.01), beam_averaged_map(atom, phi, 0.01, 16)),
        (LadderNoise(gamma1=0.02, tau=1.0), decay_modified_map(atom, phi, 1.0, (0.02, 0.0), 0.0, 16)),
    ):
        ladder = hardwall_ladder(atom, phi, 16, noise)
        rate = ladder.out_rate(trapping_index(ladder))
        k = int(round(1.0 / rate))
        (_, state), = evolve_discrete_at(superop, rho, [k])
        assert abs(-np.log(state[11, 11].real) / k / rate - 1) < 0.1


@given(st.floats(0.05, 0.9), st.floats(0.1, 2.0), st.floats(1e-4, 1.0))
def test_loss_generator_invariants(c_e, phi, kappa):
    try:
        _, _, pair, coherence = dfs_setup(c_e, phi, 20)
    except MicromaserError:
        assume(False)
    generator = eff_loss_generator(pair, coherence, kappa)
    assert generator.block_leakage() < 1e-12 * max(1.0, kappa * 20)
    populations = generator.population_block
    assert populations[0, 1].real >= -1e-12 and populations[1, 0].real >= -1e-12
    assert np.abs(populations.sum(axis=0)).max() < 1e-10
    assert abs(generator.metadata["eta_loss"]) <= 1 + 1e-10
