"""Effective long-time dynamics on the decoherence-free subspace (DFS) of |Psi+>, |Psi->.

Generators are 4x4 matrices in the ordered basis
(|Psi+><Psi+|, |Psi-><Psi-|, |Psi+><Psi-|, |Psi-><Psi+|). Entry [i, j] is f_i(dL(B_j)) with
B_j the basis operators and f_i the conserved functionals Tr(P_even .), Tr(P_odd .),
Tr(L_pm .), Tr(L_mp .), i.e. the first-order projection of a perturbation dL onto the DFS.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .channels import KrausSet, dissipator, gauss_hermite_phis, generator_L0, kraus_two_photon, sandwich
from .errors import DegenerateError, KernelDimensionError
from .evolve import unvec, vec
from .fock import annihilation_op, expectation, number_op, parity_signs
from .steady import KERNEL_TOLERANCE
from .walls import coupling_angle, hard_walls_at

CLASSICAL_GAP = 0.1
CLASSICAL_ETA = 0.05
PARITY_SWAP_LABELS = ("0", "2", "4")


@dataclass(frozen=True)
class DfsGenerator:
    matrix: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def population_block(self):
        return self.matrix[:2, :2]

    @property
    def coherence_block(self):
        return self.matrix[2:, 2:]

    def block_leakage(self):
        """Largest entry coupling populations and coherences."""
        return float(max(np.abs(self.matrix[:2, 2:]).max(), np.abs(self.matrix[2:, :2]).max()))

    def __add__(self, other):
        merged = dict(self.metadata)
        merged.update(other.metadata)
        return DfsGenerator(self.matrix + other.matrix, merged)

    def evolve(self, coordinates, t):
        """DFS coordinates (p+, p-, c_pm, c_mp) at time t."""
        return scipy.linalg.expm(t * self.matrix) @ np.asarray(coordinates, dtype=complex)


def dfs_functionals(pair, coherence):
    """Conserved functionals as operators F with f(rho) = Tr(F rho)."""
    signs = parity_signs(pair.n_max)
    even = np.diag((signs > 0).astype(complex))
    odd = np.diag((signs < 0).astype(complex))
    return even, odd, coherence.L_pm, coherence.L_mp


def dfs_coordinates(rho, pair, coherence):
    """(p+, p-, c_pm, c_mp) of a density matrix."""
    return np.array([np.trace(f @ rho) for f in dfs_functionals(pair, coherence)])


def dfs_assemble(coordinates, pair):
    """Density matrix sum_j coordinates[j] B_j."""
    return sum(c * b for c, b in zip(coordinates, pair.basis()))


def dfs_projection(superop, pair, coherence):
    """First-order DFS generator G[i, j] = f_i(superop(B_j))."""
    functionals = dfs_functionals(pair, coherence)
    matrix = np.empty((4, 4), dtype=complex)
    for j, b in enumerate(pair.basis()):
        image = unvec(superop @ vec(b))
        for i, f in enumerate(functionals):
            matrix[i, j] = np.trace(f @ image)
    return matrix


def _mean_number(pair):
    number = number_op(pair.n_max)
    return (
        float(expectation(number, pair.psi_plus).real),
        float(expectation(number, pair.psi_minus).real),
    )


def _normalized_overlap(value, first, second):
    scale = np.sqrt(first * second)
    return complex(value / scale) if scale > 0 else 0j


def eff_loss_generator(pair, coherence, kappa):
    """DFS generator of single-photon loss kappa D[a] at zero temperature."""
    a = annihilation_op(pair.n_max)
    n_plus, n_minus = _mean_number(pair)
    matrix = kappa * dfs_projection(dissipator(a), pair, coherence)
    jump = a @ np.outer(pair.psi_minus, pair.psi_plus.conj()) @ a.conj().T
    eta = _normalized_overlap(np.trace(coherence.L_pm @ jump), n_plus, n_minus)
    metadata = {"n_plus": n_plus, "n_minus": n_minus, "eta_loss": eta, "kappa": float(kappa)}
    return DfsGenerator(matrix, metadata)


def loss_eigenvalues_analytic(n_plus, n_minus, eta, kappa):
    """Closed-form eigenvalues of the loss generator, descending real part."""
    total = n_plus + n_minus
    cross = 2.0 * abs(eta) * np.sqrt(n_plus * n_minus)
    return np.array(
        [0.0, -0.5 * kappa * (total - cross), -0.5 * kappa * (total + cross), -kappa * total]
    )


def _swap_expectations(kraus, pair):
    x_op = sum(kraus[j].conj().T @ kraus[j] for j in PARITY_SWAP_LABELS)
    return (
        float(expectation(x_op, pair.psi_plus).real),
        float(expectation(x_op, pair.psi_minus).real),
    )


def eff_correction_generator(pair, coherence, higher_order_kraus, nu):
    """DFS generator of nu (M - id) for the six-level Kraus set labelled 0..4, a."""
    superop = sum(sandwich(op, op.conj().T) for op in higher_order_kraus)
    superop = nu * (superop - np.eye(superop.shape[0]))
    matrix = dfs_projection(superop, pair, coherence)
    x_plus, x_minus = _swap_expectations(higher_order_kraus, pair)
    minus_plus = np.outer(pair.psi_minus, pair.psi_plus.conj())
    swapped = sum(higher_order_kraus[j] @ minus_plus @ higher_order_kraus[j].conj().T for j in PARITY_SWAP_LABELS)
    eta = _normalized_overlap(np.trace(coherence.L_pm @ swapped), x_plus, x_minus)
    omega = -float(matrix[2, 2].imag)
    metadata = {"X_plus": x_plus, "X_minus": x_minus, "eta": eta, "Omega": omega, "nu": float(nu)}
    return DfsGenerator(matrix, metadata)


def x_closed_form(params, atom, ket):
    """Second-order parity-swap weight <X> from the explicit adiabatic expansion.

    Cross-check only: the direct Kraus evaluation in eff_correction_generator is normative.
    """
    g1, g2, g3, g4 = params.g
    d1, detuning, _, d4 = params.detunings
    tau = params.tau
    n_max = ket.size
    n = np.arange(n_max, dtype=float)
    a = annihilation_op(n_max)
    stark2, stark3 = abs(g2) ** 2 / detuning, abs(g3) ** 2 / detuning
    weights = np.abs(ket) ** 2
    cg2, ce2 = abs(atom.c_g) ** 2, abs(atom.c_e) ** 2

    def mean(values):
        return float(weights @ values)

    total = 2 * cg2 * abs(g2) ** 2 / (detuning * d1) * mean(
        (n + 1) - (n + 1) * np.cos(tau * d1 + tau * stark2 * (n + 2))
    )
    total += 2 * cg2 * abs(g2) ** 2 / detuning**2 * mean(
        n - n * np.cos(tau * detuning + tau * (stark2 + stark3) * (n - 1))
    )
    total += 2 * ce2 * abs(g3) ** 2 / detuning**2 * mean(
        (n + 1) + (n + 1) * np.cos(tau * detuning + tau * (stark2 + stark3) * (n + 1))
    )
    total -= 2 * ce2 * abs(g3) ** 2 / (detuning * d4) * mean(
        n + n * np.cos(tau * (d4 - stark2 - stark3 * n))
    )
    # Interference of the two parity-swapping paths through level 2, written for
    # M_e Psi = -(c_e/c_g) M_g Psi on the dark states.
    sine = np.diag(np.sin(tau * detuning + tau * (n + 1) * (stark2 + stark3)))
    raising = a.conj().T @ a.conj().T @ sine
    coefficient = 2j * np.conj(g2 * atom.c_g) * np.conj(g3) * atom.c_e / detuning**2
    total += 2 * float(np.real(coefficient * expectation(raising, ket)))
    return total


def eff_dephasing_rate(perturbed_map, base_map, pair, coherence, nu):
    """(Omega, gamma_deph) from -i Omega - gamma_deph = nu Tr[L_pm dM(|Psi+><Psi-|)]."""
    delta = unvec((perturbed_map - base_map) @ vec(np.outer(pair.psi_plus, pair.psi_minus.conj())))
    value = nu * np.trace(coherence.L_pm @ delta)
    return float(-value.imag), float(-value.real)


def dephasing_generator(omega, gamma_deph):
    matrix = np.zeros((4, 4), dtype=complex)
    matrix[2, 2] = -1j * omega - gamma_deph
    matrix[3, 3] = 1j * omega - gamma_deph
    return DfsGenerator(matrix, {"Omega": omega, "gamma_deph": gamma_deph})


@dataclass(frozen=True)
class DecayRates:
    """gamma_jk from level k down to j; uncoupled_k toward levels outside the scheme."""

    gamma01: float = 0.0
    gamma03: float = 0.0
    gamma13: float = 0.0
    gamma23: float = 0.0
    uncoupled1: float = 0.0
    uncoupled3: float = 0.0

    def __post_init__(self):
        if min(self.gamma01, self.gamma03, self.gamma13, self.gamma23, self.uncoupled1, self.uncoupled3) < 0:
            raise ValueError("decay rates must be non-negative")

    @property
    def total1(self):
        return self.gamma01 + self.uncoupled1

    @property
    def total3(self):
        return self.gamma03 + self.gamma13 + self.gamma23 + self.uncoupled3


def decay_bounds(atom, rates, t_prep, tau, nu):
    """Bounds on dephasing and frequency from atom decay, and the reduced atom rate."""
    cg2, ce2 = abs(atom.c_g) ** 2, abs(atom.c_e) ** 2
    deph = 2 * ((rates.total1 - rates.uncoupled1) * cg2 + 2 * (rates.total3 - rates.uncoupled3 - rates.gamma13 * cg2) * ce2) * t_prep
    deph += 2 * max(rates.total1, rates.total3) * tau
    omega = (rates.gamma01 * cg2 + (rates.gamma03 + rates.gamma23) * ce2) * t_prep
    omega += (rates.gamma01 + rates.gamma03 + rates.gamma23) * tau
    reduced = 1 - (rates.uncoupled1 * cg2 + rates.uncoupled3 * ce2) * t_prep
    return {"gamma_deph_bound": nu * deph, "omega_bound": nu * omega, "nu_reduced": nu * reduced}


def beam_dephasing_bound(pair, atom, phi_variance, nu):
    """Upper bound on gamma_deph from a spread of the integrated coupling."""
    a = annihilation_op(pair.n_max)
    loss = a.conj().T @ a.conj().T @ a @ a
    # a^2 a^dag2 needs two extra levels above the truncation; pad before multiplying.
    padded = annihilation_op(pair.n_max + 2)
    gain = (padded @ padded @ padded.conj().T @ padded.conj().T)[: pair.n_max, : pair.n_max]

    def root_sum(op):
        return sum(np.sqrt(max(expectation(op, ket).real, 0.0)) for ket in (pair.psi_plus, pair.psi_minus))

    bracket = abs(atom.c_g) ** 2 * root_sum(loss) ** 2 + abs(atom.c_e) ** 2 * root_sum(gain) ** 2
    return nu * 0.5 * phi_variance * bracket


def mixed_dephasing_bounds(spec, nu):
    """(gamma_deph bound, |Omega| bound) for a mixed atom state."""
    return 2 * nu * (1 - spec.p_a - spec.p_aux), nu * (spec.p0 + spec.p2 + spec.p4)


@dataclass(frozen=True)
class DfsSpectrum:
    eigenvalues: np.ndarray
    classical: bool
    metastable_states: tuple
    gamma_loss: float
    jump: np.ndarray


def dfs_eigen_and_classical(generator, pair=None):
    """Eigenvalues, classical-metastability flag, |Psi_1,2>, gamma_loss and the parity-flip jump."""
    values = np.linalg.eigvals(generator.matrix)
    values = values[np.argsort(-values.real, kind="stable")]
    n_plus = generator.metadata.get("n_plus", 0.0)
    n_minus = generator.metadata.get("n_minus", 0.0)
    kappa = generator.metadata.get("kappa", 0.0)
    eta = generator.metadata.get("eta_loss", generator.metadata.get("eta", 0.0))
    gap = abs(values[1].real) <= CLASSICAL_GAP * abs(values[2].real)
    classical = bool(abs(abs(eta) - 1.0) < CLASSICAL_ETA and gap)
    states = ()
    if pair is not None:
        states = (
            (pair.psi_plus + pair.psi_minus) / np.sqrt(2.0),
            (pair.psi_plus - pair.psi_minus) / np.sqrt(2.0),
        )
    root = np.sqrt(n_plus * n_minus)
    norm = np.sqrt(n_plus + n_minus) * (np.sqrt(n_plus) + np.sqrt(n_minus))
    jump = np.zeros((2, 2), dtype=complex)
    if norm > 0:
        # Basis (|Psi+>, |Psi->): J = [(n+ + r)|+><-| + (n- + r)|-><+|] / N.
        jump[0, 1] = (n_plus + root) / norm
        jump[1, 0] = (n_minus + root) / norm
    return DfsSpectrum(values, classical, states, 0.5 * kappa * (n_plus + n_minus), jump)


@dataclass(frozen=True)
class MetaSteadyState:
    p_plus: float
    rho: np.ndarray


def combined_steady(pair, n_means, x_means, kappa, nu):
    """Weight on |Psi+> balancing loss and parity-swapping corrections."""
    n_plus, n_minus = n_means
    x_plus, x_minus = x_means
    denominator = kappa * (n_minus + n_plus) + nu * (x_minus + x_plus)
    if denominator == 0:
        raise DegenerateError("no parity-swapping process: steady weight undefined")
    p_plus = (kappa * n_minus + nu * x_minus) / denominator
    rho = p_plus * np.outer(pair.psi_plus, pair.psi_plus.conj())
    rho = rho + (1 - p_plus) * np.outer(pair.psi_minus, pair.psi_minus.conj())
    return MetaSteadyState(float(p_plus), rho)


@dataclass(frozen=True)
class LadderNoise:
    """Weak processes acting on the states between hard walls.

    parity_swap is an optional (M_0, M_2, M_4) tuple from the six-level Kraus set;
    beam_sigma is the standard deviation of the integrated coupling.
    """

    nu: float = 1.0
    kappa: float = 0.0
    parity_swap: tuple = ()
    gamma1: float = 0.0
    gamma3: float = 0.0
    gamma13: float = 0.0
    tau: float = 0.0
    beam_sigma: float = 0.0
    beam_order: int = 41


@dataclass(frozen=True)
class LadderState:
    parity: int
    k: int
    support: np.ndarray
    rho: np.ndarray

    @property
    def label(self):
        return (self.k, "+" if self.parity == 1 else "-")


@dataclass(frozen=True)
class LadderRates:
    """rates[i, j] is the transition rate from state j to state i; columns sum to zero."""

    states: tuple
    rates: np.ndarray

    @property
    def labels(self):
        return [state.label for state in self.states]

    def out_rate(self, index):
        return float(-self.rates[index, index])

    def components(self):
        """Groups of states connected by nonzero rates."""
        size = len(self.states)
        linked = (np.abs(self.rates) + np.abs(self.rates.T)) > 0
        unseen = set(range(size))
        groups = []
        while unseen:
            stack = [unseen.pop()]
            group = set(stack)
            while stack:
                node = stack.pop()
                for other in np.nonzero(linked[node])[0]:
                    if other in unseen:
                        unseen.remove(other)
                        group.add(other)
                        stack.append(other)
            groups.append(sorted(group))
        return sorted(groups)

    def stationary(self, weights=None):
        """Stationary distribution; ``weights`` assigns probability to each connected component."""
        groups = self.components()
        if weights is None:
            if len(groups) > 1:
                raise KernelDimensionError(f"{len(groups)} disconnected components: pass weights")
            weights = [1.0]
        if len(weights) != len(groups):
            raise ValueError("one weight per connected component required")
        distribution = np.zeros(len(self.states))
        for group, weight in zip(groups, weights):
            block = self.rates[np.ix_(group, group)]
            null = scipy.linalg.null_space(block, rcond=KERNEL_TOLERANCE)
            if null.shape[1] != 1:
                raise KernelDimensionError(f"component kernel has dimension {null.shape[1]}")
            vector = np.abs(null[:, 0])
            distribution[group] = weight * vector / vector.sum()
        return distribution

    def detailed_balance(self, distribution=None, tol=1e-9):
        distribution = self.stationary() if distribution is None else distribution
        flux = self.rates * distribution[None, :]
        off = flux - np.diag(np.diag(flux))
        scale = max(float(np.abs(off).max()), 1e-300)
        return bool(np.abs(off - off.T).max() <= tol * scale)

    def upward_only(self):
        """True when every same-parity transition raises the photon number."""
        for j, source in enumerate(self.states):
            for i, target in enumerate(self.states):
                if i != j and self.rates[i, j] > 0 and target.parity == source.parity:
                    if target.support[0] < source.support[0]:
                        return False
        return True

    def stationary_dm(self, distribution):
        return sum(p * state.rho for p, state in zip(distribution, self.states))


def _interval_state(atom, phi, start, stop, n_max):
    support = np.arange(start, stop + 1, 2)
    rho = np.zeros((n_max, n_max), dtype=complex)
    if atom.c_g == 0:
        # Excited atoms pump every state up to the wall: the trapping Fock state.
        rho[stop, stop] = 1.0
        return support, rho
    kraus = kraus_two_photon(atom, phi, n_max)
    restricted = KrausSet(tuple(op[np.ix_(support, support)] for op in kraus), kraus.labels)
    null = scipy.linalg.null_space(generator_L0(restricted, 1.0), rcond=KERNEL_TOLERANCE)
    if null.shape[1] != 1:
        raise KernelDimensionError(f"interval {start}..{stop} has {null.shape[1]} stationary states")
    block = null[:, 0].reshape(support.size, support.size, order="F")
    block = block / np.trace(block)
    rho[np.ix_(support, support)] = 0.5 * (block + block.conj().T)
    return support, rho


def ladder_states(atom, phi, n_max, walls=None):
    """Between-wall stationary states of both parities, lowest first.

    The top of the truncation acts as a final wall for each parity.
    """
    walls = hard_walls_at(phi, n_max) if walls is None else list(walls)
    states = []
    for parity, start in ((1, 0), (-1, 1)):
        positions = sorted(w.m for w in walls if w.m % 2 == start and w.m < n_max)
        top = n_max - 1 if (n_max - 1) % 2 == start else n_max - 2
        bounds = [m for m in positions if m < top] + [top]
        lower = start
        for k, upper in enumerate(bounds):
            support, rho = _interval_state(atom, phi, lower, upper, n_max)
            states.append(LadderState(parity, k, support, rho))
            lower = upper + 2
    return tuple(states)


def _average_sin_squared(phi, sigma, m, order):
    """Mean sin^2 at the hard wall m over the beam spread; exactly zero without spread."""
    if sigma == 0:
        return 0.0
    phis, weights = gauss_hermite_phis(phi, sigma, order)
    return float(weights @ np.sin(coupling_angle(phis, m)) ** 2)


def hardwall_ladder(atom, phi, n_max, noise, walls=None, states=None):
    """Classical rate matrix between the stationary states separated by hard walls."""
    states = ladder_states(atom, phi, n_max, walls) if states is None else tuple(states)
    size = len(states)
    rates = np.zeros((size, size))
    a = annihilation_op(n_max)
    projectors = [np.isin(np.arange(n_max), state.support) for state in states]
    for j, source in enumerate(states):
        images = []
        if noise.kappa > 0:
            images.append(noise.kappa * a @ source.rho @ a.conj().T)
        for op in noise.parity_swap:
            images.append(noise.nu * op @ source.rho @ op.conj().T)
        if images:
            image = np.real(np.diag(sum(images)))
            for i, target in enumerate(states):
                if target.parity != source.parity:
                    rates[i, j] += float(image[projectors[i]].sum())
    up_factor = abs(atom.c_e) ** 2
    down_factor = abs(atom.c_g) ** 2
    for j, source in enumerate(states):
        for i, target in enumerate(states):
            if target.parity != source.parity:
                continue
            if target.support[0] == source.support[-1] + 2:
                m = int(source.support[-1])
                leak = 0.5 * noise.gamma1 * noise.tau + _average_sin_squared(phi, noise.beam_sigma, m, noise.beam_order)
                if m >= n_max - 2:
                    continue
                rates[i, j] += noise.nu * up_factor * leak * float(source.rho[m, m].real)
            elif source.support[0] == target.support[-1] + 2:
                m = int(target.support[-1])
                leak = (4 * noise.gamma3 - 3 * noise.gamma13) * noise.tau / 8
                leak += _average_sin_squared(phi, noise.beam_sigma, m, noise.beam_order)
                rates[i, j] += noise.nu * down_factor * leak * float(source.rho[m + 2, m + 2].real)
    rates -= np.diag(rates.sum(axis=0))
    return LadderRates(states, rates)
