"""Time evolution, generator spectra, and the exact (5+1)-level atom-cavity map."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import expm_multiply

from .channels import AtomState, KrausSet, kraus_two_photon, sample_phis
from .errors import ConvergenceError, EigensolverError
from .fock import check_dim, fidelity

DENSE_LIMIT = 4096
GAP_FLAG_RATIO = 0.1
PLATEAU_SLOPE = 0.01
PLATEAU_DECADES = 1.0
LEVELS = ("0", "1", "2", "3", "4", "a")
EXCITATIONS = (0, 1, 2, 3, 4, 3)


def vec(rho):
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(vector):
    n_max = int(round(np.sqrt(vector.size)))
    return vector.reshape(n_max, n_max, order="F")


def _hermitize(rho):
    return 0.5 * (rho + rho.conj().T)


def evolve_discrete(superop, rho, k, stride=1):
    """States after 0, stride, 2 stride, ..., k atoms (k included)."""
    if k < 0 or stride < 1:
        raise ValueError("k must be non-negative and stride positive")
    state = vec(rho)
    trajectory = [(0, np.array(rho, dtype=complex))]
    for step in range(1, k + 1):
        state = superop @ state
        if step % stride == 0 or step == k:
            current = _hermitize(unvec(state))
            current = current / np.trace(current)
            state = vec(current)
            trajectory.append((step, current))
    return trajectory


def evolve_discrete_at(superop, rho, ks):
    """States after each atom count in ``ks`` (ascending) via repeated squaring."""
    ks = [int(k) for k in ks]
    if any(b < a for a, b in zip(ks, ks[1:])) or (ks and ks[0] < 0):
        raise ValueError("atom counts must be ascending and non-negative")
    state = vec(rho)
    previous = 0
    trajectory = []
    for k in ks:
        if k > previous:
            state = np.linalg.matrix_power(superop, k - previous) @ state
            current = _hermitize(unvec(state))
            state = vec(current / np.trace(current))
            previous = k
        trajectory.append((k, unvec(state).copy()))
    return trajectory


def evolve_continuous(generator, rho, times, tol=1e-9):
    """States e^{t L} rho at each time (ascending)."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ValueError("times must be ascending and non-negative")
    initial = vec(rho)
    trajectory = []
    if generator.shape[0] <= DENSE_LIMIT:
        for t in times:
            state = initial if t == 0 else scipy.linalg.expm(t * generator) @ initial
            trajectory.append((float(t), _hermitize(unvec(state))))
        return trajectory
    state = initial
    previous = 0.0
    for t in times:
        if t > previous:
            state = expm_multiply(generator * (t - previous), state, traceA=np.trace(generator) * (t - previous))
            if not np.all(np.isfinite(state)):
                raise ConvergenceError(f"Krylov propagation failed at t={t}")
            previous = t
        trajectory.append((float(t), _hermitize(unvec(state))))
    if abs(np.trace(trajectory[-1][1]) - 1.0) > max(tol, 1e-9) * 1e3:
        raise ConvergenceError("trace drift beyond tolerance in stepped propagation")
    return trajectory


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    right_modes: np.ndarray
    left_modes: np.ndarray
    gaps: np.ndarray = field(default=None)

    @property
    def metastable_flags(self):
        """True at k where |Re l_k| / |Re l_{k+1}| < 0.1."""
        return np.asarray(self.gaps) < GAP_FLAG_RATIO


def spectrum(generator, count=None):
    """Eigenvalues in descending real part with right and biorthonormal left modes."""
    try:
        values, left, right = scipy.linalg.eig(generator, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as error:
        raise EigensolverError(str(error)) from error
    order = np.argsort(-values.real, kind="stable")
    values, left, right = values[order], left[:, order], right[:, order]
    scale = max(float(np.abs(generator).max()), 1e-300)
    if values[0].real > 1e-9 * scale:
        raise EigensolverError(f"leading eigenvalue has positive real part {values[0].real:.3e}")
    if count is not None:
        values, left, right = values[:count], left[:, :count], right[:, :count]
    overlaps = np.einsum("ij,ij->j", left.conj(), right)
    left = left / overlaps.conj()[None, :]
    real = np.abs(values.real)
    with np.errstate(divide="ignore", invalid="ignore"):
        gaps = np.where(real[1:] > 0, real[:-1] / real[1:], np.inf)
    return SpectrumReport(values, right, left, gaps)


def fidelity_trace(trajectory, target):
    """(t, F[target; rho(t)]) for each logged state."""
    return [(t, fidelity(target, rho)) for t, rho in trajectory]


def find_plateaus(times, values, slope=PLATEAU_SLOPE, decades=PLATEAU_DECADES):
    """Maximal log-time windows of at least ``decades`` where |dF/dlog10 t| < slope."""
    log_t = np.log10(np.asarray(times, dtype=float))
    values = np.asarray(values, dtype=float)
    flat = np.abs(np.diff(values) / np.diff(log_t)) < slope
    plateaus = []
    start = None
    for index, is_flat in enumerate(np.append(flat, False)):
        if is_flat and start is None:
            start = index
        elif not is_flat and start is not None:
            if log_t[index] - log_t[start] >= decades:
                plateaus.append((float(10 ** log_t[start]), float(10 ** log_t[index])))
            start = None
    return plateaus


@dataclass(frozen=True)
class ModelParams:
    """Couplings g_1..g_4, detunings Delta_1..Delta_4, auxiliary detuning delta, Rabi G, time tau."""

    g: tuple
    detunings: tuple
    delta_aux: float
    G: complex
    tau: float

    def __post_init__(self):
        if len(self.g) != 4 or len(self.detunings) != 4:
            raise ValueError("four couplings and four detunings required")

    @classmethod
    def uniform(cls, g, detuning, tau):
        """Equal couplings, Delta_1 = Delta_2 = Delta, Delta_3 = Delta_4 = -Delta, G = 2g, delta = -2 Delta."""
        return cls((g, g, g, g), (detuning, detuning, -detuning, -detuning), -2.0 * detuning, 2.0 * g, tau)

    @classmethod
    def three_level(cls, g2, g3, detuning, tau):
        return cls((0.0, g2, g3, 0.0), (1.0, detuning, -detuning, -1.0), 1.0, 0.0, tau)

    @property
    def resonant(self):
        return abs(self.detunings[1] + self.detunings[2]) <= 1e-12 * abs(self.detunings[1])

    @property
    def detuning(self):
        return self.detunings[1]

    @property
    def two_photon_coupling(self):
        """lambda = -g_2 g_3 / Delta."""
        return -self.g[1] * self.g[2] / self.detuning

    def level_energies(self):
        d1, d2, d3, d4 = self.detunings
        cumulative = np.cumsum([0.0, d1, d2, d3, d4])
        return np.append(cumulative, self.delta_aux + d1 + d2 + d3)


def block_hamiltonian(params, excitations, n_max):
    """Hamiltonian on the conserved-excitation block; returns (matrix, [(level, photons)])."""
    energies = params.level_energies()
    states = [
        (level, excitations - EXCITATIONS[level])
        for level in range(6)
        if 0 <= excitations - EXCITATIONS[level] < n_max
    ]
    position = {state: index for index, state in enumerate(states)}
    hamiltonian = np.diag([energies[level] for level, _ in states]).astype(complex)
    for level, photons in states:
        # a g_j sigma_{j, j-1}: |j-1, n> -> sqrt(n) g_j |j, n-1>
        if 1 <= level <= 4 and (level - 1, photons + 1) in position:
            i, j = position[(level, photons)], position[(level - 1, photons + 1)]
            hamiltonian[i, j] += params.g[level - 1] * np.sqrt(photons + 1)
        if level == 5 and (3, photons) in position:
            i, j = position[(5, photons)], position[(3, photons)]
            hamiltonian[i, j] += params.G
    lower = np.tril(hamiltonian, -1)
    hamiltonian = np.diag(np.diag(hamiltonian)) + lower + lower.conj().T
    return hamiltonian, states


def full_model_propagator(params, n_max, time=None):
    """U(tau) as a dict (out_level, in_level) -> n_max x n_max photon matrix."""
    n_max = check_dim(n_max)
    time = params.tau if time is None else time
    blocks = {(j, i): np.zeros((n_max, n_max), dtype=complex) for j in range(6) for i in range(6)}
    for excitations in range(n_max + 4):
        hamiltonian, states = block_hamiltonian(params, excitations, n_max)
        if not states:
            continue
        values, vectors = np.linalg.eigh(hamiltonian)
        unitary = (vectors * np.exp(-1j * values * time)) @ vectors.conj().T
        for column, (level_in, n_in) in enumerate(states):
            for row, (level_out, n_out) in enumerate(states):
                blocks[(level_out, level_in)][n_out, n_in] = unitary[row, column]
    return blocks


def full_model_map(params, atom, n_max, require_resonance=True):
    """Six Kraus operators M_j = <j|U(tau)|psi_at> of the (5+1)-level model."""
    if require_resonance and not params.resonant:
        raise ValueError("two-photon resonance Delta_2 = -Delta_3 required")
    blocks = full_model_propagator(params, n_max)
    operators = tuple(atom.c_g * blocks[(j, 1)] + atom.c_e * blocks[(j, 3)] for j in range(6))
    return KrausSet(operators, LEVELS)


def equivalent_two_photon(params, atom):
    """Two-photon model (phi, atom) matching the adiabatic limit of the full model."""
    coupling = params.two_photon_coupling
    phase = np.conj(coupling) / abs(coupling)
    return abs(coupling) * params.tau, AtomState(atom.c_g, atom.c_e * phase)


def beam_trajectory_average(atom, phi_mean, phi_sigma, rho, ks, trajectories=100, seed=0):
    """Mean state over trajectories where every atom draws its own coupling from the beam spread."""
    ks = [int(k) for k in ks]
    if any(b < a for a, b in zip(ks, ks[1:])) or (ks and ks[0] < 0):
        raise ValueError("atom counts must be ascending and non-negative")
    if trajectories < 1:
        raise ValueError("at least one trajectory required")
    n_max = rho.shape[0]
    totals = [np.zeros((n_max, n_max), dtype=complex) for _ in ks]
    for stream in np.random.SeedSequence(seed).spawn(trajectories):
        rng = np.random.default_rng(stream)
        phis = sample_phis(phi_mean, phi_sigma, ks[-1] if ks else 0, rng) if phi_sigma > 0 else np.full(ks[-1] if ks else 0, phi_mean)
        state = np.array(rho, dtype=complex)
        step = 0
        for index, k in enumerate(ks):
            while step < k:
                kraus = kraus_two_photon(atom, phis[step], n_max)
                state = kraus.apply(state)
                step += 1
            totals[index] += state
    return [(k, _hermitize(total / trajectories)) for k, total in zip(ks, totals)]


def evolve_kraus_at(kraus, rho, ks, renormalize_every=1000):
    """States after each atom count in ``ks`` applying the Kraus set directly (cheap for small n_max)."""
    ks = [int(k) for k in ks]
    if any(b < a for a, b in zip(ks, ks[1:])) or (ks and ks[0] < 0):
        raise ValueError("atom counts must be ascending and non-negative")
    state = np.array(rho, dtype=complex)
    step = 0
    trajectory = []
    for k in ks:
        while step < k:
            state = kraus.apply(state)
            step += 1
            if step % renormalize_every == 0:
                state = _hermitize(state) / np.trace(state)
        trajectory.append((k, _hermitize(state) / np.trace(state).real))
    return trajectory
