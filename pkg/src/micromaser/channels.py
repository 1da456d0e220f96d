"""Quantum channels and Lindblad generators of the two-photon micromaser.

Superoperators act on column-stacked density matrices: vec(rho)[i + n*j] = rho[i, j],
so vec(A rho B) = kron(B.T, A) vec(rho).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec

from .errors import ConvergenceError
from .fock import annihilation_op, check_dim, number_op, parity_signs

COMPLETENESS_TOLERANCE = 1e-10


@dataclass(frozen=True)
class AtomState:
    """Atom prepared in c_g|1> + c_e|3>."""

    c_g: complex
    c_e: complex

    def __post_init__(self):
        norm = abs(self.c_g) ** 2 + abs(self.c_e) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"atom amplitudes not normalized: |c_g|^2 + |c_e|^2 = {norm}")

    @classmethod
    def from_excited(cls, c_e):
        """Atom with real amplitudes c_e and c_g = sqrt(1 - c_e^2)."""
        return cls(complex(np.sqrt(1.0 - abs(c_e) ** 2)), complex(c_e))

    def orthogonal(self):
        """The orthogonal superposition c_e*|1> - c_g*|3>."""
        return AtomState(np.conj(self.c_e), -np.conj(self.c_g))


@dataclass(frozen=True)
class CouplingSpec:
    phi: float
    nu: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")


@dataclass(frozen=True)
class NoiseSpec:
    kappa: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        if self.kappa < 0 or self.n_th < 0:
            raise ValueError("noise rates must be non-negative")


@dataclass(frozen=True)
class KrausSet:
    """A channel as Kraus operators with labels naming the outgoing atom level."""

    operators: tuple
    labels: tuple = field(default=())

    def __post_init__(self):
        ops = tuple(np.asarray(op, dtype=complex) for op in self.operators)
        object.__setattr__(self, "operators", ops)
        labels = tuple(self.labels) if self.labels else tuple(str(k) for k in range(len(ops)))
        if len(labels) != len(ops):
            raise ValueError("one label per Kraus operator required")
        object.__setattr__(self, "labels", labels)

    def __getitem__(self, label):
        return self.operators[self.labels.index(label)]

    def __iter__(self):
        return iter(self.operators)

    def __len__(self):
        return len(self.operators)

    @property
    def dim(self):
        return self.operators[0].shape[0]

    def completeness_error(self):
        total = sum(op.conj().T @ op for op in self.operators)
        return float(np.abs(total - np.eye(self.dim)).max())

    def apply(self, rho):
        return sum(op @ rho @ op.conj().T for op in self.operators)


@dataclass(frozen=True)
class ThermalAtomSpec:
    """Atom populations p_j for levels 0..4 and the auxiliary level."""

    p0: float = 0.0
    p1: float = 1.0
    p2: float = 0.0
    p3: float = 0.0
    p4: float = 0.0
    p_aux: float = 0.0

    def __post_init__(self):
        values = (self.p0, self.p1, self.p2, self.p3, self.p4, self.p_aux)
        if min(values) < 0 or abs(sum(values) - 1.0) > 1e-12:
            raise ValueError("populations must be non-negative and sum to one")

    @classmethod
    def from_energies(cls, energies, temperature):
        """Boltzmann populations for energies (E_0..E_4, E_aux) in units with k_B = 1."""
        energies = np.asarray(energies, dtype=float)
        weights = np.exp(-(energies - energies.min()) / temperature)
        return cls(*(weights / weights.sum()))


@dataclass(frozen=True)
class MixedAtomSpec:
    """Atom state p_a|psi_a><psi_a| + p_b|psi_b><psi_b| + sum_j p_j|j><j|."""

    atom: AtomState
    p_a: float = 1.0
    p_b: float = 0.0
    p0: float = 0.0
    p2: float = 0.0
    p4: float = 0.0
    p_aux: float = 0.0

    def __post_init__(self):
        values = (self.p_a, self.p_b, self.p0, self.p2, self.p4, self.p_aux)
        if min(values) < 0 or abs(sum(values) - 1.0) > 1e-12:
            raise ValueError("probabilities must be non-negative and sum to one")


def ladder_angles(phi, n_max):
    """sin_n(phi) and cos_n(phi) with theta_n = phi sqrt((n+1)(n+2)), n = 0..n_max-1.

    Pairs |e,n> <-> |g,n+2> with n + 2 >= n_max fall outside the truncated space;
    they are treated as uncoupled (sin = 0, cos = 1) so the truncated channel is exact.
    """
    n = np.arange(n_max)
    theta = phi * np.sqrt((n + 1.0) * (n + 2.0))
    sines = np.sin(theta)
    cosines = np.cos(theta)
    sines[n >= n_max - 2] = 0.0
    cosines[n >= n_max - 2] = 1.0
    return sines, cosines


def kraus_two_photon(atom, phi, n_max):
    """Two-photon Kraus operators M_g = <1|U|psi_at>, M_e = <3|U|psi_at>.

    M_g = c_g cos(phi sqrt(a^dag2 a^2)) - i c_e a^dag2 sin(phi sqrt(a^2 a^dag2))/sqrt(a^2 a^dag2),
    M_e = c_e cos(phi sqrt(a^2 a^dag2)) - i c_g sin(phi sqrt(a^2 a^dag2))/sqrt(a^2 a^dag2) a^2,
    evaluated on the Fock diagonal.
    """
    n_max = check_dim(n_max)
    sines, cosines = ladder_angles(phi, n_max)
    n = np.arange(n_max)
    lower_cos = np.ones(n_max)
    lower_cos[2:] = cosines[: n_max - 2]
    m_g = np.diag(atom.c_g * lower_cos).astype(complex)
    m_e = np.diag(atom.c_e * cosines).astype(complex)
    idx = n[: n_max - 2]
    m_g[idx + 2, idx] = -1j * atom.c_e * sines[idx]
    m_e[idx, idx + 2] = -1j * atom.c_g * sines[idx]
    return KrausSet((m_g, m_e), ("g", "e"))


def shifted_kraus(kraus, atom):
    """Jump operators M_g - c_g I and M_e + c_e I, for which the pure stationary states are dark."""
    identity = np.eye(kraus.dim)
    return KrausSet(
        (kraus["g"] - atom.c_g * identity, kraus["e"] + atom.c_e * identity),
        ("g", "e"),
    )


def sandwich(left, right):
    """Superoperator of rho -> left rho right."""
    return np.kron(right.T, left)


def discrete_map(kraus):
    """Superoperator of rho -> sum_j M_j rho M_j^dag."""
    return sum(sandwich(op, op.conj().T) for op in kraus)


def generator_L0(kraus, nu):
    """Averaged micromaser generator nu (M - I)."""
    superop = discrete_map(kraus)
    return nu * (superop - np.eye(superop.shape[0]))


def dissipator(jump):
    """Superoperator of D[J] rho = J rho J^dag - {J^dag J, rho}/2."""
    identity = np.eye(jump.shape[0])
    jj = jump.conj().T @ jump
    return sandwich(jump, jump.conj().T) - 0.5 * (sandwich(jj, identity) + sandwich(identity, jj))


def hamiltonian_superop(hamiltonian):
    """Superoperator of -i[H, rho]."""
    identity = np.eye(hamiltonian.shape[0])
    return -1j * (sandwich(hamiltonian, identity) - sandwich(identity, hamiltonian))


def lindblad_from_jumps(jumps, nu=1.0):
    return nu * sum(dissipator(jump) for jump in jumps)


def loss_dissipator(kappa, n_th, n_max):
    """Single-photon exchange with a bath: kappa(n_th+1) D[a] + kappa n_th D[a^dag]."""
    if kappa < 0 or n_th < 0:
        raise ValueError("kappa and n_th must be non-negative")
    a = annihilation_op(n_max)
    superop = kappa * (n_th + 1.0) * dissipator(a)
    if n_th > 0:
        superop = superop + kappa * n_th * dissipator(a.conj().T)
    return superop


def parity_superop(n_max):
    """Superoperator of rho -> P rho P."""
    signs = parity_signs(n_max)
    return np.diag(np.kron(signs, signs)).astype(complex)


def phase_operators(phi2, phi3, n_max):
    """Kraus operators for atoms passing in the far-detuned levels 0, 2, 4.

    phi2 = |g_2|^2 tau / Delta, phi3 = |g_3|^2 tau / Delta.
    """
    n = np.arange(n_max)
    m0 = np.diag(np.exp(1j * phi2 * n))
    m2 = np.diag(np.exp(-1j * (phi2 + phi3) * (n + 1)))
    m4 = np.diag(np.exp(1j * phi3 * (n + 1)))
    return m0, m2, m4


def kraus_mixed_atom(spec, phi, stark_phases, n_max):
    """Kraus set for an atom mixed between |psi_a>, |psi_b> and the levels 0, 2, 4, aux."""
    phi2, phi3 = stark_phases
    kraus_a = kraus_two_photon(spec.atom, phi, n_max)
    kraus_b = kraus_two_photon(spec.atom.orthogonal(), phi, n_max)
    m0, m2, m4 = phase_operators(phi2, phi3, n_max)
    weighted = [
        (spec.p_a, kraus_a["g"], "ga"),
        (spec.p_a, kraus_a["e"], "ea"),
        (spec.p_b, kraus_b["g"], "gb"),
        (spec.p_b, kraus_b["e"], "eb"),
        (spec.p0, m0, "0"),
        (spec.p2, m2, "2"),
        (spec.p4, m4, "4"),
        (spec.p_aux, np.eye(n_max), "a"),
    ]
    return KrausSet(
        tuple(np.sqrt(p) * op for p, op, _ in weighted),
        tuple(label for _, _, label in weighted),
    )


def kraus_thermal_atom(spec, phi, stark_phases, n_max):
    """Kraus set for an atom in a statistical mixture of its levels."""
    phi2, phi3 = stark_phases
    ground = kraus_two_photon(AtomState(1.0, 0.0), phi, n_max)
    excited = kraus_two_photon(AtomState(0.0, 1.0), phi, n_max)
    m0, m2, m4 = phase_operators(phi2, phi3, n_max)
    weighted = [
        (spec.p1, ground["g"], "gg"),
        (spec.p1, ground["e"], "eg"),
        (spec.p3, excited["g"], "ge"),
        (spec.p3, excited["e"], "ee"),
        (spec.p0, m0, "0"),
        (spec.p2, m2, "2"),
        (spec.p4, m4, "4"),
        (spec.p_aux, np.eye(n_max), "a"),
    ]
    return KrausSet(
        tuple(np.sqrt(p) * op for p, op, _ in weighted),
        tuple(label for _, _, label in weighted),
    )


def weak_coupling_generator(atom, phi, nu, n_max, phi_sq=None, mixed=None, stark_phases=(0.0, 0.0)):
    """Small-phi limit: two-photon drive and two-photon loss.

    -i[g* a^2 + g a^dag2, rho] + kappa_2ph D[a^2] with g = nu c_g* c_e phi and
    kappa_2ph = nu |c_g|^2 phi^2. ``phi_sq`` replaces phi^2 (for beam averages).
    With a MixedAtomSpec ``mixed`` the drive is weighted by p_a - p_b, losses by p_a,
    two-photon gain nu p_b |c_g|^2 phi^2 D[a^dag2] is added, and the level 0, 2, 4
    phase kicks add a number Hamiltonian and number dephasing.
    """
    if abs(phi) * n_max > 1.0:
        warnings.warn("weak-coupling generator used outside |phi| n_max << 1", stacklevel=2)
    if phi_sq is None:
        phi_sq = phi**2
    a = annihilation_op(n_max)
    a2 = a @ a
    p_a, p_b = (1.0, 0.0) if mixed is None else (mixed.p_a, mixed.p_b)
    drive = nu * (p_a - p_b) * np.conj(atom.c_g) * atom.c_e * phi
    hamiltonian = np.conj(drive) * a2 + drive * a2.conj().T
    superop = hamiltonian_superop(hamiltonian)
    superop = superop + nu * p_a * abs(atom.c_g) ** 2 * phi_sq * dissipator(a2)
    if mixed is not None:
        phi2, phi3 = stark_phases
        if p_b > 0:
            superop = superop + nu * p_b * abs(atom.c_g) ** 2 * phi_sq * dissipator(a2.conj().T)
        # Sign follows from expanding exp(i phi2 n) etc. to first order.
        omega0 = -nu * (phi2 * (mixed.p0 - mixed.p2) + phi3 * (mixed.p4 - mixed.p2))
        gamma0 = nu * (mixed.p0 * phi2**2 + mixed.p2 * (phi2 + phi3) ** 2 + mixed.p4 * phi3**2)
        number = number_op(n_max)
        superop = superop + hamiltonian_superop(omega0 * number) + gamma0 * dissipator(number)
    return superop


def gauss_hermite_phis(phi_mean, phi_sigma, order):
    """Nodes and weights of a Gaussian in phi truncated to phi > 0."""
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    phis = phi_mean + np.sqrt(2.0) * phi_sigma * nodes
    weights = weights / np.sqrt(np.pi)
    keep = phis > 0
    return phis[keep], weights[keep] / weights[keep].sum()


def sample_phis(phi_mean, phi_sigma, count, rng):
    """Draw ``count`` couplings from a Gaussian truncated to phi > 0."""
    samples = np.empty(count)
    filled = 0
    while filled < count:
        draw = rng.normal(phi_mean, phi_sigma, size=count - filled)
        draw = draw[draw > 0]
        samples[filled : filled + draw.size] = draw
        filled += draw.size
    return samples


@dataclass(frozen=True)
class GaussQuadrature:
    order: int = 21


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = 100
    seed: int = 0


def beam_averaged_map(atom, phi_mean, phi_sigma, n_max, scheme=GaussQuadrature(), check=True):
    """Single-atom map averaged over a Gaussian spread of the integrated coupling."""
    if phi_sigma < 0:
        raise ValueError("phi_sigma must be non-negative")
    if phi_sigma == 0:
        return discrete_map(kraus_two_photon(atom, phi_mean, n_max))
    if isinstance(scheme, MonteCarlo):
        rng = np.random.default_rng(scheme.seed)
        phis = sample_phis(phi_mean, phi_sigma, scheme.samples, rng)
        return sum(discrete_map(kraus_two_photon(atom, phi, n_max)) for phi in phis) / len(phis)
    result = _gauss_average(atom, phi_mean, phi_sigma, n_max, scheme.order)
    if check:
        refined = _gauss_average(atom, phi_mean, phi_sigma, n_max, 2 * scheme.order)
        change = np.abs(refined - result).max()
        if change > 1e-8:
            raise ConvergenceError(
                f"Gauss-Hermite order {scheme.order} changes by {change:.2e} when doubled"
            )
    return result


def _gauss_average(atom, phi_mean, phi_sigma, n_max, order):
    phis, weights = gauss_hermite_phis(phi_mean, phi_sigma, order)
    return sum(w * discrete_map(kraus_two_photon(atom, phi, n_max)) for phi, w in zip(phis, weights))


def decay_effective_atom(atom, decay, t_prep):
    """Atom state on arrival after decay toward uncoupled levels during t_prep."""
    gamma1, gamma3 = decay
    c_g = np.exp(-0.5 * gamma1 * t_prep) * atom.c_g
    c_e = np.exp(-0.5 * gamma3 * t_prep) * atom.c_e
    norm = np.sqrt(abs(c_g) ** 2 + abs(c_e) ** 2)
    return AtomState(c_g / norm, c_e / norm)


def decay_reduced_rate(atom, decay, t_prep, nu):
    """Rate of atoms still in the coupled levels on arrival."""
    gamma1, gamma3 = decay
    survive = np.exp(-gamma1 * t_prep) * abs(atom.c_g) ** 2 + np.exp(-gamma3 * t_prep) * abs(atom.c_e) ** 2
    return float(survive * nu)


def damped_kraus(atom, coupling, t, decay, n_max):
    """Kraus operators <1|U(t)|psi>, <3|U(t)|psi> under the non-Hermitian decay Hamiltonian.

    Each pair (|1,n+2>, |3,n>) evolves under [[-i G1/2, l* s], [l s, -i G3/2]] with
    s = sqrt((n+1)(n+2)); with d = (G1 - G3)/4 and W^2 = |l|^2 s^2 - d^2 the propagator
    is exp(-(G1+G3)t/4) [cos(W t) - i sin(W t)/W K], K the traceless part.
    """
    gamma1, gamma3 = decay
    lam = complex(coupling)
    n = np.arange(n_max)
    s = np.sqrt((n + 1.0) * (n + 2.0))
    delta = 0.25 * (gamma1 - gamma3)
    omega = np.sqrt(abs(lam) ** 2 * s**2 - delta**2 + 0j)
    cos_w = np.cos(omega * t)
    sinc_w = t * np.sinc(omega * t / np.pi)
    envelope = np.exp(-0.25 * (gamma1 + gamma3) * t)
    ground_diag = envelope * (cos_w - delta * sinc_w)
    excited_diag = envelope * (cos_w + delta * sinc_w)
    ground_from_excited = envelope * (-1j * np.conj(lam) * s * sinc_w)
    excited_from_ground = envelope * (-1j * lam * s * sinc_w)
    coupled = n < n_max - 2
    excited_diag = np.where(coupled, excited_diag, np.exp(-0.5 * gamma3 * t))
    lower = np.full(n_max, np.exp(-0.5 * gamma1 * t), dtype=complex)
    lower[2:] = ground_diag[: n_max - 2]
    m_g = np.diag(atom.c_g * lower)
    m_e = np.diag(atom.c_e * excited_diag)
    idx = n[: n_max - 2]
    m_g[idx + 2, idx] = atom.c_e * ground_from_excited[idx]
    m_e[idx, idx + 2] = atom.c_g * excited_from_ground[idx]
    return KrausSet((m_g, m_e), ("g", "e"))


def decay_modified_map(atom, coupling, tau, decay, t_prep, n_max, epsabs=1e-12, epsrel=1e-10):
    """Single-atom map with level decay toward uncoupled states.

    M(rho) = sum_j Mbar_j(tau) rho Mbar_j(tau)^dag
             + int_0^tau [G1 Mbar_g(t) rho Mbar_g(t)^dag + G3 Mbar_e(t) rho Mbar_e(t)^dag] dt,
    with the arrival state from ``decay_effective_atom``. The arrival rate reduction is
    given separately by ``decay_reduced_rate``.
    """
    gamma1, gamma3 = decay
    arrival = decay_effective_atom(atom, decay, t_prep)
    final = discrete_map(damped_kraus(arrival, coupling, tau, decay, n_max))
    if gamma1 == 0 and gamma3 == 0:
        return final

    def integrand(t):
        kraus = damped_kraus(arrival, coupling, t, decay, n_max)
        value = gamma1 * sandwich(kraus["g"], kraus["g"].conj().T)
        value = value + gamma3 * sandwich(kraus["e"], kraus["e"].conj().T)
        return np.concatenate([value.real.ravel(), value.imag.ravel()])

    integral, error = quad_vec(integrand, 0.0, tau, epsabs=epsabs, epsrel=epsrel, norm="max")
    if error > max(epsabs, epsrel * np.abs(integral).max()) * 10:
        raise ConvergenceError(f"decay-time integral error estimate {error:.2e}")
    size = final.size
    return final + (integral[:size] + 1j * integral[size:]).reshape(final.shape)
