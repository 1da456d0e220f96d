"""Stationary states: pure dark states from the two-photon recurrence, the decoherence-free
subspace projector with its conserved coherence, trapping and between-wall states, and
thermal-atom steady states.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channels import AtomState, generator_L0, KrausSet, kraus_two_photon
from .errors import (
    DegenerateError,
    DivergenceError,
    KernelDimensionError,
    NotStationaryError,
    TruncationError,
)
from .fock import TAIL_TOLERANCE, check_dim, ket_to_dm, parity_signs
from .walls import WALL_TOLERANCE, HardWall, coupling_angle, hard_walls_at

EIGEN_TOLERANCE = 1e-8
KERNEL_TOLERANCE = 1e-9
POLE_TOLERANCE = 1e-13
TAIL_EXTENSION = 400


@dataclass(frozen=True)
class StationaryPair:
    """Even and odd dark states; support_bound holds (even bound, odd bound)."""

    psi_plus: np.ndarray
    psi_minus: np.ndarray
    atom: AtomState
    phi: float
    support_bound: tuple

    @property
    def n_max(self):
        return self.psi_plus.size

    def basis(self):
        """DFS basis |Psi+><Psi+|, |Psi-><Psi-|, |Psi+><Psi-|, |Psi-><Psi+|."""
        plus, minus = self.psi_plus, self.psi_minus
        return (
            np.outer(plus, plus.conj()),
            np.outer(minus, minus.conj()),
            np.outer(plus, minus.conj()),
            np.outer(minus, plus.conj()),
        )


@dataclass(frozen=True)
class BoundaryEigenvalues:
    alpha: complex
    beta: complex


@dataclass(frozen=True)
class ConservedCoherence:
    """Operator L_pm with Tr(L_pm rho) conserved and Tr(L_pm |Psi+><Psi-|) = 1."""

    L_pm: np.ndarray

    @property
    def L_mp(self):
        return self.L_pm.conj().T

    def functional(self, rho):
        return complex(np.trace(self.L_pm @ rho))


@dataclass(frozen=True)
class TrappingState:
    m: int
    cos_sign: int

    def coherence_stationary(self, other):
        """Coherence |m><m'| survives iff the wall cosines agree."""
        return self.cos_sign == other.cos_sign


def _recurrence(atom, phi, start, lower_cos, stop):
    """Coefficients c_start, c_start+2, ... from the dark-state recurrence.

    c_{n+2}/c_n = -i (c_e/c_g) sin_n / (lower_cos - cos_n), where lower_cos is the
    cosine of the wall below the support (+1 for the vacuum-connected states).
    Stops at the first hard wall or when the index would reach ``stop``.
    Returns (indices, coefficients, wall) with wall the index of the stopping hard wall or None.
    """
    ratio_prefactor = -1j * atom.c_e / atom.c_g
    indices = [start]
    coefficients = [1.0 + 0j]
    n = start
    while n + 2 < stop:
        theta = coupling_angle(phi, n)
        sin_n, cos_n = np.sin(theta), np.cos(theta)
        if abs(sin_n) < WALL_TOLERANCE:
            if abs(lower_cos - cos_n) < 1e-6:
                raise DegenerateError(
                    f"wall at {n} has the same cosine as the lower boundary: no pure state"
                )
            return np.array(indices), np.array(coefficients), n
        denominator = lower_cos - cos_n
        if abs(denominator) < POLE_TOLERANCE:
            raise DegenerateError(f"recurrence denominator vanishes at n={n}")
        coefficients.append(coefficients[-1] * ratio_prefactor * sin_n / denominator)
        indices.append(n + 2)
        n += 2
    return np.array(indices), np.array(coefficients), None


def _pure_block(atom, phi, n_max, start, lower_cos):
    if atom.c_g == 0:
        raise DegenerateError("c_g = 0 has no dark state; see trapping_state")
    if atom.c_e == 0:
        ket = np.zeros(n_max, dtype=complex)
        ket[start] = 1.0
        return ket, n_max
    indices, coefficients, wall = _recurrence(atom, phi, start, lower_cos, n_max)
    if wall is None:
        _, extended, _ = _recurrence(atom, phi, start, lower_cos, n_max + TAIL_EXTENSION)
        if not np.all(np.isfinite(extended)):
            raise TruncationError("dark-state coefficients overflow beyond n_max")
        weights = np.abs(extended) ** 2
        tail = weights[len(indices) :].sum() / weights.sum()
        if tail >= TAIL_TOLERANCE:
            raise TruncationError(
                f"dark state leaves tail mass {tail:.2e} beyond n_max={n_max} with no hard wall"
            )
    ket = np.zeros(n_max, dtype=complex)
    ket[indices] = coefficients
    return ket / np.linalg.norm(ket), (n_max if wall is None else wall)


def pure_sector(atom, phi, n_max, parity):
    """Vacuum-connected dark state of one parity; returns (ket, support bound)."""
    n_max = check_dim(n_max)
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    return _pure_block(atom, phi, n_max, 0 if parity == 1 else 1, 1.0)


def pure_stationary(atom, phi, n_max):
    """Even and odd pure stationary states connected to |0> and |1>."""
    plus, bound_plus = pure_sector(atom, phi, n_max, 1)
    minus, bound_minus = pure_sector(atom, phi, n_max, -1)
    return StationaryPair(plus, minus, atom, float(phi), (bound_plus, bound_minus))


def verify_eigenstate(state, kraus, tol=EIGEN_TOLERANCE):
    """Check M_g psi = alpha psi and M_e psi = beta psi; returns the common (alpha, beta).

    ``state`` is a StationaryPair or a single ket.
    """
    kets = (state.psi_plus, state.psi_minus) if isinstance(state, StationaryPair) else (state,)
    values = []
    for ket in kets:
        pair = []
        for label in ("g", "e"):
            image = kraus[label] @ ket
            eigenvalue = np.vdot(ket, image) / np.vdot(ket, ket)
            residual = float(np.linalg.norm(image - eigenvalue * ket))
            if residual > tol:
                raise NotStationaryError(
                    f"M_{label} residual {residual:.2e} exceeds {tol:.0e}", residual
                )
            pair.append(complex(eigenvalue))
        values.append(pair)
    for other in values[1:]:
        mismatch = max(abs(other[0] - values[0][0]), abs(other[1] - values[0][1]))
        if mismatch > tol:
            raise NotStationaryError(f"eigenvalues differ between parities by {mismatch:.2e}", mismatch)
    return BoundaryEigenvalues(values[0][0], values[0][1])


def parity_block_indices(n_max, row_parity, column_parity):
    """Column-stacked indices of rho[i, j] with i, j of the given parities."""
    n = np.arange(n_max)
    rows = n[n % 2 == (0 if row_parity == 1 else 1)]
    columns = n[n % 2 == (0 if column_parity == 1 else 1)]
    return (rows[:, None] + n_max * columns[None, :]).reshape(-1, order="F")


def left_kernel(matrix, tol=KERNEL_TOLERANCE):
    """Orthonormal basis (rows) of {r : r matrix = 0}."""
    _, singular, vh = scipy.linalg.svd(matrix.T, lapack_driver="gesvd")
    scale = max(singular[0], 1.0)
    rank = int(np.sum(singular > tol * scale))
    return vh[rank:].conj()


def conserved_coherence(L0, pair):
    """Conserved functional L_pm from the left kernel of L0 on the |even><odd| block."""
    n_max = pair.n_max
    dims = {}
    kernels = {}
    for parities in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
        idx = parity_block_indices(n_max, *parities)
        kernels[parities] = (idx, left_kernel(L0[np.ix_(idx, idx)]))
        dims[parities] = kernels[parities][1].shape[0]
    total = sum(dims.values())
    if total != 4 or dims[(1, -1)] != 1:
        raise KernelDimensionError(
            f"stationary space has dimension {total} (blocks {dims}); restrict support at hard walls"
        )
    idx, kernel = kernels[(1, -1)]
    functional = np.zeros(n_max * n_max, dtype=complex)
    functional[idx] = kernel[0]
    target = np.outer(pair.psi_plus, pair.psi_minus.conj()).reshape(-1, order="F")
    functional = functional / (functional @ target)
    # Tr(L rho) = sum_ij L[j, i] rho[i, j] = vec(L^T) . vec(rho).
    L_pm = functional.reshape(n_max, n_max, order="F").T
    return ConservedCoherence(L_pm)


def conserved_residual(L0, operator):
    """Norm of L0^dagger(operator) through the vectorized functional."""
    n_max = operator.shape[0]
    functional = operator.T.reshape(-1, order="F")
    return float(np.linalg.norm(functional @ L0))


def dfs_project(rho, pair, coherence):
    """Asymptotic image of rho in the decoherence-free subspace."""
    signs = parity_signs(pair.n_max)
    even_weight = np.real(np.sum(np.diag(rho)[signs > 0]))
    odd_weight = np.real(np.sum(np.diag(rho)[signs < 0]))
    pp, mm, pm, mp = pair.basis()
    c_pm = coherence.functional(rho)
    c_mp = complex(np.trace(coherence.L_mp @ rho))
    return even_weight * pp + odd_weight * mm + c_pm * pm + c_mp * mp


def trapping_state(phi, n_max):
    """Fock states |m> at the hard walls of phi below n_max."""
    return [TrappingState(wall.m, wall.cos_sign) for wall in hard_walls_at(phi, n_max)]


def _wall_index(wall):
    return wall.m if isinstance(wall, HardWall) else int(wall)


def between_walls_stationary(atom, phi, wall_pair, n_max):
    """Stationary state supported on m_lo+2, ..., m_hi between two same-parity hard walls.

    Returns a ket when the boundary cosines are opposite and a density matrix otherwise.
    """
    n_max = check_dim(n_max)
    m_lo, m_hi = (_wall_index(wall) for wall in wall_pair)
    if (m_hi - m_lo) % 2 or m_hi <= m_lo:
        raise ValueError("walls must share parity with m_lo < m_hi")
    if m_hi >= n_max:
        raise TruncationError(f"upper wall {m_hi} lies outside n_max={n_max}")
    for m in (m_lo, m_hi):
        if abs(np.sin(coupling_angle(phi, m))) >= WALL_TOLERANCE:
            raise ValueError(f"no hard wall at m={m} for phi={phi}")
    start = m_lo + 2
    if start == m_hi:
        ket = np.zeros(n_max, dtype=complex)
        ket[start] = 1.0
        return ket
    lower_cos = float(np.sign(np.cos(coupling_angle(phi, m_lo))))
    upper_cos = float(np.sign(np.cos(coupling_angle(phi, m_hi))))
    if upper_cos == -lower_cos and atom.c_g != 0:
        indices, coefficients, wall = _recurrence(atom, phi, start, lower_cos, m_hi + 3)
        if wall != m_hi:
            raise NotStationaryError(f"recurrence stopped at {wall}, expected {m_hi}", 0.0)
        ket = np.zeros(n_max, dtype=complex)
        ket[indices] = coefficients
        return ket / np.linalg.norm(ket)
    support = np.arange(start, m_hi + 1, 2)
    kraus = kraus_two_photon(atom, phi, n_max)
    restricted = KrausSet(
        tuple(op[np.ix_(support, support)] for op in kraus), kraus.labels
    )
    generator = generator_L0(restricted, 1.0)
    null = scipy.linalg.null_space(generator, rcond=KERNEL_TOLERANCE)
    if null.shape[1] != 1:
        raise KernelDimensionError(f"restricted kernel has dimension {null.shape[1]}")
    block = null[:, 0].reshape(support.size, support.size, order="F")
    block = block / np.trace(block)
    block = 0.5 * (block + block.conj().T)
    rho = np.zeros((n_max, n_max), dtype=complex)
    rho[np.ix_(support, support)] = block
    return rho


def thermal_steady(spec, even_weight, n_max):
    """Diagonal steady state for thermal atoms with h_{n+2}/h_n = p3/p1 in each parity."""
    n_max = check_dim(n_max)
    if spec.p3 >= spec.p1:
        raise DivergenceError("thermal steady state needs p1 > p3")
    if not 0 <= even_weight <= 1:
        raise ValueError("even_weight must lie in [0, 1]")
    ratio = spec.p3 / spec.p1
    n = np.arange(n_max)
    if ratio ** ((n_max - 1) // 2) >= TAIL_TOLERANCE and ratio > 0:
        raise TruncationError(f"thermal distribution not converged within n_max={n_max}")
    weights = ratio ** (n // 2)
    even = n % 2 == 0
    populations = np.where(
        even,
        even_weight * weights / weights[even].sum(),
        (1 - even_weight) * weights / weights[~even].sum(),
    )
    return np.diag(populations).astype(complex)


def stationary_dm(pair, even_weight=1.0):
    """Mixture of the dark states with weight ``even_weight`` on |Psi+>."""
    return even_weight * ket_to_dm(pair.psi_plus) + (1 - even_weight) * ket_to_dm(pair.psi_minus)
