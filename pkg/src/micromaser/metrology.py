"""Quantum Fisher information for phase encoding exp(-i phi n) on cavity states."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, EigensolverError, InvalidCoherenceError, NumericalError, PartitionError
from .fock import ket_to_dm, photon_statistics, purity

WEIGHT_FLOOR = 1e-12
DEFAULT_DPHI = 1e-4


@dataclass(frozen=True)
class MetrologyReport:
    mean_n: float
    var_n: float
    qfi: float
    enhancement: float
    purity: float

    @property
    def enhanced(self):
        return self.enhancement > 1.0


def qfi(rho):
    """F_Q = 2 sum_{jk} (p_j - p_k)^2 / (p_j + p_k) |<j|n|k>|^2 over the eigenbasis of rho."""
    if rho.ndim == 1:
        rho = ket_to_dm(rho)
    try:
        weights, vectors = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    except np.linalg.LinAlgError as error:
        raise EigensolverError(str(error)) from error
    photons = np.arange(rho.shape[0], dtype=float)
    elements = np.abs(vectors.conj().T @ (photons[:, None] * vectors)) ** 2
    sums = weights[:, None] + weights[None, :]
    differences = (weights[:, None] - weights[None, :]) ** 2
    keep = sums > WEIGHT_FLOOR
    ratio = np.zeros_like(sums)
    ratio[keep] = differences[keep] / sums[keep]
    return float(max(2.0 * np.sum(ratio * elements), 0.0))


def qfi_pure(psi):
    """4 Var(n) for a normalized ket."""
    _, variance = photon_statistics(psi)
    return 4.0 * variance


def enhancement(qfi_value, mean_n):
    """Ratio of the QFI to the coherent-state value 4 <n>."""
    if mean_n <= 0:
        raise DegenerateError("enhancement undefined for <n> = 0")
    return qfi_value / (4.0 * mean_n)


def metrology_report(rho):
    mean_n, var_n = photon_statistics(rho)
    value = qfi(rho)
    ratio = enhancement(value, mean_n) if mean_n > 0 else float("nan")
    return MetrologyReport(mean_n, var_n, value, ratio, purity(rho))


def qfi_dfs(p, c, pair):
    """QFI of p|Psi+><Psi+| + (1-p)|Psi-><Psi-| + c|Psi+><Psi-| + c*|Psi-><Psi+|."""
    if not 0 <= p <= 1:
        raise InvalidCoherenceError(f"population p={p} outside [0, 1]")
    if abs(c) ** 2 > p * (1 - p) + 1e-15:
        raise InvalidCoherenceError(f"|c|^2 = {abs(c) ** 2:.3e} exceeds p(1-p) = {p * (1 - p):.3e}")
    mean_plus, var_plus = photon_statistics(pair.psi_plus)
    mean_minus, var_minus = photon_statistics(pair.psi_minus)
    return (
        p * 4.0 * var_plus
        + (1 - p) * 4.0 * var_minus
        + 4.0 * abs(c) ** 2 * (mean_plus - mean_minus) ** 2
    )


def _rotated_fidelity(rho, dphi):
    """Uhlmann fidelity between rho and exp(-i dphi n) rho exp(i dphi n).

    With rho = V diag(p) V^dag the fidelity is the trace norm of
    diag(sqrt p) V^dag U V diag(sqrt p); singular values avoid the square root of
    a rounding-level spectrum, which would swamp the O(dphi^2) signal.
    """
    weights, vectors = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    roots = np.sqrt(np.clip(weights, 0.0, None))
    phases = np.exp(-1j * dphi * np.arange(rho.shape[0]))
    overlap = vectors.conj().T @ (phases[:, None] * vectors)
    return float(np.sum(np.linalg.svd(roots[:, None] * overlap * roots[None, :], compute_uv=False)))


def _fd_estimate(rho, dphi):
    return 8.0 * (1.0 - _rotated_fidelity(rho, dphi)) / dphi**2


def qfi_fd_oracle(rho, dphi=DEFAULT_DPHI):
    """QFI from the Bures fidelity of phase-shifted copies, Richardson-extrapolated over dphi, dphi/2."""
    if rho.ndim == 1:
        rho = ket_to_dm(rho)
    if dphi <= 0:
        raise ValueError("dphi must be positive")
    coarse = _fd_estimate(rho, dphi)
    fine = _fd_estimate(rho, 0.5 * dphi)
    value = (4.0 * fine - coarse) / 3.0
    if not np.isfinite(value):
        raise NumericalError("finite-difference QFI is not finite")
    # Fidelity rounding (~1e-16) is amplified by 8/dphi^2; clip the resulting noise floor at zero.
    return float(max(value, 0.0))


@dataclass(frozen=True)
class ModeReport:
    weight: float
    mean_n: float
    qfi: float


@dataclass(frozen=True)
class MultimodalReport:
    modes: tuple
    within: float
    between: float

    @property
    def total(self):
        return self.within + self.between

    @property
    def between_fraction(self):
        return self.between / self.total if self.total > 0 else 0.0


def qfi_multimodal_decomposition(psi, boundaries):
    """Split 4 Var(n) of a ket into within-mode and between-mode parts.

    ``boundaries`` are the photon numbers where each new mode starts (ascending, > 0).
    """
    n_max = psi.size
    edges = [0] + [int(b) for b in boundaries] + [n_max]
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise PartitionError(f"mode boundaries {boundaries} must be ascending inside (0, {n_max})")
    probabilities = np.abs(psi) ** 2
    if abs(probabilities.sum() - 1.0) > 1e-10:
        raise PartitionError("state must be normalized so the modes cover its support")
    modes = []
    for start, stop in zip(edges, edges[1:]):
        weight = float(probabilities[start:stop].sum())
        if weight > 0:
            local = probabilities[start:stop] / weight
            n = np.arange(start, stop)
            mean = float(local @ n)
            modes.append(ModeReport(weight, mean, 4.0 * float(local @ (n - mean) ** 2)))
        else:
            modes.append(ModeReport(0.0, 0.0, 0.0))
    within = sum(mode.weight * mode.qfi for mode in modes)
    between = 0.0
    for index, first in enumerate(modes):
        for second in modes[index + 1 :]:
            between += 4.0 * first.weight * second.weight * (first.mean_n - second.mean_n) ** 2
    return MultimodalReport(tuple(modes), within, between)
