"""Truncated bosonic Fock space: operators, canonical states, fidelity, Wigner function.

Operators are dense ``n_max x n_max`` complex arrays on the basis |0>..|n_max-1>.
Kets are 1-d complex arrays, density matrices 2-d Hermitian arrays.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln
from scipy.stats import poisson

from .errors import DegenerateError, NumericalError, TruncationError

TAIL_TOLERANCE = 1e-8
SQRT_CLIP = -1e-8


def check_dim(n_max):
    """Validate a truncation size and return it as an int."""
    n_max = int(n_max)
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")
    return n_max


def coherent_tail_mass(alpha, n_max):
    """Probability weight of the coherent state |alpha> on photon numbers >= n_max."""
    return float(poisson.sf(n_max - 1, abs(alpha) ** 2))


def _check_tail(alpha, n_max):
    tail = coherent_tail_mass(alpha, n_max)
    if tail >= TAIL_TOLERANCE:
        raise TruncationError(
            f"coherent amplitude {alpha} leaves tail mass {tail:.2e} beyond n_max={n_max}"
        )


def basis(n_max, n):
    """Fock state |n> as a ket."""
    n_max = check_dim(n_max)
    if not 0 <= n < n_max:
        raise TruncationError(f"Fock index {n} outside 0..{n_max - 1}")
    ket = np.zeros(n_max, dtype=complex)
    ket[n] = 1.0
    return ket


def annihilation_op(n_max):
    """Ladder operator with a[n-1, n] = sqrt(n)."""
    n_max = check_dim(n_max)
    return np.diag(np.sqrt(np.arange(1, n_max)), k=1).astype(complex)


def creation_op(n_max):
    return annihilation_op(n_max).conj().T


def number_op(n_max):
    n_max = check_dim(n_max)
    return np.diag(np.arange(n_max, dtype=float)).astype(complex)


def parity_op(n_max):
    """Photon-number parity (-1)^n."""
    n_max = check_dim(n_max)
    return np.diag((-1.0) ** np.arange(n_max)).astype(complex)


def parity_signs(n_max):
    return (-1.0) ** np.arange(n_max)


def hermitian_function(matrix, func, clip=None):
    """Apply ``func`` to a Hermitian matrix through its eigendecomposition."""
    matrix = 0.5 * (matrix + matrix.conj().T)
    values, vectors = np.linalg.eigh(matrix)
    if clip is not None:
        if values.min() < clip:
            raise NumericalError(f"eigenvalue {values.min():.3e} below clip level {clip:.1e}")
        values = np.clip(values, 0.0, None)
    return (vectors * func(values)) @ vectors.conj().T


def displacement_op(n_max, alpha):
    """Truncated displacement exp(alpha a^dag - alpha* a).

    The generator is anti-Hermitian, so the exponential is taken exactly
    through the eigendecomposition of the Hermitian matrix -i(alpha a^dag - alpha* a).
    """
    n_max = check_dim(n_max)
    _check_tail(alpha, n_max)
    a = annihilation_op(n_max)
    generator = alpha * a.conj().T - np.conj(alpha) * a
    hermitian = -1j * generator
    values, vectors = np.linalg.eigh(0.5 * (hermitian + hermitian.conj().T))
    return (vectors * np.exp(1j * values)) @ vectors.conj().T


def coherent_state(n_max, alpha):
    """Coherent state amplitudes exp(-|alpha|^2/2) alpha^n / sqrt(n!)."""
    n_max = check_dim(n_max)
    _check_tail(alpha, n_max)
    return _coherent_amplitudes(n_max, alpha)


def _coherent_amplitudes(n_max, alpha):
    n = np.arange(n_max)
    if alpha == 0:
        return basis(n_max, 0)
    log_mag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def cat_state(n_max, alpha, parity):
    """Even (parity=+1) or odd (parity=-1) Schroedinger cat state."""
    n_max = check_dim(n_max)
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    if parity == -1 and alpha == 0:
        raise DegenerateError("odd cat state is undefined at alpha = 0")
    _check_tail(alpha, n_max)
    amplitudes = _coherent_amplitudes(n_max, alpha)
    signs = parity_signs(n_max)
    weights = 1.0 + parity * signs
    norm = np.sqrt(2.0 + parity * 2.0 * np.exp(-2.0 * abs(alpha) ** 2))
    return amplitudes * weights / norm


def ket_to_dm(ket):
    return np.outer(ket, ket.conj())


def expectation(operator, rho):
    """Tr(operator rho) for a density matrix, or <psi|operator|psi> for a ket."""
    if rho.ndim == 1:
        return complex(rho.conj() @ operator @ rho)
    return complex(np.trace(operator @ rho))


def photon_statistics(rho):
    """Mean photon number and photon-number variance of a ket or density matrix."""
    if rho.ndim == 1:
        probabilities = np.abs(rho) ** 2
    else:
        probabilities = np.real(np.diag(rho))
    n = np.arange(len(probabilities))
    mean = float(probabilities @ n)
    return mean, float(probabilities @ n**2 - mean**2)


def purity(rho):
    if rho.ndim == 1:
        return float(np.vdot(rho, rho).real ** 2)
    return float(np.real(np.trace(rho @ rho)))


def sqrtm_psd(rho):
    """Square root of a positive semidefinite Hermitian matrix."""
    return hermitian_function(rho, np.sqrt, clip=SQRT_CLIP)


def fidelity(rho, sigma):
    """Uhlmann fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)), not squared."""
    if rho.ndim == 1 and sigma.ndim == 1:
        return float(abs(np.vdot(rho, sigma)))
    if rho.ndim == 1:
        return float(np.sqrt(max(np.real(rho.conj() @ sigma @ rho), 0.0)))
    if sigma.ndim == 1:
        return float(np.sqrt(max(np.real(sigma.conj() @ rho @ sigma), 0.0)))
    root = sqrtm_psd(rho)
    inner = root @ sigma @ root
    inner = 0.5 * (inner + inner.conj().T)
    values = np.linalg.eigvalsh(inner)
    if values.min() < -1e-8:
        raise NumericalError(f"fidelity kernel has eigenvalue {values.min():.3e}")
    return float(min(np.sum(np.sqrt(np.clip(values, 0.0, None))), 1.0))


def displacement_elements(beta, n_max):
    """Exact matrix elements <m|D(beta)|n> for 0 <= m, n < n_max, vectorized over beta.

    <m|D|n> = sqrt(n!/m!) beta^(m-n) exp(-|beta|^2/2) L_n^(m-n)(|beta|^2) for m >= n, and
    sqrt(m!/n!) (-beta*)^(n-m) exp(-|beta|^2/2) L_m^(n-m)(|beta|^2) otherwise.
    Unlike the truncated exponential this has no truncation error.
    Returns an array of shape beta.shape + (n_max, n_max).
    """
    beta = np.asarray(beta, dtype=complex)
    flat = beta.reshape(-1)[:, None, None]
    m = np.arange(n_max)[:, None]
    n = np.arange(n_max)[None, :]
    low, high = np.minimum(m, n), np.maximum(m, n)
    x = np.abs(flat) ** 2
    laguerre = eval_genlaguerre(low[None], (high - low)[None], x)
    log_scale = 0.5 * (gammaln(low + 1) - gammaln(high + 1))[None] - 0.5 * x
    power = np.where(m >= n, flat ** (m - n).clip(0), (-np.conj(flat)) ** (n - m).clip(0))
    rows = np.exp(log_scale) * power * laguerre
    return rows.reshape(beta.shape + (n_max, n_max))


@dataclass(frozen=True)
class WignerGrid:
    """Wigner function W(alpha) sampled on a rectangular grid, values[i_im, i_re]."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    resolution: int
    values: np.ndarray

    @property
    def re_axis(self):
        return np.linspace(self.re_min, self.re_max, self.resolution)

    @property
    def im_axis(self):
        return np.linspace(self.im_min, self.im_max, self.resolution)

    def integral(self):
        """Riemann sum of W over the grid."""
        d_re = (self.re_max - self.re_min) / (self.resolution - 1)
        d_im = (self.im_max - self.im_min) / (self.resolution - 1)
        return float(self.values.sum() * d_re * d_im)


def wigner(rho, re_bounds=(-4.0, 4.0), im_bounds=(-4.0, 4.0), resolution=161, chunk=2048):
    """Wigner function W(alpha) = (2/pi) Tr[rho D(alpha) P D(-alpha)] on a grid.

    Evaluated as (2/pi) sum_{mn} rho_{nm} <m|D(2 alpha)|n> (-1)^n, which equals the
    definition because D(alpha) P D(-alpha) = D(2 alpha) P.
    """
    if rho.ndim == 1:
        rho = ket_to_dm(rho)
    n_max = rho.shape[0]
    re_axis = np.linspace(re_bounds[0], re_bounds[1], resolution)
    im_axis = np.linspace(im_bounds[0], im_bounds[1], resolution)
    alphas = (re_axis[None, :] + 1j * im_axis[:, None]).reshape(-1)
    weighted = rho.T * parity_signs(n_max)[None, :]
    values = np.empty(alphas.size)
    for start in range(0, alphas.size, chunk):
        elements = displacement_elements(2.0 * alphas[start : start + chunk], n_max)
        values[start : start + chunk] = np.real(np.einsum("kmn,mn->k", elements, weighted))
    values = (2.0 / np.pi) * values.reshape(resolution, resolution)
    return WignerGrid(
        float(re_bounds[0]),
        float(re_bounds[1]),
        float(im_bounds[0]),
        float(im_bounds[1]),
        int(resolution),
        values,
    )
