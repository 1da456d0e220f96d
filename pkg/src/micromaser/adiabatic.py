"""Adiabatic elimination of the far-detuned levels: effective two-level Hamiltonian,
Stark-shift cancellation, the general two-photon steady-state classification, and
second-order Kraus operators of the (5+1)-level model.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channels import KrausSet
from .errors import DegenerateError, TruncationError
from .evolve import LEVELS, block_hamiltonian, full_model_map
from .fock import TAIL_TOLERANCE, annihilation_op, check_dim

FAR_DETUNED_WARNING = 0.3
RELATIVE_TOLERANCE = 1e-12
SERIES_PADDING = 6


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """(ground_const + ground_number n) s11 + (excited_const + excited_number n) s33
    + coupling a^2 s31 + h.c., on the resonant levels 1 and 3.
    """

    ground_const: float
    ground_number: float
    excited_const: float
    excited_number: float
    coupling: complex
    offset: float = 0.0

    def stark_residuals(self):
        """Shifts left after removing the common constant ``offset``."""
        return (
            self.ground_const - self.offset,
            self.ground_number,
            self.excited_const - self.offset,
            self.excited_number,
        )

    def block(self, photons_ground):
        """2x2 matrix on (|1, m+2>, |3, m>) with m = photons_ground - 2."""
        m = photons_ground - 2
        ground = self.ground_const + self.ground_number * photons_ground
        excited = self.excited_const + self.excited_number * m
        hopping = self.coupling * np.sqrt((m + 1.0) * (m + 2.0))
        return np.array([[ground, np.conj(hopping)], [hopping, excited]], dtype=complex)

    def matrix(self, n_max):
        """Operator on levels (1, 3) x Fock, ordered level-major."""
        a = annihilation_op(n_max)
        n = np.arange(n_max, dtype=float)
        ground = np.diag(self.ground_const + self.ground_number * n)
        excited = np.diag(self.excited_const + self.excited_number * n)
        a2 = a @ a
        top = np.hstack([ground, np.conj(self.coupling) * a2.conj().T])
        bottom = np.hstack([self.coupling * a2, excited])
        return np.vstack([top, bottom]).astype(complex)


def _far_detuned_ratio(params):
    ratios = [abs(g / d) for g, d in zip(params.g, params.detunings) if g != 0]
    if params.G != 0:
        ratios.append(abs(params.G / params.delta_aux))
    return max(ratios, default=0.0)


def adiabatic_heff(params):
    """Second-order effective Hamiltonian on the resonant levels."""
    if not params.resonant:
        raise ValueError("two-photon resonance Delta_2 = -Delta_3 required")
    ratio = _far_detuned_ratio(params)
    if ratio > FAR_DETUNED_WARNING:
        warnings.warn(f"far-detuned ratio {ratio:.2f} exceeds {FAR_DETUNED_WARNING}", stacklevel=2)
    g1, g2, g3, g4 = params.g
    d1, detuning, _, d4 = params.detunings
    first = abs(g1) ** 2 / d1 if g1 != 0 else 0.0
    fourth = abs(g4) ** 2 / d4 if g4 != 0 else 0.0
    aux = abs(params.G) ** 2 / params.delta_aux if params.G != 0 else 0.0
    second, third = abs(g2) ** 2 / detuning, abs(g3) ** 2 / detuning
    return EffectiveHamiltonian(
        ground_const=first,
        ground_number=-(second - first),
        excited_const=-(aux + third),
        excited_number=-(fourth + third),
        coupling=params.two_photon_coupling,
        offset=second,
    )


def _residual(lhs, rhs):
    if rhs == 0:
        return float(abs(lhs))
    return float(1.0 - lhs / rhs)


def stark_check(params, tol=1e-10):
    """Signed relative residuals of the three Stark-cancellation conditions."""
    g1, g2, g3, g4 = params.g
    d1, detuning, _, d4 = params.detunings
    residuals = {
        "a": _residual(abs(g1) ** 2 / d1, abs(g2) ** 2 / detuning),
        "b": _residual(abs(g4) ** 2 / d4, -abs(g3) ** 2 / detuning),
        "c": _residual(abs(params.G) ** 2 / params.delta_aux, -(abs(g2) ** 2 + abs(g3) ** 2) / detuning),
    }
    residuals["passed"] = all(abs(residuals[key]) < tol for key in "abc")
    return residuals


@dataclass(frozen=True)
class GeneralTwoPhotonParams:
    """H = [[A n + B, C* a^dag2], [C a^2, D n + E]] on levels (1, 3)."""

    A: float
    B: float
    C: complex
    D: float
    E: float
    tau: float = 1.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.A, self.B, self.D, self.E, self.tau)) or not np.isfinite(self.C):
            raise ValueError("coefficients must be finite")

    @classmethod
    def from_effective(cls, heff, tau=1.0):
        # E collects the n-independent part of the excited shift; B that of the ground shift.
        return cls(heff.ground_number, heff.ground_const, heff.coupling, heff.excited_number, heff.excited_const, tau)


@dataclass(frozen=True)
class TwoPhotonClass:
    kind: str
    ratio_prefactor: complex = 0j

    def recurrence(self, atom):
        """c_{n+2}/c_n as a function of n for the squeezed-vacuum family."""
        if self.kind != "CaseB":
            raise DegenerateError(f"no squeezed-vacuum recurrence for {self.kind}")
        factor = -(atom.c_e / atom.c_g) * self.ratio_prefactor
        return lambda n: factor * np.sqrt((n + 1.0) / (n + 2.0))


def _close(x, y):
    return abs(x - y) <= RELATIVE_TOLERANCE * max(abs(x), abs(y), 1.0)


def general_twophoton_classify(p):
    """Which pure stationary states the general two-photon Hamiltonian admits."""
    if p.C == 0:
        return TwoPhotonClass("DephasingOnly")
    if _close(p.A, 0.0) and _close(p.D, 0.0) and _close(p.B, p.E):
        return TwoPhotonClass("CaseA")
    product = p.A * p.D
    if product > 0 and _close(abs(p.C) ** 2, product):
        if _close(p.B + p.D, p.E) or _close(p.A + p.B + 2 * p.D, p.E):
            return TwoPhotonClass("CaseB", np.conj(p.C) / p.A)
    return TwoPhotonClass("NoPureState")


def squeezed_state(classification, atom, n_max, parity=1):
    """Normalized ket from the squeezed-vacuum recurrence in one parity sector."""
    n_max = check_dim(n_max)
    ratio = classification.recurrence(atom)
    ket = np.zeros(n_max, dtype=complex)
    start = 0 if parity == 1 else 1
    ket[start] = 1.0
    for n in range(start, n_max - 2, 2):
        ket[n + 2] = ket[n] * ratio(n)
    last = start + 2 * ((n_max - 1 - start) // 2)
    if abs(ket[last]) ** 2 / np.sum(np.abs(ket) ** 2) >= TAIL_TOLERANCE:
        raise TruncationError(f"squeezed state not converged within n_max={n_max}")
    return ket / np.linalg.norm(ket)


@dataclass(frozen=True)
class AdiabaticExpansion:
    """Generators S1, S2 and the diagonalized Hamiltonian on (6 levels) x (n_pad photons)."""

    S1: np.ndarray
    S2: np.ndarray
    hdiag: np.ndarray
    n_pad: int


def _place(matrix, row, column, block, n_pad):
    matrix[row * n_pad : (row + 1) * n_pad, column * n_pad : (column + 1) * n_pad] += block


def is_uniform(params, tol=1e-12):
    """Equal couplings, (D, D, -D, -D) detunings and G^2/delta = -2 g^2/Delta."""
    g = params.g[0]
    detuning = params.detuning
    same = all(abs(x - g) <= tol * abs(g) for x in params.g)
    pattern = np.allclose(params.detunings, (detuning, detuning, -detuning, -detuning), rtol=tol, atol=0)
    aux = abs(abs(params.G) ** 2 / params.delta_aux + 2 * abs(g) ** 2 / detuning) <= tol * abs(g) ** 2 / abs(detuning)
    return bool(same and pattern and aux and g != 0)


def adiabatic_expansion(params, n_pad, fourth_order=None):
    """S1, S2 and H_diag (second order, plus the fourth-order 1-3 block for uniform couplings)."""
    g1, g2, g3, g4 = params.g
    d1, d2, d3, d4 = params.detunings
    G, delta = params.G, params.delta_aux
    a = annihilation_op(n_pad)
    ad = a.conj().T
    eye = np.eye(n_pad)
    number = ad @ a
    size = 6 * n_pad

    def ratio(num, den):
        return num / den if num != 0 else 0.0

    s1 = np.zeros((size, size), dtype=complex)
    for low, coupling, detuning in ((0, g1, d1), (1, g2, d2), (2, g3, d3), (3, g4, d4)):
        _place(s1, low, low + 1, -ad * ratio(np.conj(coupling), detuning), n_pad)
        _place(s1, low + 1, low, a * ratio(coupling, detuning), n_pad)
    _place(s1, 3, 5, -eye * ratio(np.conj(G), delta), n_pad)
    _place(s1, 5, 3, eye * ratio(G, delta), n_pad)

    s2 = np.zeros((size, size), dtype=complex)
    c02 = ratio(g1 * g2 * (d1 - d2), 2 * d1 * d2 * (d1 + d2))
    c24 = ratio(g3 * g4 * (d3 - d4), 2 * d3 * d4 * (d3 + d4))
    c2a = ratio(g3 * G * (d3 - delta), 2 * d3 * delta * (delta + d3))
    c4a = ratio(g4 * np.conj(G) * (d4 + delta), 2 * d4 * delta * (delta - d4))
    _place(s2, 0, 2, -ad @ ad * np.conj(c02), n_pad)
    _place(s2, 2, 0, a @ a * c02, n_pad)
    _place(s2, 2, 4, -ad @ ad * np.conj(c24), n_pad)
    _place(s2, 4, 2, a @ a * c24, n_pad)
    _place(s2, 2, 5, -ad * np.conj(c2a), n_pad)
    _place(s2, 5, 2, a * c2a, n_pad)
    _place(s2, 4, 5, -a * c4a, n_pad)
    _place(s2, 5, 4, ad * np.conj(c4a), n_pad)

    for name, generator in (("S1", s1), ("S2", s2)):
        if np.abs(generator + generator.conj().T).max() > 1e-12 * max(np.abs(generator).max(), 1.0):
            raise ArithmeticError(f"{name} is not anti-Hermitian")

    energies = params.level_energies()
    hdiag = np.kron(np.diag(energies), eye).astype(complex)
    shifts = {
        0: -number * ratio(abs(g1) ** 2, d1),
        1: a @ ad * ratio(abs(g1) ** 2, d1) - number * ratio(abs(g2) ** 2, d2),
        2: a @ ad * ratio(abs(g2) ** 2, d2) - number * ratio(abs(g3) ** 2, d3),
        3: a @ ad * ratio(abs(g3) ** 2, d3) - number * ratio(abs(g4) ** 2, d4) - eye * ratio(abs(G) ** 2, delta),
        4: a @ ad * ratio(abs(g4) ** 2, d4),
        5: eye * ratio(abs(G) ** 2, delta),
    }
    for level, shift in shifts.items():
        _place(hdiag, level, level, shift, n_pad)
    two_photon = ratio(g2 * g3 * (d2 - d3), 2 * d2 * d3)
    _place(hdiag, 3, 1, a @ a * two_photon, n_pad)
    _place(hdiag, 1, 3, ad @ ad * np.conj(two_photon), n_pad)

    if fourth_order is None:
        fourth_order = is_uniform(params)
    if fourth_order:
        if not is_uniform(params):
            raise ValueError("the fourth-order diagonal term is available only for uniform couplings")
        g = abs(g1)
        detuning = params.detuning
        rabi2 = abs(G) ** 2
        n = np.arange(n_pad, dtype=float)
        lower = 4 * g**4 * (n * (n - 3) - 1) / (3 * detuning**3)
        upper = -4 * g**4 * (4 * g**2 - rabi2 * (n * (n + 1) + 1)) / (3 * rabi2 * detuning**3)
        hopping = np.diag(8 * g**4 * (g**2 + rabi2 * n) / (3 * rabi2 * detuning**3))
        _place(hdiag, 1, 1, np.diag(lower), n_pad)
        _place(hdiag, 3, 3, np.diag(upper), n_pad)
        _place(hdiag, 1, 3, ad @ hopping @ ad, n_pad)
        _place(hdiag, 3, 1, a @ hopping @ a, n_pad)
    return AdiabaticExpansion(s1, s2, hdiag, n_pad)


def _series_kraus(params, atom, n_max, fourth_order):
    n_pad = n_max + SERIES_PADDING
    expansion = adiabatic_expansion(params, n_pad, fourth_order)
    values, vectors = np.linalg.eigh(expansion.hdiag)
    propagator = (vectors * np.exp(-1j * values * params.tau)) @ vectors.conj().T
    s1, s2 = expansion.S1, expansion.S2
    s1_squared = s1 @ s1
    # e^{-S} U e^{S} to second order in S = S1 + S2.
    total = (
        propagator
        + propagator @ s1
        - s1 @ propagator
        + propagator @ (s2 + 0.5 * s1_squared)
        + (0.5 * s1_squared - s2) @ propagator
        - s1 @ propagator @ s1
    )
    eye = np.eye(n_pad)
    initial = np.kron(np.array([0, atom.c_g, 0, atom.c_e, 0, 0])[:, None], eye)
    image = total @ initial
    operators = tuple(image[j * n_pad : j * n_pad + n_max, :n_max] for j in range(6))
    return KrausSet(operators, LEVELS)


def higher_order_kraus(params, atom, n_max, order="exact-block", fourth_order=None):
    """Six Kraus operators labelled 0..4, a beyond the far-detuned limit."""
    n_max = check_dim(n_max)
    if not params.resonant:
        raise ValueError("two-photon resonance Delta_2 = -Delta_3 required")
    if order == "exact-block":
        return full_model_map(params, atom, n_max)
    if order == "series-2":
        return _series_kraus(params, atom, n_max, fourth_order)
    raise ValueError(f"unknown order {order!r}; use 'exact-block' or 'series-2'")


def first_order_swap(params, atom, n_max):
    """First-order part of the level-2 Kraus operator, <2|(U S1 - S1 U)|psi>."""
    n_pad = n_max + SERIES_PADDING
    expansion = adiabatic_expansion(params, n_pad, fourth_order=False)
    values, vectors = np.linalg.eigh(expansion.hdiag)
    propagator = (vectors * np.exp(-1j * values * params.tau)) @ vectors.conj().T
    first = propagator @ expansion.S1 - expansion.S1 @ propagator
    initial = np.kron(np.array([0, atom.c_g, 0, atom.c_e, 0, 0])[:, None], np.eye(n_pad))
    return (first @ initial)[2 * n_pad : 2 * n_pad + n_max, :n_max]


def effective_block_eigenvalues(params, photons_ground):
    """Eigenvalues of H0 + H_eff on (|1, m+2>, |3, m>), shifted by the level-1 energy."""
    heff = adiabatic_heff(params)
    return np.linalg.eigvalsh(heff.block(photons_ground)) + params.level_energies()[1]


def exact_block_eigenvalues(params, photons_ground, n_max):
    """The two exact eigenvalues of the excitation block closest to the level-1 energy."""
    hamiltonian, _ = block_hamiltonian(params, photons_ground + 1, n_max)
    values = np.linalg.eigvalsh(hamiltonian)
    target = params.level_energies()[1]
    return np.sort(values[np.argsort(np.abs(values - target))[:2]])
