"""Hard walls from the Pell recurrence, soft-wall scans, and rotation-number classification.

A hard wall at photon number m occurs when phi sqrt((m+1)(m+2)) is a multiple K of pi,
which decouples |m> from |m+2>. All walls sharing one phi solve x^2 - D y^2 = 1 with
x = 2m + 3, y = 2K/K_1 and D = (m_1+1)(m_1+2).
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

WALL_TOLERANCE = 1e-10
DEFAULT_SOFT_THRESHOLD = 1e-3


@dataclass(frozen=True)
class HardWall:
    m: int
    K: int

    def __post_init__(self):
        if self.m < 0 or self.K == 0:
            raise ValueError("hard wall needs m >= 0 and K != 0")

    @property
    def cos_sign(self):
        return -1 if self.K % 2 else 1

    @property
    def parity(self):
        return 1 if self.m % 2 == 0 else -1

    @property
    def phi(self):
        return phi_for_wall(self.m, self.K)

    def to_dict(self):
        return {
            "m": self.m,
            "K": self.K,
            "parity": "even" if self.parity == 1 else "odd",
            "cos_sign": self.cos_sign,
            "phi": self.phi,
        }


@dataclass(frozen=True)
class WallSequence:
    walls: tuple
    D: int

    @property
    def positions(self):
        return [wall.m for wall in self.walls]


@dataclass(frozen=True)
class SoftWall:
    m: int
    strength: float
    cos_value: float


@dataclass(frozen=True)
class RotationClass:
    """Classification of phi/pi: kind is 'rational-even', 'rational-odd' or 'irrational'."""

    kind: str
    p: int = 0
    q: int = 1

    @property
    def rational(self):
        return self.kind != "irrational"

    @property
    def periodic_soft_walls(self):
        return self.kind == "rational-even"


def coupling_angle(phi, n):
    """theta_n = phi sqrt((n+1)(n+2)), vectorized over n."""
    n = np.asarray(n, dtype=float)
    return phi * np.sqrt((n + 1.0) * (n + 2.0))


def phi_for_wall(m, K):
    """Integrated coupling placing a hard wall at m with K half-turns."""
    if m < 0 or K == 0:
        raise ValueError("phi_for_wall needs m >= 0 and K != 0")
    return K * math.pi / math.sqrt((m + 1) * (m + 2))


def wall_sequence(m1, K1, count):
    """First ``count`` hard walls sharing phi_for_wall(m1, K1), in exact integer arithmetic."""
    if m1 < 0 or K1 == 0 or count < 1:
        raise ValueError("wall_sequence needs m1 >= 0, K1 != 0, count >= 1")
    D = (m1 + 1) * (m1 + 2)
    x1, y1 = 2 * m1 + 3, 2
    x, y = x1, y1
    walls = []
    for _ in range(count):
        if x * x - D * y * y != 1:
            raise ArithmeticError(f"Pell identity violated at x={x}, y={y}")
        if (y * K1) % 2:
            raise ArithmeticError(f"non-integer wall index at y={y}")
        walls.append(HardWall((x - 3) // 2, y * K1 // 2))
        x, y = x1 * x + D * y1 * y, x1 * y + y1 * x
    return WallSequence(tuple(walls), D)


def pell_closed_form(m1, n):
    """Wall position m_n from x_n = ((x_1 + 2 sqrt D)^n + (x_1 - 2 sqrt D)^n)/2, exact integers."""
    D = (m1 + 1) * (m1 + 2)
    x1 = 2 * m1 + 3
    # Expand (x1 + 2 sqrt D)^n = a + b sqrt D with integers; the conjugate term cancels b.
    a, b = 1, 0
    for _ in range(n):
        a, b = a * x1 + 2 * D * b, a * 2 + b * x1
    return (a - 3) // 2


def hard_walls_at(phi, n_max, tol=WALL_TOLERANCE):
    """Walls m < n_max for this phi, i.e. |sin(theta_m)| < tol."""
    n = np.arange(n_max)
    theta = coupling_angle(phi, n)
    walls = []
    for m in n[np.abs(np.sin(theta)) < tol]:
        K = int(round(theta[m] / math.pi))
        if K != 0:
            walls.append(HardWall(int(m), K))
    return walls


def soft_wall_scan(phi, n_max, threshold=DEFAULT_SOFT_THRESHOLD):
    """All n <= n_max with sin^2(theta_n) below threshold."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    n = np.arange(n_max + 1)
    theta = coupling_angle(phi, n)
    strength = np.sin(theta) ** 2
    return [
        SoftWall(int(m), float(strength[m]), float(np.cos(theta[m])))
        for m in n[strength < threshold]
    ]


def continued_fraction_convergents(value, max_denominator):
    """Convergents p/q of an exact Fraction with q <= max_denominator."""
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    remainder = value
    while True:
        term = math.floor(remainder)
        h_prev, h = h, term * h + h_prev
        k_prev, k = k, term * k + k_prev
        if k > max_denominator:
            return
        yield Fraction(h, k)
        fractional = remainder - term
        if fractional == 0:
            return
        remainder = 1 / fractional


def rotation_classify(phi, tol=1e-9):
    """Classify phi/pi by its continued-fraction convergents up to denominator 1/tol.

    phi/pi counts as p/q when |phi/pi - p/q| < tol/q^2 for some convergent.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ratio = Fraction(phi / math.pi)
    for convergent in continued_fraction_convergents(ratio, int(1 / tol)):
        if abs(float(ratio - convergent)) < tol / convergent.denominator**2:
            p, q = convergent.numerator, convergent.denominator
            return RotationClass("rational-even" if p % 2 == 0 else "rational-odd", p, q)
    return RotationClass("irrational")
