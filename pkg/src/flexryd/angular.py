"""Angular momentum algebra: Wigner 3j symbols, Clebsch-Gordan coefficients
and rank-1/rank-2 spherical harmonics in cartesian form.

The 3j symbols are evaluated with the Racah sum over exact rational
arithmetic (``fractions.Fraction``); only the final square root is taken in
floating point, so the returned values are correct to one ulp without any
tolerance bookkeeping.  Selection-rule violations return 0 rather than
raising, since callers typically sum over coupling channels.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

__all__ = [
    "wigner3j",
    "clebsch_gordan",
    "y1_cartesian",
    "y2_cartesian",
]


def _as_twice(x, name: str) -> int:
    """Twice the quantum number as an exact integer, or raise."""
    t = 2 * x
    ti = round(t)
    if abs(t - ti) > 1e-9:
        raise ValueError(f"{name}={x} is not an integer or half-integer")
    return int(ti)


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol (j1 j2 j3 / m1 m2 m3).

    Returns 0.0 for any selection-rule violation (m-sum nonzero, triangle
    rule broken, |m| > j).  Raises ValueError if an argument is not an
    integer or half-integer, or if j and m differ by a non-integer.
    """
    tj = [_as_twice(j, f"j{i+1}") for i, j in enumerate((j1, j2, j3))]
    tm = [_as_twice(m, f"m{i+1}") for i, m in enumerate((m1, m2, m3))]
    if any(j < 0 for j in tj):
        raise ValueError("angular momenta must be nonnegative")
    for j, m in zip(tj, tm):
        if (j - m) % 2 != 0:
            raise ValueError("j and m must both be integral or both half-integral")
    if any(abs(m) > j for j, m in zip(tj, tm)):
        return 0.0
    if tm[0] + tm[1] + tm[2] != 0:
        return 0.0
    # triangle rule, and integral perimeter
    if (tj[0] + tj[1] + tj[2]) % 2 != 0:
        return 0.0
    if tj[2] < abs(tj[0] - tj[1]) or tj[2] > tj[0] + tj[1]:
        return 0.0

    # Racah sum.  All factorial arguments below are guaranteed integral.
    def fac2(t: int) -> int:
        # factorial of t/2 where t is an even (doubled) integer
        return math.factorial(t // 2)

    tj1, tj2, tj3 = tj
    tm1, tm2, tm3 = tm
    delta = Fraction(
        fac2(tj1 + tj2 - tj3) * fac2(tj1 - tj2 + tj3) * fac2(-tj1 + tj2 + tj3),
        fac2(tj1 + tj2 + tj3 + 2),
    )
    pref = Fraction(
        fac2(tj1 + tm1) * fac2(tj1 - tm1)
        * fac2(tj2 + tm2) * fac2(tj2 - tm2)
        * fac2(tj3 + tm3) * fac2(tj3 - tm3)
    )
    tmin = max(0, tj2 - tj3 - tm1, tj1 - tj3 + tm2) // 2
    tmax = min(tj1 + tj2 - tj3, tj1 - tm1, tj2 + tm2) // 2
    total = Fraction(0)
    for t in range(tmin, tmax + 1):
        denom = (
            math.factorial(t)
            * fac2(tj1 + tj2 - tj3 - 2 * t)
            * fac2(tj1 - tm1 - 2 * t)
            * fac2(tj2 + tm2 - 2 * t)
            * fac2(tj3 - tj2 + tm1 + 2 * t)
            * fac2(tj3 - tj1 - tm2 + 2 * t)
        )
        total += Fraction((-1) ** t, denom)
    if total == 0:
        return 0.0
    phase = -1.0 if ((tj1 - tj2 - tm3) // 2) % 2 else 1.0
    mag = delta * pref * total * total
    val = phase * math.copysign(math.sqrt(mag), total)
    return val


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>.

    Zero when M != m1 + m2 or the triangle rule fails.
    """
    tJ = _as_twice(J, "J")
    tM = _as_twice(M, "M")
    phase = -1.0 if ((_as_twice(j1, "j1") - _as_twice(j2, "j2") + tM) // 2) % 2 else 1.0
    return phase * math.sqrt(tJ + 1.0) * wigner3j(j1, j2, J, m1, m2, -M)


def y1_cartesian(r_vec) -> np.ndarray:
    """Rank-1 spherical harmonics Y_{1,m}(rhat), m = -1, 0, +1.

    Direction only; the result is invariant under positive rescaling of
    ``r_vec``.  Raises ValueError on the zero vector.
    """
    x, y, z = np.asarray(r_vec, dtype=float)
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0.0:
        raise ValueError("zero direction vector")
    k = math.sqrt(3.0 / (8.0 * math.pi))
    out = np.empty(3, dtype=complex)
    out[0] = k * (x - 1j * y) / r
    out[1] = math.sqrt(3.0 / (4.0 * math.pi)) * z / r
    out[2] = -k * (x + 1j * y) / r
    return out


def y2_cartesian(r_vec) -> np.ndarray:
    """Rank-2 spherical harmonics Y_{2,m}(rhat), m = -2 .. +2, from
    cartesian components.

    The cartesian closed forms avoid the polar-angle branch cut at
    phi = 2pi -> 0, which matters when differentiating interaction matrix
    elements.  Scale invariant; raises ValueError on the zero vector.
    """
    x, y, z = np.asarray(r_vec, dtype=float)
    r2 = x * x + y * y + z * z
    if r2 == 0.0:
        raise ValueError("zero direction vector")
    k0 = math.sqrt(5.0 / (16.0 * math.pi))
    k1 = math.sqrt(15.0 / (8.0 * math.pi))
    k2 = math.sqrt(15.0 / (32.0 * math.pi))
    out = np.empty(5, dtype=complex)
    out[0] = k2 * (x - 1j * y) ** 2 / r2
    out[1] = k1 * z * (x - 1j * y) / r2
    out[2] = k0 * (3.0 * z * z - r2) / r2
    out[3] = -k1 * z * (x + 1j * y) / r2
    out[4] = k2 * (x + 1j * y) ** 2 / r2
    return out
