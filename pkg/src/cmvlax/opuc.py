"""Orthogonal polynomials on the unit circle: Szego recursion and transfer matrices.

Kept independent of the Lax verification path on purpose, so it can serve as
a cross-check of the CMV construction rather than share its bugs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import VerblunskySequence, alpha_at
from .errors import CmvError, DegreeMismatch, RhoDegenerate

RHO_MIN = 1e-12


@dataclass(frozen=True)
class PolyCoeffs:
    """Coefficients c_0..c_n in increasing powers of z."""

    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, z):
        # np.polyval wants leading-first
        return np.polyval(self.coeffs[::-1], z)

    def scale(self, c) -> "PolyCoeffs":
        return PolyCoeffs(c * self.coeffs)


def one() -> PolyCoeffs:
    return PolyCoeffs(np.array([1.0 + 0j]))


def reversed_poly(phi: PolyCoeffs) -> PolyCoeffs:
    """Phi*(z) = z^n conj(Phi(1/conj z)): flip the coefficients and conjugate."""
    return PolyCoeffs(np.conj(phi.coeffs[::-1]))


def szego_step(phi: PolyCoeffs, phi_star: PolyCoeffs, alpha) -> tuple[PolyCoeffs, PolyCoeffs]:
    """Phi_{n+1} = z Phi_n - conj(a) Phi_n*, Phi*_{n+1} = Phi_n* - a z Phi_n."""
    if phi.degree != phi_star.degree:
        raise DegreeMismatch(f"degrees {phi.degree} and {phi_star.degree} differ")
    a = complex(alpha)
    z_phi = np.concatenate([[0j], phi.coeffs])
    star = np.concatenate([phi_star.coeffs, [0j]])
    return PolyCoeffs(z_phi - np.conj(a) * star), PolyCoeffs(star - a * z_phi)


def _rho(alpha) -> float:
    r2 = 1.0 - abs(alpha) ** 2
    if r2 < RHO_MIN**2:
        raise RhoDegenerate(-1, float(np.sqrt(max(r2, 0.0))))
    return float(np.sqrt(r2))


def _alphas(seq, n: int) -> np.ndarray:
    if isinstance(seq, VerblunskySequence):
        return np.array([alpha_at(seq, j) for j in range(n)], dtype=complex)
    arr = np.asarray(seq, dtype=complex)
    if arr.size < n:
        raise CmvError(f"need {n} coefficients, got {arr.size}")
    return arr[:n]


def monic_polys(seq, n: int) -> tuple[PolyCoeffs, PolyCoeffs]:
    """(Phi_n, Phi_n*) from alpha_0..alpha_{n-1}."""
    phi, star = one(), one()
    for a in _alphas(seq, n):
        phi, star = szego_step(phi, star, a)
    return phi, star


def orthonormal_polys(seq, n: int) -> tuple[PolyCoeffs, PolyCoeffs]:
    """(phi_n, phi_n*) = (Phi_n, Phi_n*) / prod_{l<n} rho_l."""
    al = _alphas(seq, n)
    norm = 1.0
    for a in al:
        norm *= _rho(a)
    phi, star = monic_polys(al, n)
    return phi.scale(1.0 / norm), star.scale(1.0 / norm)


def transfer(alpha, z) -> np.ndarray:
    """A(a, z) = (1/rho) [[z, -conj a], [-a z, 1]]."""
    a = complex(alpha)
    z = complex(z)
    r = _rho(a)
    return np.array([[z, -np.conj(a)], [-a * z, 1.0]], dtype=complex) / r


def transfer_product(seq, n: int, z) -> np.ndarray:
    """T_n(z) = A(alpha_{n-1}, z) ... A(alpha_0, z)."""
    t = np.eye(2, dtype=complex)
    for a in _alphas(seq, n):
        t = transfer(a, z) @ t
    return t


def transfer_polys(seq, n: int, z) -> np.ndarray:
    """T_n(z) (1, 1)^T, which should equal (phi_n(z), phi_n*(z))."""
    return transfer_product(seq, n, z) @ np.ones(2, dtype=complex)


def transfer_discriminant(seq: VerblunskySequence, z) -> complex:
    """Experimental: z^{-p/2} Tr T_p(z) over one even period.

    Not used by any verification route; compare against
    :func:`cmvlax.hamiltonians.discriminant` before trusting it.
    """
    p = seq.effective_period
    z = complex(z)
    return complex(np.trace(transfer_product(seq, p, z)) / z ** (p / 2))


def zeros_inside_diagnostic(phi: PolyCoeffs, grid: int = 512, radius: float = 1.0) -> dict:
    """Soft check that the zeros of Phi_n lie in |z| < radius.

    Counts zeros inside the circle via the winding number of Phi_n along it
    and compares with the degree.  Returns a dict rather than raising.
    """
    theta = np.linspace(0.0, 2 * np.pi, grid + 1)
    vals = phi(radius * np.exp(1j * theta))
    if np.min(np.abs(vals)) == 0.0:
        return {"degree": phi.degree, "winding": None, "inside": False}
    winding = int(np.round(np.sum(np.diff(np.unwrap(np.angle(vals)))) / (2 * np.pi)))
    return {"degree": phi.degree, "winding": winding, "inside": winding == phi.degree}
