"""Poisson bracket on Verblunsky coefficients and the gradients it consumes.

The bracket is

    {f, g} = i * sum_j rho_j^2 * (df/d(conj a_j) dg/da_j - df/da_j dg/d(conj a_j))

summed over the slots of the sequence (see :mod:`cmvlax.coeffs`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import cmv
from .coeffs import PERIODIC, VerblunskySequence
from .errors import CmvError, GradientUnavailable, RhoDegenerate, StepTooLarge

FD_STEP = 1e-6
RHO_MIN = 1e-9


@dataclass(frozen=True)
class WirtingerGradient:
    d_alpha: np.ndarray
    d_alphabar: np.ndarray

    def conj_function(self) -> "WirtingerGradient":
        """Gradient of conj(f) given the gradient of f."""
        return WirtingerGradient(np.conj(self.d_alphabar), np.conj(self.d_alpha))

    def __add__(self, other):
        return WirtingerGradient(self.d_alpha + other.d_alpha, self.d_alphabar + other.d_alphabar)

    def __sub__(self, other):
        return WirtingerGradient(self.d_alpha - other.d_alpha, self.d_alphabar - other.d_alphabar)

    def scale(self, c) -> "WirtingerGradient":
        return WirtingerGradient(c * self.d_alpha, c * self.d_alphabar)

    def max_abs_diff(self, other) -> float:
        return float(
            max(np.max(np.abs(self.d_alpha - other.d_alpha)), np.max(np.abs(self.d_alphabar - other.d_alphabar)))
        )


@dataclass(frozen=True)
class Observable:
    """A scalar function of a coefficient sequence, optionally with an analytic gradient."""

    func: Callable[[VerblunskySequence], complex]
    grad: Optional[Callable[[VerblunskySequence], WirtingerGradient]] = None
    name: str = ""

    def __call__(self, seq):
        return self.func(seq)

    def gradient(self, seq, method: str = "analytic", step: float = FD_STEP) -> WirtingerGradient:
        if method == "analytic":
            if self.grad is None:
                raise GradientUnavailable(f"no analytic gradient for {self.name or 'observable'}")
            return self.grad(seq)
        if method == "fd":
            return fd_gradient(self.func, seq, step)
        raise CmvError(f"unknown gradient method {method!r}")


def slot_observable(j: int) -> Observable:
    """f = alpha_j."""

    def grad(seq):
        da = np.zeros(seq.n_slots, dtype=complex)
        da[j] = 1.0
        return WirtingerGradient(da, np.zeros_like(da))

    return Observable(lambda s: complex(s.slots[j]), grad, name=f"alpha_{j}")


def bracket_from_gradients(gf: WirtingerGradient, gg: WirtingerGradient, rho2) -> complex:
    # i (T(f, g) - T(g, f)) with one operand order, so antisymmetry holds bit for bit
    def t(a, b):
        return np.sum(rho2 * (a.d_alphabar * b.d_alpha))

    return complex(1j * (t(gf, gg) - t(gg, gf)))


def bracket(f: Observable, g: Observable, seq: VerblunskySequence, method: str = "analytic",
            method_g: str | None = None) -> complex:
    gf = f.gradient(seq, method)
    gg = g.gradient(seq, method_g or method)
    return bracket_from_gradients(gf, gg, seq.slot_rho2)


def bracket_matrix(d_a: np.ndarray, d_ab: np.ndarray, gg: WirtingerGradient, rho2) -> np.ndarray:
    """Entrywise bracket {M_jk, g} from stacked matrix derivatives ``(n_vars, n, n)``."""
    w_a = rho2 * gg.d_alpha
    w_ab = rho2 * gg.d_alphabar
    return 1j * (np.tensordot(w_a, d_ab, axes=1) - np.tensordot(w_ab, d_a, axes=1))


def fd_gradient(f: Callable[[VerblunskySequence], complex], seq: VerblunskySequence,
                step: float = FD_STEP) -> WirtingerGradient:
    """Central differences in Re and Im of every slot, combined in Wirtinger form."""
    x = np.array(seq.slots)
    if np.any(np.abs(x) >= 1.0 - 2 * step):
        raise StepTooLarge("finite-difference step leaves the unit disk")
    m = x.size
    du = np.zeros(m, dtype=complex)
    dv = np.zeros(m, dtype=complex)
    for j in range(m):
        for arr, h in ((du, step), (dv, 1j * step)):
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            arr[j] = (f(seq.with_slots(xp)) - f(seq.with_slots(xm))) / (2 * step)
    return WirtingerGradient(0.5 * (du - 1j * dv), 0.5 * (du + 1j * dv))


def fd_matrix_derivatives(build: Callable[[VerblunskySequence], np.ndarray], seq: VerblunskySequence,
                          step: float = FD_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference counterpart of :func:`cmv.factor_derivatives`."""
    x = np.array(seq.slots)
    if np.any(np.abs(x) >= 1.0 - 2 * step):
        raise StepTooLarge("finite-difference step leaves the unit disk")
    base = build(seq)
    d_a = np.zeros((x.size,) + base.shape, dtype=complex)
    d_ab = np.zeros_like(d_a)
    for j in range(x.size):
        parts = []
        for h in (step, 1j * step):
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            parts.append((build(seq.with_slots(xp)) - build(seq.with_slots(xm))) / (2 * step))
        mu, mv = parts
        d_a[j] = 0.5 * (mu - 1j * mv)
        d_ab[j] = 0.5 * (mu + 1j * mv)
    return d_a, d_ab


# -- gradients of K_{n+1} -----------------------------------------------------

def _check_rho(seq: VerblunskySequence):
    r = np.sqrt(seq.slot_rho2)
    bad = np.flatnonzero(r < RHO_MIN)
    if bad.size:
        raise RhoDegenerate(int(bad[0]), float(r[bad[0]]))


def _fold_positions(seq: VerblunskySequence, per_position: np.ndarray) -> np.ndarray:
    # average the per-position derivatives over copies of each raw slot
    p = seq.period
    P = seq.effective_period
    return per_position.reshape(P // p, p).sum(axis=0) * (p / P)


def grad_K(n_plus_1: int, seq: VerblunskySequence) -> WirtingerGradient:
    """Closed-form gradient of K_{n+1} from entries of E^n.

    Even positions use the pair of formulas written at an even index j; odd
    positions q use the companion pair written at j-1 with j = q+1.
    """
    if seq.case != PERIODIC:
        raise CmvError("grad_K needs a periodic sequence")
    if n_plus_1 < 1:
        raise CmvError("K_n gradients are defined for n >= 1")
    _check_rho(seq)
    n = n_plus_1 - 1
    P = seq.effective_period
    if n == 0:
        # E^0 = I: only the diagonal terms survive, K_1 = -sum alpha_{j-1} conj(alpha_j)
        x = seq.slots
        return WirtingerGradient(-np.conj(np.roll(x, -1)), -np.roll(x, 1))
    lo = -3
    En = cmv.ExtendedCmvOracle(seq).power_window(n, lo, P + 3)
    pos = np.arange(lo, P + 3)
    al = seq.alphas[pos % P]
    # a(k), ab(k), r(k) at integer offsets k from a base index array
    a = lambda k: al[k - lo]
    ab = lambda k: np.conj(al[k - lo])
    r = lambda k: np.sqrt(1.0 - np.abs(al[k - lo]) ** 2)

    def e(j, k):
        return En[j - lo, k - lo]

    j = np.arange(0, P, 2)
    h = 1.0 / (2 * r(j))
    da_even = (
        -ab(j) * ab(j + 1) * h * e(j + 1, j)
        - ab(j) * r(j + 1) * h * e(j + 2, j)
        - ab(j) * r(j - 1) * h * e(j - 1, j + 1)
        + ab(j) * a(j - 1) * h * e(j, j + 1)
        - ab(j + 1) * e(j + 1, j + 1)
        - r(j + 1) * e(j + 2, j + 1)
    )
    dab_even = (
        r(j - 1) * e(j - 1, j)
        - a(j - 1) * e(j, j)
        - a(j) * ab(j + 1) * h * e(j + 1, j)
        - a(j) * r(j + 1) * h * e(j + 2, j)
        - a(j) * r(j - 1) * h * e(j - 1, j + 1)
        + a(j) * a(j - 1) * h * e(j, j + 1)
    )
    q = np.arange(1, P, 2)
    h = 1.0 / (2 * r(q))
    da_odd = (
        -ab(q) * r(q - 1) * h * e(q + 1, q - 1)
        + ab(q) * a(q - 1) * h * e(q + 1, q)
        - ab(q) * ab(q + 1) * h * e(q, q + 1)
        - ab(q) * r(q + 1) * h * e(q, q + 2)
        - ab(q + 1) * e(q + 1, q + 1)
        - r(q + 1) * e(q + 1, q + 2)
    )
    dab_odd = (
        r(q - 1) * e(q, q - 1)
        - a(q - 1) * e(q, q)
        - a(q) * r(q - 1) * h * e(q + 1, q - 1)
        - a(q) * ab(q + 1) * h * e(q, q + 1)
        - a(q) * r(q + 1) * h * e(q, q + 2)
        + a(q) * a(q - 1) * h * e(q + 1, q)
    )
    d_a = np.empty(P, dtype=complex)
    d_ab = np.empty(P, dtype=complex)
    d_a[0::2], d_a[1::2] = da_even, da_odd
    d_ab[0::2], d_ab[1::2] = dab_even, dab_odd
    return WirtingerGradient(_fold_positions(seq, d_a), _fold_positions(seq, d_ab))


def min_copies(seq: VerblunskySequence, n: int) -> int:
    """Smallest number of effective periods d with d*P >= 2n + 1."""
    P = seq.effective_period
    return max(1, -(-(2 * n + 1) // P))


def grad_K_via_trace(n_plus_1: int, seq: VerblunskySequence, d: int | None = None) -> WirtingerGradient:
    """Gradient of K_{n+1} as (1/d) Tr(dQ_(d) Q_(d)^n), d counted in raw periods."""
    if seq.case != PERIODIC:
        raise CmvError("grad_K_via_trace needs a periodic sequence")
    _check_rho(seq)
    P = seq.effective_period
    if d is None:
        d = min_copies(seq, n_plus_1)
    size = d * P
    if size < 2 * n_plus_1 + 1:
        raise CmvError(f"Floquet size {size} < 2(n+1)+1 = {2 * n_plus_1 + 1}")
    q = cmv.build_floquet(seq, d)
    qn = np.linalg.matrix_power(q, n_plus_1 - 1)
    d_a, d_ab = cmv.floquet_derivatives(seq, d)
    raw_copies = size / seq.period
    # Tr(A B) = sum(A * B^T)
    ga = np.einsum("mkl,lk->m", d_a, qn) / raw_copies
    gab = np.einsum("mkl,lk->m", d_ab, qn) / raw_copies
    return WirtingerGradient(ga, gab)


def nonzero_count(mat: np.ndarray, tol: float = cmv.ZERO_TOL) -> int:
    return int(np.count_nonzero(np.abs(mat) > tol))
