"""Conserved quantities of the Ablowitz-Ladik hierarchy.

K_n is the trace per period of the n-th power of the extended CMV matrix,
divided by n.  K_0 is the product of rho_j^2 over one period.  The
discriminant is read off the characteristic polynomial of Q_(1).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import cmv
from .coeffs import FINITE, INFINITE, PERIODIC, VerblunskySequence
from .errors import CmvError, DimensionTooLarge, WindowTooSmall, ZeroArgument
from .poisson import Observable, WirtingerGradient, grad_K, min_copies

KINDS = ("K", "Kbar", "ReK", "ImK", "K0", "LogK0", "AL")


@dataclass(frozen=True)
class HamiltonianSpec:
    kind: str
    n: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CmvError(f"unknown Hamiltonian kind {self.kind!r}")
        if self.kind in ("K", "Kbar", "ReK", "ImK") and self.n < 1:
            raise CmvError(f"{self.kind} needs n >= 1")

    @classmethod
    def parse(cls, text: str) -> "HamiltonianSpec":
        """Parse ``AL``, ``K0``, ``logK0``, ``K:n``, ``Kbar:n``, ``ReK:n``, ``ImK:n``."""
        t = text.strip()
        if t.lower() == "logk0":
            return cls("LogK0")
        if t in ("AL", "K0"):
            return cls(t)
        m = re.fullmatch(r"(K|Kbar|ReK|ImK):(\d+)", t)
        if not m:
            raise CmvError(f"cannot parse Hamiltonian {text!r}")
        return cls(m.group(1), int(m.group(2)))

    def __str__(self):
        return f"{self.kind}:{self.n}" if self.kind in ("K", "Kbar", "ReK", "ImK") else self.kind


# -- periodic K_n ---------------------------------------------------------------

def _require_periodic(seq):
    if seq.case != PERIODIC:
        raise CmvError("this Hamiltonian is defined for periodic sequences")


def K_trace(n: int, seq: VerblunskySequence, d: int) -> complex:
    """(1/(d n)) Tr Q_(d)^n with d counted in raw periods; equals K_n once dp >= 2n+1."""
    _require_periodic(seq)
    q = cmv.build_floquet(seq, d)
    raw_copies = q.shape[0] / seq.period
    return complex(np.trace(np.linalg.matrix_power(q, n)) / (raw_copies * n))


def K(n: int, seq: VerblunskySequence, d: int | None = None) -> complex:
    """K_n via the smallest admissible Floquet matrix (or the given copy count)."""
    if n < 1:
        raise CmvError("K_n needs n >= 1; use K0 for n = 0")
    _require_periodic(seq)
    if d is None:
        d = min_copies(seq, n)
    return K_trace(n, seq, d)


def K_diagonal(n: int, seq: VerblunskySequence) -> complex:
    """(1/n) sum_{k < p} (E^n)_{kk} straight from extended-matrix entries."""
    _require_periodic(seq)
    En = cmv.ExtendedCmvOracle(seq).power_window(n, 0, seq.period)
    return complex(np.trace(En) / n)


def K0(seq: VerblunskySequence) -> float:
    """Product of rho_j^2 over the slots (one period, k-1 interior values, or all stored)."""
    return float(np.prod(seq.slot_rho2))


def K0_full_finite(seq: VerblunskySequence) -> float:
    """Product over all k finite coefficients; identically 0 because rho_{k-1} = 0."""
    if seq.case != FINITE:
        raise CmvError("finite sequences only")
    return float(np.prod(1.0 - np.abs(seq.alphas) ** 2))


def K_finite(n: int, seq: VerblunskySequence) -> complex:
    if seq.case != FINITE:
        raise CmvError("K_finite needs a finite sequence")
    c = cmv.build_finite_cmv(seq)[0]
    return complex(np.trace(np.linalg.matrix_power(c, n)) / n)


def grad_K_finite(n: int, seq: VerblunskySequence) -> WirtingerGradient:
    """d K_n^f = Tr(dC_f C_f^{n-1}) for the interior slots."""
    c = cmv.build_finite_cmv(seq)[0]
    d_a, d_ab = cmv.finite_derivatives(seq)
    cn = np.linalg.matrix_power(c, n - 1)
    return WirtingerGradient(np.einsum("mkl,lk->m", d_a, cn), np.einsum("mkl,lk->m", d_ab, cn))


def grad_K0(seq: VerblunskySequence) -> WirtingerGradient:
    x = seq.slots
    k0 = K0(seq)
    rho2 = seq.slot_rho2
    return WirtingerGradient(-np.conj(x) * k0 / rho2, -x * k0 / rho2)


def grad_log_K0(seq: VerblunskySequence) -> WirtingerGradient:
    x = seq.slots
    rho2 = seq.slot_rho2
    return WirtingerGradient(-np.conj(x) / rho2, -x / rho2)


@dataclass(frozen=True)
class InfiniteK:
    value: complex
    tail_bound: float
    window: int


def K_infinite(n: int, seq: VerblunskySequence, window: int | None = None) -> InfiniteK:
    """(1/n) sum_{k <= window} (C^n)_{kk} for a truncated l^1 sequence.

    ``tail_bound`` bounds the omitted diagonal entries by 4^n times the sum of
    |alpha| over each entry's dependence range.  Diagonal entries past
    ``N + 2n - 2`` carry no alpha factor, so windows of at least ``N + 2n`` are
    exact and have a zero bound.
    """
    if seq.case != INFINITE:
        raise CmvError("K_infinite needs an infinite sequence")
    N = seq.alphas.size
    if window is None:
        window = N + 4 * n
    if window < N + 2 * n:
        raise WindowTooSmall(f"window {window} < N + 2n = {N + 2 * n}")
    size = window + 1 + 2 * n + 2
    c = cmv.halfline_window(seq, size)
    cn = np.linalg.matrix_power(c, n)
    value = complex(np.trace(cn[: window + 1, : window + 1]) / n)
    mod = np.abs(seq.alphas)
    tail = 0.0
    for k in range(window + 1, N + 2 * n):
        lo, hi = max(0, k - 2 * n + 1), min(N, k + 2 * n)
        tail += mod[lo:hi].sum()
    return InfiniteK(value, float(4.0**n * tail / n), window)


# -- generic Hamiltonian dispatch (periodic) --------------------------------------

def value(spec: HamiltonianSpec, seq: VerblunskySequence) -> complex:
    kind = spec.kind
    if kind == "K0":
        return K0(seq)
    if kind == "LogK0":
        return float(np.log(K0(seq)))
    if kind == "AL":
        return 2 * K(1, seq).real - 2 * np.log(K0(seq))
    k = K(spec.n, seq)
    return {"K": k, "Kbar": np.conj(k), "ReK": k.real, "ImK": k.imag}[kind]


def gradient(spec: HamiltonianSpec, seq: VerblunskySequence) -> WirtingerGradient:
    """Analytic Wirtinger gradient of the Hamiltonian over the slots."""
    kind = spec.kind
    if kind == "K0":
        return grad_K0(seq)
    if kind == "LogK0":
        return grad_log_K0(seq)
    if kind == "AL":
        g = grad_K(1, seq)
        return (g + g.conj_function()) - grad_log_K0(seq).scale(2.0)
    g = grad_K(spec.n, seq)
    if kind == "K":
        return g
    if kind == "Kbar":
        return g.conj_function()
    if kind == "ReK":
        return (g + g.conj_function()).scale(0.5)
    return (g - g.conj_function()).scale(-0.5j)


def observable(spec: HamiltonianSpec) -> Observable:
    return Observable(lambda s: value(spec, s), lambda s: gradient(spec, s), name=str(spec))


def K_observable(n: int) -> Observable:
    return observable(HamiltonianSpec("K", n))


# -- characteristic polynomial and discriminant ----------------------------------

MAX_CHARPOLY_DIM = 256


def char_poly_coeffs(m) -> np.ndarray:
    """Coefficients of det(z - M), leading first, via Newton's identities."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise CmvError("square matrix required")
    dim = m.shape[0]
    if dim > MAX_CHARPOLY_DIM:
        raise DimensionTooLarge(f"dimension {dim} exceeds {MAX_CHARPOLY_DIM}")
    traces = np.empty(dim + 1, dtype=complex)
    power = np.eye(dim, dtype=complex)
    for k in range(1, dim + 1):
        power = power @ m
        traces[k] = np.trace(power)
    e = np.zeros(dim + 1, dtype=complex)
    e[0] = 1.0
    for k in range(1, dim + 1):
        s = 0j
        for i in range(1, k + 1):
            s += (-1) ** (i - 1) * e[k - i] * traces[i]
        e[k] = s / k
    signs = (-1.0) ** np.arange(dim + 1)
    return signs * e


@dataclass(frozen=True)
class DiscriminantPoly:
    """Coefficients c_0..c_p (leading first) of z^{p/2} (prod rho) Delta(z), plus K_0.

    The polynomial equals det(z - Q_(1)) + 2 (prod rho) z^{p/2}; it is monic
    with c_p = 1 and c_j = conj(c_{p-j}).
    """

    coeffs: np.ndarray
    charpoly: np.ndarray
    rho_product: float
    K0: float


def discriminant_poly(seq: VerblunskySequence) -> DiscriminantPoly:
    _require_periodic(seq)
    q = cmv.build_floquet(seq, 1)
    cp = char_poly_coeffs(q)
    P = q.shape[0]
    rp = float(np.prod(np.sqrt(1.0 - np.abs(seq.alphas) ** 2)))
    c = cp.copy()
    c[P // 2] += 2 * rp
    return DiscriminantPoly(c, cp, rp, float(np.prod(1.0 - np.abs(seq.alphas) ** 2)))


def discriminant(seq: VerblunskySequence, z) -> complex:
    """Delta(z) = det(z - Q_(1)) / (z^{p/2} prod rho_j) + 2, with p the even period."""
    z = complex(z)
    if z == 0:
        raise ZeroArgument("Delta is evaluated at z != 0")
    dp = discriminant_poly(seq)
    P = dp.charpoly.size - 1
    det = np.polyval(dp.charpoly, z)
    return complex(det / (z ** (P // 2) * dp.rho_product) + 2.0)


def discriminant_two_periodic(a: complex, b: complex, theta) -> np.ndarray:
    """Closed form for period two: (2/(rho rho')) (cos theta + Re(conj(a) b))."""
    r = np.sqrt(1 - abs(a) ** 2) * np.sqrt(1 - abs(b) ** 2)
    return 2.0 / r * (np.cos(theta) + (np.conj(a) * b).real)


def invariant_vector(seq: VerblunskySequence) -> np.ndarray:
    """(Re c_1, Im c_1, ..., Re c_{p/2-1}, Im c_{p/2-1}, c_{p/2}, prod rho^2), length p."""
    dp = discriminant_poly(seq)
    c = dp.coeffs
    P = c.size - 1
    out = []
    for j in range(1, P // 2):
        out += [c[j].real, c[j].imag]
    out += [c[P // 2].real, dp.K0]
    return np.array(out)
