"""Residual checks of the Lax pair identities {L, H} = [L, B].

The left side brackets every entry of the CMV-type matrix L with the
Hamiltonian H; the right side is a commutator with a projection of a power
of L.  Each check reports the largest entrywise discrepancy.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import cmv, hamiltonians as ham
from .coeffs import FINITE, INFINITE, PERIODIC, VerblunskySequence
from .errors import CmvError, NotStairShaped, TruncationTooTight
from .poisson import (
    WirtingerGradient,
    bracket_from_gradients,
    bracket_matrix,
    fd_gradient,
    fd_matrix_derivatives,
    grad_K,
)

THRESHOLDS = {"analytic": 1e-10, "fd": 1e-5}

PERIODIC_KINDS = ("PeriodicK", "PeriodicKbar", "PeriodicReK", "PeriodicImK", "PeriodicK0")
FINITE_KINDS = ("FiniteK", "FiniteKbar", "FiniteReK", "FiniteImK")
INFINITE_KINDS = ("InfiniteK", "InfiniteKbar", "InfiniteReK", "InfiniteImK")
ALL_KINDS = PERIODIC_KINDS + FINITE_KINDS + INFINITE_KINDS


@dataclass(frozen=True)
class LaxVariant:
    kind: str
    n: int = 0

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise CmvError(f"unknown Lax variant {self.kind!r}")
        if self.kind != "PeriodicK0" and self.n < 1:
            raise CmvError(f"{self.kind} needs n >= 1")

    @classmethod
    def parse(cls, text: str, n: int = 1) -> "LaxVariant":
        if text == "PeriodicK0":
            return cls(text)
        return cls(text, n)

    @property
    def case(self) -> str:
        if self.kind.startswith("Periodic"):
            return PERIODIC
        return FINITE if self.kind.startswith("Finite") else INFINITE

    @property
    def flavour(self) -> str:
        """One of K, Kbar, ReK, ImK, K0."""
        for prefix in ("Periodic", "Finite", "Infinite"):
            if self.kind.startswith(prefix):
                return self.kind[len(prefix):]
        raise AssertionError(self.kind)

    def __str__(self):
        return self.kind if self.kind == "PeriodicK0" else f"{self.kind}({self.n})"


@dataclass
class ResidualReport:
    variant: str
    matrix_dim: int
    max_abs_residual: float
    worst_entry: tuple
    method: str
    d: int | None = None
    seed: int | None = None
    passed: bool | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["worst_entry"] = list(self.worst_entry)
        return out


def _combine(flavour: str, g: WirtingerGradient) -> WirtingerGradient:
    """Gradient of the bracketed Hamiltonian from the gradient of K_n.

    Re and Im variants bracket with 2 Re K_n and 2 Im K_n.
    """
    if flavour == "K":
        return g
    if flavour == "Kbar":
        return g.conj_function()
    if flavour == "ReK":
        return g + g.conj_function()
    if flavour == "ImK":
        return (g - g.conj_function()).scale(-1j)
    raise CmvError(f"no K_n combination for {flavour}")


def _generator(flavour: str, plus: np.ndarray) -> np.ndarray:
    """B in [L, B] for each flavour, from the projected power."""
    star = plus.conj().T
    if flavour == "K":
        return 1j * plus
    if flavour == "Kbar":
        return 1j * star
    if flavour == "ReK":
        return 1j * plus + 1j * star
    if flavour == "ImK":
        return plus - star
    raise CmvError(f"no generator for {flavour}")


def _report(variant, lhs, rhs, method, mask=None, d=None) -> tuple[ResidualReport, np.ndarray]:
    res = np.abs(lhs - rhs)
    if mask is not None:
        res = np.where(mask, res, 0.0)
    idx = np.unravel_index(int(np.argmax(res)), res.shape)
    worst = float(res[idx])
    rep = ResidualReport(
        variant=str(variant),
        matrix_dim=int(lhs.shape[0]),
        max_abs_residual=worst,
        worst_entry=(int(idx[0]), int(idx[1])),
        method=method,
        d=d,
        passed=worst < THRESHOLDS[method],
    )
    return rep, res


# -- periodic ---------------------------------------------------------------

# FD work is shared across flavours: derivatives depend only on (seq, d) and the
# K_n gradient only on (n, seq).  Results are frozen so cached arrays stay intact.

def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)
    return arrays


@lru_cache(maxsize=32)
def _fd_floquet_derivatives(seq: VerblunskySequence, d: int):
    return _frozen(*fd_matrix_derivatives(lambda s: cmv.build_floquet(s, d), seq))


@lru_cache(maxsize=64)
def _fd_grad_K(n: int, seq: VerblunskySequence) -> WirtingerGradient:
    g = fd_gradient(lambda s: ham.K(n, s), seq)
    _frozen(g.d_alpha, g.d_alphabar)
    return g

def periodic_sides(variant: LaxVariant, seq: VerblunskySequence, d: int = 1, method: str = "analytic"):
    """Return ``(Q, LHS, RHS)`` for a periodic variant on Q_(d)."""
    flavour = variant.flavour
    q = cmv.build_floquet(seq, d)
    if method == "analytic":
        d_a, d_ab = cmv.floquet_derivatives(seq, d)
    elif method == "fd":
        d_a, d_ab = _fd_floquet_derivatives(seq, d)
    else:
        raise CmvError(f"unknown method {method!r}")
    rho2 = seq.slot_rho2
    if flavour == "K0":
        if method == "analytic":
            gh = ham.grad_K0(seq)
        else:
            gh = fd_gradient(ham.K0, seq)
        lhs = bracket_matrix(d_a, d_ab, gh, rho2)
        rhs = cmv.commutator(q, cmv.build_p_matrix(seq, q.shape[0]))
        return q, lhs, rhs
    n = variant.n
    if method == "analytic":
        g = grad_K(n, seq)
    else:
        g = _fd_grad_K(n, seq)
    lhs = bracket_matrix(d_a, d_ab, _combine(flavour, g), rho2)
    _, plus = cmv.floquet_power_plus(seq, n, d)
    rhs = cmv.commutator(q, _generator(flavour, plus))
    return q, lhs, rhs


# -- finite -----------------------------------------------------------------

def finite_sides(variant: LaxVariant, seq: VerblunskySequence, method: str = "analytic"):
    flavour = variant.flavour
    n = variant.n
    c = cmv.build_finite_cmv(seq)[0]
    if method == "analytic":
        d_a, d_ab = cmv.finite_derivatives(seq)
        g = ham.grad_K_finite(n, seq)
    elif method == "fd":
        d_a, d_ab = fd_matrix_derivatives(lambda s: cmv.build_finite_cmv(s)[0], seq)
        g = fd_gradient(lambda s: ham.K_finite(n, s), seq)
    else:
        raise CmvError(f"unknown method {method!r}")
    lhs = bracket_matrix(d_a, d_ab, _combine(flavour, g), seq.slot_rho2)
    plus = cmv.plus_projection(np.linalg.matrix_power(c, n))
    rhs = cmv.commutator(c, _generator(flavour, plus))
    return c, lhs, rhs


# -- infinite ---------------------------------------------------------------

def infinite_sides(variant: LaxVariant, seq: VerblunskySequence, window: int | None = None,
                   method: str = "analytic"):
    """Both sides on a W x W principal block plus the mask of trusted entries.

    The half-line matrix is built on a larger block and only rows/columns in
    ``[0, W - 4n)`` are compared, so no compared entry feels the cut.  The top
    rows need no guard: they are exact entries of the half-line matrix.
    """
    flavour = variant.flavour
    n = variant.n
    N = seq.alphas.size
    if window is None:
        window = N + 8 * n + 8
    if window < N + 8 * n:
        raise TruncationTooTight(f"window {window} < N + 8n = {N + 8 * n}")
    size = window + 4 * n + 8
    padded = seq.padded(size)
    a = np.array(padded.alphas)
    c = cmv.cmv_from_alphas(a)[0]
    cn1 = np.linalg.matrix_power(c, n - 1)
    if method == "analytic":
        d_a, d_ab = cmv.halfline_derivatives(a, size)
        g = WirtingerGradient(np.einsum("mkl,lk->m", d_a, cn1), np.einsum("mkl,lk->m", d_ab, cn1))
    elif method == "fd":
        d_a, d_ab = fd_matrix_derivatives(lambda s: cmv.cmv_from_alphas(s.alphas)[0], padded)
        cut = size - 2 * n - 2

        def k_inf(s):
            cs = np.linalg.matrix_power(cmv.cmv_from_alphas(s.alphas)[0], n)
            return complex(np.trace(cs[:cut, :cut]) / n)

        g = fd_gradient(k_inf, padded)
    else:
        raise CmvError(f"unknown method {method!r}")
    lhs = bracket_matrix(d_a, d_ab, _combine(flavour, g), padded.slot_rho2)
    plus = cmv.plus_projection(np.linalg.matrix_power(c, n))
    rhs = cmv.commutator(c, _generator(flavour, plus))
    mask = np.zeros((size, size), dtype=bool)
    hi = window - 4 * n
    mask[:hi, :hi] = True
    return c[:window, :window], lhs[:window, :window], rhs[:window, :window], mask[:window, :window]


def lax_residual(variant: LaxVariant, seq: VerblunskySequence, d: int = 1, method: str = "analytic",
                 window: int | None = None) -> ResidualReport:
    """Max-abs residual of the Lax identity for ``variant`` on ``seq``."""
    if seq.case != variant.case:
        raise CmvError(f"{variant} needs a {variant.case} sequence, got {seq.case}")
    if variant.case == PERIODIC:
        q, lhs, rhs = periodic_sides(variant, seq, d, method)
        rep, _ = _report(variant, lhs, rhs, method, d=d)
        if q.shape[0] < 5:
            rep.notes.append("small Floquet size: entries are wrapped sums of E entries")
        return rep
    if variant.case == FINITE:
        _, lhs, rhs = finite_sides(variant, seq, method)
        return _report(variant, lhs, rhs, method)[0]
    _, lhs, rhs, mask = infinite_sides(variant, seq, window, method)
    return _report(variant, lhs, rhs, method, mask=mask)[0]


# -- structural checks --------------------------------------------------------

def stair_profile(a: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """j(i): last column with a nonzero entry in row i (-1 for empty rows)."""
    nz = np.abs(a) > tol
    prof = np.array([np.flatnonzero(row).max() if row.any() else -1 for row in nz])
    return prof


def stair_commutator_check(a, b, profile=None) -> list:
    """Entries (i, j) with j > j(i) where [A, B_+] != [A, B] or [A, B_-] != 0.

    Returns the list of violations (empty means the identities hold exactly).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if profile is None:
        profile = stair_profile(a)
        profile = np.maximum.accumulate(profile)
    profile = np.asarray(profile)
    if np.any(np.diff(profile) < 0):
        raise NotStairShaped("shape function j(i) must be non-decreasing")
    for i, ji in enumerate(profile):
        if np.any(a[i, ji + 1:] != 0):
            raise NotStairShaped(f"row {i} has entries beyond column {ji}")
    bp = cmv.plus_projection(b)
    bm = b - bp
    full = cmv.commutator(a, b)
    cp = cmv.commutator(a, bp)
    cm = cmv.commutator(a, bm)
    bad = []
    for i, ji in enumerate(profile):
        for j in range(ji + 1, a.shape[1]):
            if cp[i, j] != full[i, j] or cm[i, j] != 0:
                bad.append((i, j, complex(cp[i, j] - full[i, j]), complex(cm[i, j])))
    return bad


def rhs_outside_band(variant: LaxVariant, seq: VerblunskySequence, d: int) -> float:
    """Largest RHS entry outside the CMV band of Q_(d) (should vanish)."""
    q, _, rhs = periodic_sides(variant, seq, d)
    mask = cmv.cmv_band_mask(q.shape[0], periodic=True)
    return float(np.max(np.abs(np.where(mask, 0.0, rhs))))


ORBIT_CLASSES = {
    "(k,k)": ((0, 0), (1, 1)),
    "(k,k-1)": ((0, -1), (0, 1)),
    "(k+1,k-1)": ((1, -1), (0, 2)),
    "(k+1,k)": ((1, 0), (1, 2)),
}


def residual_by_orbit_class(variant: LaxVariant, seq: VerblunskySequence, d: int = 1,
                            method: str = "analytic") -> dict:
    """Residual maxima over the four shift-orbit classes of in-band entries (k even).

    Each class holds an entry type and its partner under the transpose-shift
    symmetry; together they cover the CMV band.
    """
    q, lhs, rhs = periodic_sides(variant, seq, d, method)
    size = q.shape[0]
    res = np.abs(lhs - rhs)
    out = {}
    for name, offsets in ORBIT_CLASSES.items():
        m = 0.0
        for k in range(0, size, 2):
            for dr, dc in offsets:
                m = max(m, float(res[(k + dr) % size, (k + dc) % size]))
        out[name] = m
    out["all"] = float(res.max())
    return out


def finite_k0_obstruction(seq: VerblunskySequence, method: str = "analytic") -> dict:
    """Tr {C_f, K_0^f} and its closed form -i K_0^f (conj(alpha_0) - alpha_{k-2}).

    A nonzero trace rules out any Lax pair in C_f for the K_0^f flow.
    """
    if seq.case != FINITE:
        raise CmvError("finite sequences only")
    if method == "analytic":
        d_a, d_ab = cmv.finite_derivatives(seq)
        g = ham.grad_K0(seq)
    else:
        d_a, d_ab = fd_matrix_derivatives(lambda s: cmv.build_finite_cmv(s)[0], seq)
        g = fd_gradient(ham.K0, seq)
    lhs = bracket_matrix(d_a, d_ab, g, seq.slot_rho2)
    k0 = ham.K0(seq)
    a = seq.alphas
    closed = -1j * k0 * (np.conj(a[0]) - a[-2])
    tr = complex(np.trace(lhs))
    return {"trace": tr, "closed_form": complex(closed), "difference": abs(tr - closed)}


def conservation_under_lax(variant: LaxVariant, seq: VerblunskySequence, d: int = 1,
                           powers=(1, 2, 3)) -> dict:
    """Trace-level consequences of a periodic Lax pair.

    Reports |Tr RHS| (trace of a commutator), the difference between Tr LHS and
    the scalar bracket {Tr Q_(d), H}, and the scalar brackets {K_m, H} for the
    requested powers, which must all vanish.
    """
    q, lhs, rhs = periodic_sides(variant, seq, d)
    rho2 = seq.slot_rho2
    if variant.flavour == "K0":
        gh = ham.grad_K0(seq)
    else:
        gh = _combine(variant.flavour, grad_K(variant.n, seq))
    d_a, d_ab = cmv.floquet_derivatives(seq, d)
    g_tr = WirtingerGradient(np.einsum("mkk->m", d_a), np.einsum("mkk->m", d_ab))
    out = {
        "trace_rhs": abs(complex(np.trace(rhs))),
        "trace_lhs_vs_scalar": abs(complex(np.trace(lhs)) - bracket_from_gradients(g_tr, gh, rho2)),
    }
    for m in powers:
        out[f"bracket_K{m}"] = abs(bracket_from_gradients(grad_K(m, seq), gh, rho2))
    return out
