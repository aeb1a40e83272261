"""CMV-type operators built from 2x2 Theta blocks.

All matrices are dense ``complex128`` numpy arrays.  The doubly-infinite
extended CMV matrix is never stored: :class:`ExtendedCmvOracle` returns single
entries and finite windows, and :func:`build_floquet` gives its restriction to
``dp``-periodic sequences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coeffs import FINITE, INFINITE, PERIODIC, VerblunskySequence
from .errors import CmvError, ModulusOutOfRange, NonSquare, WindowTooSmall

ZERO_TOL = 1e-13


@dataclass(frozen=True)
class ThetaBlock:
    alpha: complex
    rho: float

    @property
    def matrix(self) -> np.ndarray:
        a, r = self.alpha, self.rho
        return np.array([[a.conjugate(), r], [r, -a]], dtype=complex)


def make_theta(alpha) -> ThetaBlock:
    alpha = complex(alpha)
    m = abs(alpha)
    if m > 1.0 + 1e-12:
        raise ModulusOutOfRange(0, alpha)
    return ThetaBlock(alpha, float(np.sqrt(max(0.0, 1.0 - m * m))))


def theta_matrix(alpha: complex) -> np.ndarray:
    r = np.sqrt(max(0.0, 1.0 - abs(alpha) ** 2))
    return np.array([[np.conj(alpha), r], [r, -alpha]], dtype=complex)


def theta_derivatives(alpha: complex) -> tuple[np.ndarray, np.ndarray]:
    """Wirtinger derivatives of Theta(alpha) w.r.t. alpha and conj(alpha).

    Uses d(rho)/d(alpha) = -conj(alpha)/(2 rho) and d(rho)/d(conj alpha) =
    -alpha/(2 rho), both from rho^2 = 1 - alpha*conj(alpha).
    """
    r = np.sqrt(1.0 - abs(alpha) ** 2)
    dr_da = -np.conj(alpha) / (2 * r)
    dr_dab = -alpha / (2 * r)
    d_a = np.array([[0.0, dr_da], [dr_da, -1.0]], dtype=complex)
    d_ab = np.array([[1.0, dr_dab], [dr_dab, 0.0]], dtype=complex)
    return d_a, d_ab


def as_complex_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise CmvError("expected a 2-d matrix")
    if not np.all(np.isfinite(arr)):
        raise CmvError("matrix has NaN or Inf entries")
    return arr


# -- block factors ------------------------------------------------------------

def _factor(alphas: np.ndarray, parity: int, wrap: bool, lo: int = 0) -> np.ndarray:
    """Block-diagonal factor on absolute indices ``lo .. lo+len(alphas)-1``.

    Theta(alpha_j) sits on rows/columns (j, j+1) for every j of the given
    parity.  Without ``wrap`` a block straddling the upper edge is clipped to
    its top-left entry and an uncovered first index gets a 1; with ``wrap``
    the last block couples index ``size-1`` back to index 0.
    """
    size = alphas.size
    out = np.zeros((size, size), dtype=complex)
    start = (parity - lo) % 2
    if start == 1 and not wrap:
        out[0, 0] = 1.0
    for i in range(start, size, 2):
        t = theta_matrix(alphas[i])
        i2 = i + 1
        if i2 >= size:
            if wrap:
                i2 = 0
            else:
                out[i, i] = t[0, 0]
                continue
        idx = [i, i2]
        out[np.ix_(idx, idx)] = t
    return out


def build_finite_cmv(seq: VerblunskySequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(C_f, L_f, M_f)`` for a finite sequence (boundary -1)."""
    if seq.case != FINITE:
        raise CmvError("finite CMV needs a finite sequence")
    return cmv_from_alphas(seq.alphas)


def cmv_from_alphas(alphas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-line CMV product L*M truncated to ``len(alphas)`` rows and columns.

    For a finite sequence ending in a unimodular coefficient this is exactly
    the finite CMV matrix.  Otherwise it is the principal block of the infinite
    CMV matrix, wrong only within two rows/columns of the cut.
    """
    a = np.asarray(alphas, dtype=complex)
    L = _factor(a, 0, wrap=False)
    M = _factor(a, 1, wrap=False)
    return L @ M, L, M


def halfline_window(seq: VerblunskySequence, size: int) -> np.ndarray:
    """Leading ``size x size`` block of the half-line CMV matrix (infinite case)."""
    if seq.case != INFINITE:
        raise CmvError("half-line window needs an infinite sequence")
    a = np.zeros(size, dtype=complex)
    m = min(size, seq.alphas.size)
    a[:m] = seq.alphas[:m]
    return cmv_from_alphas(a)[0]


def floquet_from_alphas(alphas: np.ndarray, d: int = 1) -> np.ndarray:
    """Q_(d) for one even period of positional alphas (unimodular values allowed)."""
    a = np.asarray(alphas, dtype=complex)
    if a.size % 2:
        raise CmvError("Floquet restriction needs an even period")
    a = np.tile(a, d)
    L = _factor(a, 0, wrap=True)
    M = _factor(a, 1, wrap=True)
    return L @ M


def build_floquet(seq: VerblunskySequence, d: int = 1) -> np.ndarray:
    """Restriction of E to ``d`` copies of the effective period, size ``d*P``."""
    if seq.case != PERIODIC:
        raise CmvError("Floquet matrices need a periodic sequence")
    if d < 1:
        raise CmvError("d must be positive")
    return floquet_from_alphas(seq.alphas, d)


class ExtendedCmvOracle:
    """Entry access to the doubly-infinite extended CMV matrix of a periodic sequence."""

    def __init__(self, seq: VerblunskySequence):
        if seq.case != PERIODIC:
            raise CmvError("extended CMV needs a periodic sequence")
        self.seq = seq
        self.period = seq.effective_period
        self._alphas = np.array(seq.alphas)
        self._thetas = [theta_matrix(a) for a in self._alphas]

    def _theta(self, j: int) -> np.ndarray:
        return self._thetas[j % self.period]

    def _lt(self, j: int, k: int) -> complex:
        b = j - (j % 2)
        if k not in (b, b + 1):
            return 0j
        return self._theta(b)[j - b, k - b]

    def _mt(self, j: int, k: int) -> complex:
        b = j - ((j + 1) % 2)
        if k not in (b, b + 1):
            return 0j
        return self._theta(b)[j - b, k - b]

    def entry(self, j: int, k: int) -> complex:
        b = j - (j % 2)
        return complex(self._lt(j, b) * self._mt(b, k) + self._lt(j, b + 1) * self._mt(b + 1, k))

    def alpha(self, j: int) -> complex:
        return complex(self._alphas[j % self.period])

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Exact entries E_{jk} for ``lo <= j, k < hi``."""
        ext = np.array([self.alpha(j) for j in range(lo - 2, hi + 2)])
        L = _factor(ext, 0, wrap=False, lo=lo - 2)
        M = _factor(ext, 1, wrap=False, lo=lo - 2)
        return (L @ M)[2:-2, 2:-2]

    def power_window(self, n: int, lo: int, hi: int) -> np.ndarray:
        """Exact entries of E^n for rows and columns in ``[lo, hi)``."""
        if n == 0:
            return np.eye(hi - lo, dtype=complex)
        g = 2 * n
        w = self.window(lo - g, hi + g)
        return np.linalg.matrix_power(w, n)[g:-g, g:-g]


def floquet_via_sum(oracle: ExtendedCmvOracle, d: int = 1, n: int = 1) -> np.ndarray:
    """Q_(d)^n assembled as sum_l E^n_{j, k + l*dp} from oracle entries."""
    size = d * oracle.period
    g = 2 * n
    rows = oracle.power_window(n, -g, size + g)
    out = np.zeros((size, size), dtype=complex)
    for j in range(size):
        for kk in range(-g, size + g):
            if abs(kk - j) <= g:
                out[j, kk % size] += rows[j + g, kk + g]
    return out


def floquet_power_plus(seq: VerblunskySequence, n: int, d: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Q_(d)^n, Q_(d),+^n)``.

    The second matrix represents ``(E^n)_+`` on ``dp``-periodic sequences; it is
    not the plus-projection of ``Q^n`` and carries wrapped entries in its lower
    left corner.
    """
    oracle = ExtendedCmvOracle(seq)
    size = d * oracle.period
    g = 2 * n
    rows = oracle.power_window(n, -g, size + g)[g : g + size]
    full = np.zeros((size, size), dtype=complex)
    plus = np.zeros((size, size), dtype=complex)
    for j in range(size):
        for kk in range(j - g, j + g + 1):
            v = rows[j, kk + g]
            full[j, kk % size] += v
            if kk > j:
                plus[j, kk % size] += v
            elif kk == j:
                plus[j, kk % size] += 0.5 * v
    return full, plus


def plus_projection(m) -> np.ndarray:
    """Strict upper part plus half the diagonal."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonSquare(f"plus projection needs a square matrix, got {m.shape}")
    out = np.triu(m, 1).astype(complex)
    out[np.diag_indices_from(out)] = 0.5 * np.diag(m)
    return out


def build_p_matrix(seq: VerblunskySequence, size: int) -> np.ndarray:
    """Diagonal P with entries (-1)^l (i/2) prod rho_k^2 over one raw period."""
    if size % 2:
        raise CmvError("P is only consistent on even sizes")
    k0 = float(np.prod(seq.slot_rho2))
    signs = np.where(np.arange(size) % 2 == 0, 1.0, -1.0)
    return np.diag(signs * 0.5j * k0)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


# -- structure predicates -----------------------------------------------------

def band_violations(mn, n: int, offset: int = 0, periodic: bool = False, tol: float = ZERO_TOL):
    """Entries of an n-th CMV power that should vanish identically but do not.

    ``offset`` is the absolute index of row/column 0 (E-windows); with
    ``periodic`` the matrix is a Floquet power and indices are read modulo its
    size, which requires ``size >= 4n + 2``.  Returns a list of ``(j, k, value)``.
    """
    mn = np.asarray(mn)
    size = mn.shape[0]
    if periodic and size < 4 * n + 2:
        raise WindowTooSmall(f"size {size} < 4n+2 = {4 * n + 2}: wraparound reaches the band")
    bad = []
    for r in range(size):
        for c in range(mn.shape[1]):
            j, k = r + offset, c + offset
            diff = j - k
            if periodic:
                diff = (diff + size // 2) % size - size // 2
                k = j - diff
            must_vanish = (
                abs(diff) >= 2 * n + 1
                or (n > 0 and diff == 2 * n and j % 2 == 0 and k % 2 == 0)
                or (n > 0 and diff == -2 * n and j % 2 == 1 and k % 2 == 1)
            )
            if n == 0:
                must_vanish = diff != 0
            if must_vanish and abs(mn[r, c]) > tol:
                bad.append((j, k, complex(mn[r, c])))
    return bad


def band_shape_check(mn, n: int, offset: int = 0, periodic: bool = False) -> bool:
    return not band_violations(mn, n, offset=offset, periodic=periodic)


def cmv_band_mask(size: int, periodic: bool = False, offset: int = 0) -> np.ndarray:
    """Boolean mask of the positions a CMV matrix may occupy (n = 1 shape)."""
    mask = np.ones((size, size), dtype=bool)
    for j, k, _ in band_violations(np.ones((size, size)), 1, offset=offset, periodic=periodic):
        mask[j - offset, (k - offset) % size if periodic else k - offset] = False
    return mask


# -- derivative assembly ------------------------------------------------------

def factor_derivatives(
    alphas: np.ndarray,
    variable_of: Callable[[int], int | None],
    n_vars: int,
    wrap: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """d(L M)/d(alpha_m) and d(L M)/d(conj alpha_m) for every variable m.

    ``alphas`` are positional values of the matrix (one entry per row);
    ``variable_of(q)`` names the variable at position q, or None for a
    frozen coefficient.  Returns two arrays of shape ``(n_vars, size, size)``.
    """
    a = np.asarray(alphas, dtype=complex)
    size = a.size
    L = _factor(a, 0, wrap)
    M = _factor(a, 1, wrap)
    d_a = np.zeros((n_vars, size, size), dtype=complex)
    d_ab = np.zeros((n_vars, size, size), dtype=complex)
    for q in range(size):
        m = variable_of(q)
        if m is None:
            continue
        q2 = q + 1
        if q2 >= size:
            if not wrap:
                # clipped block keeps conj(alpha_q) only
                if q % 2 == 0:
                    d_ab[m, q, :] += M[q, :]
                else:
                    d_ab[m, :, q] += L[:, q]
                continue
            q2 = 0
        idx = [q, q2]
        ta, tab = theta_derivatives(a[q])
        if q % 2 == 0:
            d_a[m][idx, :] += ta @ M[idx, :]
            d_ab[m][idx, :] += tab @ M[idx, :]
        else:
            d_a[m][:, idx] += L[:, idx] @ ta
            d_ab[m][:, idx] += L[:, idx] @ tab
    return d_a, d_ab


def floquet_derivatives(seq: VerblunskySequence, d: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Wirtinger derivatives of Q_(d) with respect to each raw-period slot."""
    p = seq.period
    a = np.tile(seq.alphas, d)
    return factor_derivatives(a, lambda q: q % p, p, wrap=True)


def finite_derivatives(seq: VerblunskySequence) -> tuple[np.ndarray, np.ndarray]:
    """Wirtinger derivatives of C_f with respect to alpha_0 .. alpha_{k-2}."""
    k = seq.alphas.size
    return factor_derivatives(seq.alphas, lambda q: q if q < k - 1 else None, k - 1, wrap=False)


def halfline_derivatives(alphas: np.ndarray, n_vars: int) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of a truncated half-line CMV window for the first ``n_vars`` positions."""
    return factor_derivatives(alphas, lambda q: q if q < n_vars else None, n_vars, wrap=False)


# -- CSV dump -----------------------------------------------------------------

def write_matrix_csv(m, fh, tol: float = ZERO_TOL) -> int:
    """Write nonzero entries as ``row,col,re,im`` rows; returns the count."""
    m = np.asarray(m)
    writer = csv.writer(fh)
    writer.writerow(["row", "col", "re", "im"])
    count = 0
    for (r, c), v in np.ndenumerate(m):
        if abs(v) > tol:
            writer.writerow([r, c, repr(float(v.real)), repr(float(v.imag))])
            count += 1
    return count


def read_matrix_csv(fh, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)
    reader = csv.DictReader(fh)
    for row in reader:
        out[int(row["row"]), int(row["col"])] = complex(float(row["re"]), float(row["im"]))
    return out
