"""Verblunsky coefficient sequences for the finite, periodic and infinite problems.

A sequence stores its coefficients positionally.  The *slots* of a sequence are
the coefficients that are dynamical variables of the Ablowitz-Ladik phase space:

* periodic, raw period ``p``: slots ``0..p-1`` (positions wrap modulo the even
  effective period, which is ``p`` or ``2p``);
* finite, length ``k``: slots ``0..k-2``; ``alpha_{k-1} = -1`` is frozen;
* infinite, truncation ``N``: slots ``0..N-1``; everything beyond is zero.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    BadBoundaryPhase,
    CmvError,
    IndexOutOfDomain,
    ModulusOutOfRange,
    OddPeriodNotCanonicalized,
)

FINITE = "finite"
PERIODIC = "periodic"
INFINITE = "infinite"
CASES = (FINITE, PERIODIC, INFINITE)

# below this margin rho_j is small enough that 1/rho_j factors lose precision
BOUNDARY_WARN_MARGIN = 1e-12


class NearBoundaryWarning(UserWarning):
    pass


def _as_complex_array(alphas) -> np.ndarray:
    arr = np.array(alphas, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise CmvError("coefficients must be finite complex numbers")
    return arr


@dataclass(frozen=True, eq=False)
class VerblunskySequence:
    """Immutable coefficient data tagged with its problem case.

    Use the :meth:`periodic`, :meth:`finite` and :meth:`infinite`
    constructors; they canonicalize and validate.  ``alphas`` holds one
    effective period (periodic), all ``k`` values (finite), or the ``N``
    stored values (infinite).
    """

    case: str
    alphas: np.ndarray
    period: int | None = None
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        arr = _as_complex_array(self.alphas)
        arr.setflags(write=False)
        object.__setattr__(self, "alphas", arr)

    # -- constructors -------------------------------------------------------
    @classmethod
    def periodic(cls, alphas) -> "VerblunskySequence":
        raw = _as_complex_array(alphas)
        if raw.size < 1:
            raise CmvError("periodic sequence needs at least one coefficient")
        seq = cls(PERIODIC, raw, period=raw.size)
        return validate(canonicalize_period(seq))

    @classmethod
    def finite(cls, alphas) -> "VerblunskySequence":
        return validate(cls(FINITE, alphas))

    @classmethod
    def infinite(cls, alphas) -> "VerblunskySequence":
        return validate(cls(INFINITE, alphas))

    # -- views ----------------------------------------------------------------
    @property
    def effective_period(self) -> int | None:
        if self.case != PERIODIC:
            return None
        return self.alphas.size

    @property
    def n_slots(self) -> int:
        if self.case == PERIODIC:
            return self.period
        if self.case == FINITE:
            return self.alphas.size - 1
        return self.alphas.size

    @property
    def slots(self) -> np.ndarray:
        return self.alphas[: self.n_slots]

    @property
    def rho(self) -> np.ndarray:
        """rho_j for every stored position (0 at a unimodular boundary)."""
        return np.sqrt(np.clip(1.0 - np.abs(self.alphas) ** 2, 0.0, None))

    @property
    def slot_rho2(self) -> np.ndarray:
        """rho_j^2 over the slots; these weight the Poisson bracket."""
        return 1.0 - np.abs(self.slots) ** 2

    def with_slots(self, values) -> "VerblunskySequence":
        """Same case and shape with the slot values replaced (validated)."""
        vals = _as_complex_array(values)
        if vals.size != self.n_slots:
            raise CmvError(f"expected {self.n_slots} slot values, got {vals.size}")
        if self.case == PERIODIC:
            return VerblunskySequence.periodic(vals)
        if self.case == FINITE:
            return VerblunskySequence.finite(np.append(vals, -1.0))
        return VerblunskySequence.infinite(vals)

    def padded(self, length: int) -> "VerblunskySequence":
        """Infinite case: store ``length`` values, appending explicit zeros."""
        if self.case != INFINITE:
            raise CmvError("padding only applies to infinite sequences")
        if length < self.alphas.size:
            raise CmvError("cannot pad to a shorter length")
        out = np.zeros(length, dtype=complex)
        out[: self.alphas.size] = self.alphas
        return VerblunskySequence.infinite(out)

    def positions(self, start: int, stop: int) -> np.ndarray:
        """alpha_j for consecutive integer positions ``start <= j < stop``."""
        return np.array([alpha_at(self, j) for j in range(start, stop)], dtype=complex)

    def to_dict(self) -> dict:
        vals = self.alphas[: self.period] if self.case == PERIODIC else self.alphas
        return {"case": self.case, "alphas": [[float(a.real), float(a.imag)] for a in vals]}

    def __eq__(self, other):
        if not isinstance(other, VerblunskySequence):
            return NotImplemented
        return (
            self.case == other.case
            and self.period == other.period
            and np.array_equal(self.alphas, other.alphas)
        )

    def __hash__(self):
        return hash((self.case, self.period, self.alphas.tobytes()))


def canonicalize_period(seq: VerblunskySequence) -> VerblunskySequence:
    """Repeat an odd period once so the effective period is even.  Idempotent."""
    if seq.case != PERIODIC:
        raise CmvError("only periodic sequences carry a period")
    p = seq.period
    if seq.alphas.size == p and p % 2 == 1:
        return VerblunskySequence(PERIODIC, np.tile(seq.alphas, 2), period=p)
    return seq


def validate(seq: VerblunskySequence) -> VerblunskySequence:
    """Check every invariant of ``seq``; return it unchanged or raise.

    Emits :class:`NearBoundaryWarning` when an interior coefficient is within
    1e-12 of the unit circle.
    """
    if seq.case not in CASES:
        raise CmvError(f"unknown case {seq.case!r}")
    a = seq.alphas
    if seq.case == PERIODIC:
        p = seq.period
        if p is None or p < 1:
            raise CmvError("periodic sequence needs a positive period")
        eff = 2 * p if p % 2 else p
        if a.size != eff:
            raise OddPeriodNotCanonicalized(
                f"raw period {p} requires {eff} stored coefficients, found {a.size}"
            )
        if eff != p and not np.array_equal(a[:p], a[p:]):
            raise OddPeriodNotCanonicalized("doubled period is not a repetition")
        interior = a[:p]
    elif seq.case == FINITE:
        if a.size < 2:
            raise CmvError("finite sequence needs k >= 2")
        if a[-1] != -1.0:
            raise BadBoundaryPhase(complex(a[-1]))
        interior = a[:-1]
    else:
        if a.size < 1:
            raise CmvError("infinite sequence needs at least one stored value")
        interior = a
    mod = np.abs(interior)
    bad = np.flatnonzero(mod >= 1.0)
    if bad.size:
        j = int(bad[0])
        raise ModulusOutOfRange(j, complex(interior[j]))
    close = np.flatnonzero(1.0 - mod < BOUNDARY_WARN_MARGIN)
    if close.size:
        warnings.warn(
            f"alpha_{int(close[0])} is within {BOUNDARY_WARN_MARGIN:g} of the unit circle",
            NearBoundaryWarning,
            stacklevel=2,
        )
    object.__setattr__(seq, "_validated", True)
    return seq


def alpha_at(seq: VerblunskySequence, j: int) -> complex:
    """Coefficient at integer position ``j`` under the case's boundary rules."""
    j = int(j)
    a = seq.alphas
    if seq.case == PERIODIC:
        return complex(a[j % a.size])
    if seq.case == FINITE:
        if j == -1:
            return -1.0 + 0j
        if 0 <= j < a.size:
            return complex(a[j])
        raise IndexOutOfDomain(f"finite sequence of length {a.size} has no alpha_{j}")
    if j == -1 or j >= a.size:
        return 0j
    if j < -1:
        raise IndexOutOfDomain(f"infinite sequence has no alpha_{j}")
    return complex(a[j])


def rho_at(seq: VerblunskySequence, j: int) -> float:
    return float(np.sqrt(max(0.0, 1.0 - abs(alpha_at(seq, j)) ** 2)))


def random_alphas(rng: np.random.Generator, size: int, radius: float = 0.9) -> np.ndarray:
    """Uniform in modulus squared on ``[0, radius^2]`` with uniform phase."""
    mod = np.sqrt(rng.uniform(0.0, radius**2, size))
    phase = rng.uniform(0.0, 2 * np.pi, size)
    return mod * np.exp(1j * phase)


def random_periodic(rng: np.random.Generator, p: int, radius: float = 0.9) -> VerblunskySequence:
    return VerblunskySequence.periodic(random_alphas(rng, p, radius))


def random_finite(rng: np.random.Generator, k: int, radius: float = 0.9) -> VerblunskySequence:
    return VerblunskySequence.finite(np.append(random_alphas(rng, k - 1, radius), -1.0))


# -- JSON file format ---------------------------------------------------------

def from_dict(data: dict) -> VerblunskySequence:
    try:
        case = data["case"]
        pairs: Iterable = data["alphas"]
        alphas = [complex(float(re), float(im)) for re, im in pairs]
    except (KeyError, TypeError, ValueError) as exc:
        raise CmvError(f"malformed coefficient data: {exc}") from exc
    if case == PERIODIC:
        return VerblunskySequence.periodic(alphas)
    if case == FINITE:
        return VerblunskySequence.finite(alphas)
    if case == INFINITE:
        return VerblunskySequence.infinite(alphas)
    raise CmvError(f"unknown case {case!r}")


def load_json(path) -> VerblunskySequence:
    with open(path) as fh:
        return from_dict(json.load(fh))


def dump_json(seq: VerblunskySequence, path) -> None:
    with open(path, "w") as fh:
        json.dump(seq.to_dict(), fh)
