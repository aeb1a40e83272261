"""Hamiltonian flows alpha_j' = {alpha_j, H} on periodic coefficients."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import cmv, hamiltonians as ham
from .coeffs import PERIODIC, VerblunskySequence
from .errors import CmvError, DiskExit, StepRejected
from .hamiltonians import HamiltonianSpec
from .poisson import fd_gradient

log = logging.getLogger(__name__)

DISK_MARGIN = 1e-9
MAX_HALVINGS = 20


@dataclass(frozen=True)
class FlowConfig:
    hamiltonian: HamiltonianSpec
    t_end: float
    dt: float
    monitor_every: int = 1
    gradient_method: str = "analytic"

    def __post_init__(self):
        if not self.dt > 0:
            raise CmvError("dt must be positive")
        if self.t_end < 0:
            raise CmvError("t_end must be non-negative")
        if self.monitor_every < 1:
            raise CmvError("monitor_every must be >= 1")
        if self.gradient_method not in ("analytic", "fd"):
            raise CmvError(f"unknown gradient method {self.gradient_method!r}")


@dataclass
class TrajectoryRecord:
    t: float
    alphas: np.ndarray
    monitors: dict = field(default_factory=dict)


def vector_field(spec: HamiltonianSpec, seq: VerblunskySequence, method: str = "analytic") -> np.ndarray:
    """d alpha_j / dt = {alpha_j, H} = -i rho_j^2 dH/d(conj alpha_j), over the slots."""
    if seq.case != PERIODIC:
        raise CmvError("flows are integrated for periodic sequences")
    if method == "analytic":
        g = ham.gradient(spec, seq)
    else:
        g = fd_gradient(lambda s: ham.value(spec, s), seq)
    return -1j * seq.slot_rho2 * g.d_alphabar


def monitors(seq: VerblunskySequence) -> dict:
    """Quantities conserved (or bounded) along every flow of the hierarchy."""
    out = {"K0": ham.K0(seq)}
    for n in (1, 2, 3):
        k = ham.K(n, seq)
        out[f"ReK{n}"] = k.real
        out[f"ImK{n}"] = k.imag
    for j, c in enumerate(ham.char_poly_coeffs(cmv.build_floquet(seq, 1))):
        out[f"charpoly{j}_re"] = c.real
        out[f"charpoly{j}_im"] = c.imag
    for j, v in enumerate(ham.invariant_vector(seq)):
        out[f"invariant{j}"] = v
    q = cmv.build_floquet(seq, 1)
    out["unitarity"] = float(np.max(np.abs(q @ q.conj().T - np.eye(q.shape[0]))))
    out["maxmod"] = float(np.max(np.abs(seq.slots)))
    return out


class _StageLeftDisk(Exception):
    def __init__(self, x):
        self.x = x


def _rk4_step(spec, seq, dt, method):
    def f(x):
        if not _inside(x):
            raise _StageLeftDisk(x)
        return vector_field(spec, seq.with_slots(x), method)

    x = np.array(seq.slots)
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _inside(x) -> bool:
    return bool(np.all(np.abs(x) < 1.0 - DISK_MARGIN))


def _safe_step(spec, seq, dt, method, t):
    """One RK4 step of size dt, substepping with halved sizes if a trial leaves the disk."""
    for halvings in range(MAX_HALVINGS + 1):
        h = dt / 2**halvings
        cur = seq
        ok = True
        for _ in range(2**halvings):
            try:
                x = _rk4_step(spec, cur, h, method)
            except _StageLeftDisk as exc:
                x = exc.x
                ok = False
                break
            except CmvError:
                x = np.array(cur.slots)
                ok = False
                break
            if not _inside(x):
                ok = False
                break
            cur = seq.with_slots(x)
        if ok:
            if halvings:
                log.debug("step at t=%g needed %d halvings", t, halvings)
            return cur
    j = int(np.argmax(np.abs(x)))
    if abs(x[j]) >= 1.0 - DISK_MARGIN:
        raise DiskExit(t, j, float(abs(x[j])))
    raise StepRejected(f"step at t={t:g} rejected after {MAX_HALVINGS} halvings")


def integrate(config: FlowConfig, seq: VerblunskySequence, with_monitors: bool = True) -> list[TrajectoryRecord]:
    """Classical RK4 with fixed step; monitors every ``monitor_every`` steps and at the end."""
    if seq.case != PERIODIC:
        raise CmvError("flows are integrated for periodic sequences")
    steps = int(round(config.t_end / config.dt))
    dt = config.t_end / steps if steps else config.dt

    def record(t, s):
        return TrajectoryRecord(t, np.array(s.slots), monitors(s) if with_monitors else {})

    traj = [record(0.0, seq)]
    cur = seq
    for i in range(1, steps + 1):
        cur = _safe_step(config.hamiltonian, cur, dt, config.gradient_method, (i - 1) * dt)
        if i % config.monitor_every == 0 or i == steps:
            traj.append(record(i * dt, cur))
    return traj


def drift_report(traj: list[TrajectoryRecord]) -> dict:
    """Per-monitor max |value(t) - value(0)|."""
    if not traj:
        raise CmvError("empty trajectory")
    first = traj[0].monitors
    return {name: float(max(abs(r.monitors[name] - v0) for r in traj)) for name, v0 in first.items()}


def write_trajectory_csv(traj: list[TrajectoryRecord], fh) -> None:
    """Columns: t, alpha{j}_re, alpha{j}_im..., K0, ReK1, ImK1, ReK2, ImK2, unitarity, maxmod."""
    p = traj[0].alphas.size
    cols = ["K0", "ReK1", "ImK1", "ReK2", "ImK2", "unitarity", "maxmod"]
    writer = csv.writer(fh)
    header = ["t"]
    for j in range(p):
        header += [f"alpha{j}_re", f"alpha{j}_im"]
    writer.writerow(header + cols)
    for r in traj:
        row = [repr(r.t)]
        for a in r.alphas:
            row += [repr(float(a.real)), repr(float(a.imag))]
        row += [repr(float(r.monitors[c])) for c in cols]
        writer.writerow(row)
