"""Command-line front end.

Exit codes: 0 pass, 1 threshold failure, 2 usage or parse error, 3 numeric
abort (the flow left the disk, or some rho vanished).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__, cmv, coeffs, flows, lax, opuc, poisson
from . import hamiltonians as ham
from .coeffs import FINITE, INFINITE, PERIODIC, VerblunskySequence
from .errors import CmvError, DiskExit, RhoDegenerate, StepRejected

log = logging.getLogger("cmvlax")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_THRESHOLDS = {"analytic": 1e-10, "fd": 1e-5, "drift": 1e-6}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    input_digest: str
    seed: int | None
    version: str = __version__
    thresholds: dict = field(default_factory=dict)
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "input_digest": self.input_digest,
            "seed": self.seed,
            "version": self.version,
            "thresholds": self.thresholds,
            "timestamp": self.timestamp,
        }


def _digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _manifest(args, digest: str, seed=None) -> RunManifest:
    return RunManifest(
        command=args.command,
        input_digest=digest,
        seed=seed,
        thresholds=_thresholds(args),
        timestamp=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    )


def _thresholds(args) -> dict:
    out = dict(DEFAULT_THRESHOLDS)
    for key in out:
        val = getattr(args, f"threshold_{key}", None)
        if val is not None:
            out[key] = val
    return out


def _cplx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _emit(payload: dict, args) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out and args.command != "flow" and args.command != "discriminant" and args.command != "dump":
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    if args.json or not args.out:
        print(text)


# -- input -------------------------------------------------------------------

def _load_coeffs(path) -> tuple[VerblunskySequence, str]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        data = json.loads(raw)
        return coeffs.from_dict(data), _digest(raw)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except CmvError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _seq_digest(seq: VerblunskySequence) -> str:
    return _digest(json.dumps(seq.to_dict(), sort_keys=True).encode())


def _single_sequence(args) -> tuple[VerblunskySequence, str, int | None]:
    """One sequence from --coeffs, or a random periodic one from --random P and --seed."""
    if args.coeffs:
        seq, digest = _load_coeffs(args.coeffs)
        return seq, digest, None
    if args.random is None:
        raise UsageError("give --coeffs FILE or --random P")
    p = args.random[0]
    seed = args.seed if args.seed is not None else 0
    seq = coeffs.random_periodic(np.random.default_rng(seed), p)
    return seq, _seq_digest(seq), seed


# -- verify ------------------------------------------------------------------

def _variants_for(case: str, kinds, ns) -> list:
    pool = {PERIODIC: lax.PERIODIC_KINDS, FINITE: lax.FINITE_KINDS, INFINITE: lax.INFINITE_KINDS}[case]
    out = []
    for kind in pool:
        if kinds and kind not in kinds:
            continue
        if kind == "PeriodicK0":
            out.append(lax.LaxVariant(kind))
        else:
            out.extend(lax.LaxVariant(kind, n) for n in ns)
    return out


def _run_case(seq, variants, ds, method, threshold, seed):
    reports = []
    for v in variants:
        for d in ds if seq.case == PERIODIC else (None,):
            rep = lax.lax_residual(v, seq, d=d or 1, method=method)
            rep.d = d
            rep.seed = seed
            rep.passed = rep.max_abs_residual < threshold
            reports.append(rep)
    return reports


def cmd_verify(args) -> int:
    kinds = set(args.variant or [])
    unknown = kinds - set(lax.ALL_KINDS)
    if unknown:
        raise UsageError(f"unknown variant(s): {', '.join(sorted(unknown))}")
    ns = args.n or [1, 2, 3]
    ds = args.d or [1, 2]
    threshold = _thresholds(args)[args.method]

    jobs = []
    if args.coeffs:
        seq, digest = _load_coeffs(args.coeffs)
        jobs.append((seq, None))
        seed_rec = None
    elif args.random:
        p, seed0, count = args.random
        seed_rec = seed0
        digest = _digest(f"random:{p}:{seed0}:{count}".encode())
        for s in range(seed0, seed0 + count):
            rng = np.random.default_rng(s)
            jobs.append((coeffs.random_periodic(rng, p), s))
            if args.all:
                jobs.append((coeffs.random_finite(rng, p + 2), s))
                jobs.append((VerblunskySequence.infinite(coeffs.random_alphas(rng, p)), s))
    else:
        raise UsageError("give --coeffs FILE or --random P SEED COUNT")

    work = []
    for seq, s in jobs:
        variants = _variants_for(seq.case, kinds, ns)
        if variants:
            work.append((seq, variants, s))
    if not work:
        raise UsageError("no variant matches the selected coefficients")

    def run(item):
        seq, variants, s = item
        return _run_case(seq, variants, ds, args.method, threshold, s)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        # map preserves submission order, so output is deterministic
        results = list(pool.map(run, work))
    reports = [r for batch in results for r in batch]
    ok = all(r.passed for r in reports)
    _emit({"manifest": _manifest(args, digest, seed_rec).to_dict(),
           "passed": ok,
           "reports": [r.to_dict() for r in reports]}, args)
    if not args.json and args.out:
        print(f"{sum(r.passed for r in reports)}/{len(reports)} residual checks passed")
    return EXIT_OK if ok else EXIT_FAIL


# -- flow --------------------------------------------------------------------

NOT_CONSERVED = ("maxmod",)


def _order_fit(d1: float, d2: float) -> float | None:
    if d1 <= 0 or d2 <= 0:
        return None
    return float(np.log2(d1 / d2))


def _run_flow(spec, seq, t_end, dt, method, monitor_every):
    cfg = flows.FlowConfig(spec, t_end, dt, monitor_every=monitor_every, gradient_method=method)
    traj = flows.integrate(cfg, seq)
    return traj, flows.drift_report(traj)


def cmd_flow(args) -> int:
    seq, digest, seed = _single_sequence(args)
    if seq.case != PERIODIC:
        raise UsageError("flows need periodic coefficients")
    try:
        spec = ham.HamiltonianSpec.parse(args.hamiltonian)
    except CmvError as exc:
        raise UsageError(str(exc)) from exc
    limit = _thresholds(args)["drift"]
    every = max(1, int(args.monitor_every))
    traj, drift = _run_flow(spec, seq, args.t, args.dt, args.method, every)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            flows.write_trajectory_csv(traj, fh)
    conserved = {k: v for k, v in drift.items() if k not in NOT_CONSERVED}
    worst = max(conserved.values()) if conserved else 0.0
    payload = {
        "manifest": _manifest(args, digest, seed).to_dict(),
        "hamiltonian": str(spec),
        "records": len(traj),
        "drift": drift,
        "max_conserved_drift": worst,
    }
    ok = worst < limit
    if args.order_check and args.t > 0:
        _, drift2 = _run_flow(spec, seq, args.t, args.dt / 2, args.method, 2 * every)
        worst2 = max(v for k, v in drift2.items() if k not in NOT_CONSERVED)
        payload["order_check"] = {
            "dt": args.dt,
            "drift": worst,
            "drift_half_dt": worst2,
            "ratio": worst / worst2 if worst2 > 0 else None,
            "order": _order_fit(worst, worst2),
        }
    payload["passed"] = ok
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_FAIL


# -- discriminant --------------------------------------------------------------

def cmd_discriminant(args) -> int:
    seq, digest, seed = _single_sequence(args)
    if seq.case != PERIODIC:
        raise UsageError("the discriminant needs periodic coefficients")
    if args.grid < 1:
        raise UsageError("--grid must be positive")
    theta = 2 * np.pi * np.arange(args.grid) / args.grid
    two = seq.period == 2
    header = ["theta", "delta_re", "delta_im"]
    if two:
        header += ["closed_re", "closed_im"]
    if args.experimental_transfer:
        header += ["transfer_re", "transfer_im"]
    rows = []
    for th in theta:
        z = np.exp(1j * th)
        val = ham.discriminant(seq, z)
        row = [repr(float(th)), repr(val.real), repr(val.imag)]
        if two:
            a, b = seq.alphas[0], seq.alphas[1]
            cf = complex(ham.discriminant_two_periodic(a, b, th))
            row += [repr(cf.real), repr(cf.imag)]
        if args.experimental_transfer:
            tv = opuc.transfer_discriminant(seq, z)
            row += [repr(tv.real), repr(tv.imag)]
        rows.append(row)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()
    if args.json:
        print(json.dumps({"manifest": _manifest(args, digest, seed).to_dict(), "points": len(rows)},
                         indent=2, sort_keys=True), file=sys.stderr)
    return EXIT_OK


# -- invariants and dump -------------------------------------------------------

def cmd_invariants(args) -> int:
    seq, digest, seed = _single_sequence(args)
    if seq.case != PERIODIC:
        raise UsageError("invariants are computed for periodic coefficients")
    ns = args.n or [1, 2, 3]
    dp = ham.discriminant_poly(seq)
    _emit({
        "manifest": _manifest(args, digest, seed).to_dict(),
        "K": [_cplx(ham.K(n, seq)) for n in ns],
        "K0": ham.K0(seq),
        "c": [_cplx(c) for c in dp.coeffs],
    }, args)
    return EXIT_OK


def cmd_dump(args) -> int:
    seq, digest, seed = _single_sequence(args)
    if seq.case == PERIODIC:
        m = cmv.build_floquet(seq, args.d[0] if args.d else 1)
    elif seq.case == FINITE:
        m = cmv.build_finite_cmv(seq)[0]
    else:
        m = cmv.halfline_window(seq, args.size or seq.alphas.size + 4)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        cmv.write_matrix_csv(m, fh)
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


# -- selftest ------------------------------------------------------------------

def _selftest_checks(seed: int) -> list[tuple[str, float, float]]:
    rng = np.random.default_rng(seed)
    per = coeffs.random_periodic(rng, 4)
    fin = coeffs.random_finite(rng, 6)
    inf = VerblunskySequence.infinite(coeffs.random_alphas(rng, 4))
    out = []
    for v, s in ((lax.LaxVariant("PeriodicK", 2), per), (lax.LaxVariant("PeriodicK0"), per),
                 (lax.LaxVariant("FiniteReK", 2), fin), (lax.LaxVariant("InfiniteImK", 2), inf)):
        out.append((f"lax {v}", lax.lax_residual(v, s).max_abs_residual, 1e-10))
    out.append(("grad K_3 closed form vs trace",
                poisson.grad_K(3, per).max_abs_diff(poisson.grad_K_via_trace(3, per)), 1e-10))
    ob = lax.finite_k0_obstruction(fin)
    out.append(("finite K0 obstruction", ob["difference"], 1e-10))
    a, b = coeffs.random_alphas(rng, 2)
    two = VerblunskySequence.periodic([a, b])
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    route = np.array([ham.discriminant(two, np.exp(1j * t)) for t in th])
    out.append(("two-periodic discriminant", float(np.max(np.abs(route - ham.discriminant_two_periodic(a, b, th)))),
                1e-10))
    al = coeffs.random_alphas(rng, 8)
    z = complex(*rng.normal(size=2))
    phi, star = opuc.orthonormal_polys(al, 8)
    tv = opuc.transfer_polys(al, 8, z)
    scale = max(1.0, abs(tv).max())
    out.append(("szego vs transfer", max(abs(phi(z) - tv[0]), abs(star(z) - tv[1])) / scale, 1e-10))
    return out


def cmd_selftest(args) -> int:
    seed = args.seed if args.seed is not None else 0
    checks = _selftest_checks(seed)
    ok = bool(all(val < tol for _, val, tol in checks))
    if args.json:
        _emit({"manifest": _manifest(args, _digest(f"selftest:{seed}".encode()), seed).to_dict(),
               "checks": [{"name": n, "value": float(v), "threshold": t, "passed": bool(v < t)}
                          for n, v, t in checks],
               "passed": bool(ok)}, args)
    else:
        for n, v, t in checks:
            print(f"{'PASS' if v < t else 'FAIL'}  {n}: {v:.3e} (< {t:g})")
    return EXIT_OK if ok else EXIT_FAIL


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print JSON to stdout")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default=None, help="output file")
    common.add_argument("--coeffs", default=None, help="coefficient JSON file")
    common.add_argument("-v", "--verbose", action="store_true")
    for key, val in DEFAULT_THRESHOLDS.items():
        common.add_argument(f"--threshold-{key}", dest=f"threshold_{key}", type=float, default=None,
                            help=f"override the {key} threshold (default {val:g})")

    parser = argparse.ArgumentParser(prog="cmvlax", description="CMV Lax-pair verification for Ablowitz-Ladik")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run Lax residual suites")
    p.add_argument("--all", action="store_true", help="also run finite and infinite variants on random data")
    p.add_argument("--variant", action="append", help=f"restrict to a kind: {', '.join(lax.ALL_KINDS)}")
    p.add_argument("--random", nargs=3, type=int, metavar=("P", "SEED", "COUNT"))
    p.add_argument("--n", type=int, action="append")
    p.add_argument("--d", type=int, action="append")
    p.add_argument("--method", choices=("analytic", "fd"), default="analytic")
    p.set_defaults(func=cmd_verify)

    def single(name, func, help_):
        q = sub.add_parser(name, parents=[common], help=help_)
        q.add_argument("--random", nargs=1, type=int, metavar="P", help="random periodic data (seed from --seed)")
        q.set_defaults(func=func)
        return q

    q = single("flow", cmd_flow, "integrate a Hamiltonian flow")
    q.add_argument("--hamiltonian", default="AL", help="AL, K0, logK0, K:n, Kbar:n, ReK:n, ImK:n")
    q.add_argument("--t", type=float, default=1.0, help="final time")
    q.add_argument("--dt", type=float, default=1e-3)
    q.add_argument("--monitor-every", type=int, default=10)
    q.add_argument("--method", choices=("analytic", "fd"), default="analytic")
    q.add_argument("--order-check", action="store_true", help="rerun with dt/2 and fit the order")

    q = single("discriminant", cmd_discriminant, "scan Delta on the unit circle")
    q.add_argument("--grid", type=int, default=256)
    q.add_argument("--experimental-transfer", action="store_true",
                   help="add the z^(-p/2) Tr T_p(z) column")

    q = single("invariants", cmd_invariants, "print K_n, K_0 and discriminant coefficients")
    q.add_argument("--n", type=int, action="append")

    q = single("dump", cmd_dump, "write the CMV-type matrix as CSV")
    q.add_argument("--d", type=int, action="append")
    q.add_argument("--size", type=int, default=None, help="window size for infinite data")

    sub.add_parser("selftest", parents=[common], help="quick end-to-end checks").set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cmvlax {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DiskExit, RhoDegenerate, StepRejected) as exc:
        print(f"cmvlax {args.command}: numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CmvError as exc:
        print(f"cmvlax {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cmvlax {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
