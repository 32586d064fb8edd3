"""Command-line entry point.

Exit status: 0 success, 1 failed verification, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import __version__
from .algebra import PAULI_PARAMS, Su2Params, basis_residuals, build_basis, check_cross_qubit_commutation
from .harness import ConfigError, emit_csv, format_csv, load_config, run_sweep
from .lattice import build_layout, format_layout, validate_layout
from .protocols import ProtocolConfig, build_trajectory_table
from .surgery import (
    BOUNDARIES,
    build_cnot_layout,
    build_merged_layout,
    dense_seam_check,
    verify_cnot_branches,
    verify_merge_branches,
)

ALGEBRA_TOL = 1e-12


def _add_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, help="rotation angle of U")
    p.add_argument("--theta", type=float, default=0.0, help="polar angle of the rotation axis")
    p.add_argument("--phi", type=float, default=0.0, help="azimuth of the rotation axis")


def _params(args) -> Su2Params | None:
    if args.gamma is None:
        return None
    return Su2Params(args.gamma, args.theta, args.phi)


def _random_state(rng) -> tuple[complex, complex]:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return complex(v[0]), complex(v[1])


# -- subcommands ----------------------------------------------------------------


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, seed=args.seed, output=args.out, workers=args.workers, shots=args.shots)
    records = run_sweep(cfg)
    if cfg.output:
        emit_csv(records, cfg.output)
        print(f"wrote {len(records)} rows to {cfg.output}")
    else:
        sys.stdout.write(format_csv(records))
    return 0


def cmd_algebra_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.random is not None:
        if args.random < 1:
            raise ConfigError("--random needs a positive count")
        params = [Su2Params.random(rng) for _ in range(args.random)]
    else:
        given = _params(args)
        params = [given if given is not None else PAULI_PARAMS]
    worst: dict[str, float] = {}
    info = 0.0
    for p in params:
        basis = build_basis(p)
        res = basis_residuals(basis)
        rep = check_cross_qubit_commutation(basis)
        res.update(rep.residuals)
        for k, v in res.items():
            worst[k] = max(worst.get(k, 0.0), v)
        info = max(info, rep.informational["mixed_pauli_nonpauli"])
    print(f"{'check':<24} {'max residual':>14}  status   ({len(params)} parameter sets)")
    ok = True
    for k, v in worst.items():
        passed = v < ALGEBRA_TOL
        ok &= passed
        print(f"{k:<24} {v:14.3e}  {'ok' if passed else 'FAIL'}")
    print(f"{'mixed X.X vs S^B.S^B':<24} {info:14.3e}  (informational)")
    return 0 if ok else 1


def cmd_layout_dump(args) -> int:
    if args.merged:
        if args.distance not in (2, 3):
            raise ConfigError("merged layouts need --distance 2 or 3")
        p = _params(args)
        basis_q = build_basis(p) if p is not None else None
        merged = build_merged_layout(args.distance, args.merged, basis_q)
        print(merged.describe())
        return 0
    try:
        layout = build_layout(args.distance)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(format_layout(layout))
    report = validate_layout(layout)
    for v in report.violations:
        print("violation:", v)
    print(f"# validation: {'ok' if report.passed else 'FAIL'} ({report.checked_pairs} commutation pairs)")
    return 0 if report.passed else 1


def cmd_trajectory_table(args) -> int:
    try:
        cfg = ProtocolConfig(protocol=args.protocol, scheme=args.scheme, distance=args.distance,
                             basis_params=_params(args))
        table = build_trajectory_table(cfg, allow_large=args.allow_large)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(table.format())
    total = table.total_probability()
    print(f"# entries {len(table.entries)}, total probability {total:.12f}")
    print(table.clustering().format())
    return 0 if abs(total - 1.0) < 1e-9 else 1


def cmd_surgery_verify(args) -> int:
    if args.distance not in (2, 3):
        raise ConfigError("surgery-verify needs --distance 2 or 3")
    rng = np.random.default_rng(args.seed)
    ok = True
    bases = [("pauli", build_basis(PAULI_PARAMS)), ("nonpauli", build_basis(Su2Params.random(rng)))]
    for label, basis_q in bases:
        for kind in BOUNDARIES:
            merged = build_merged_layout(args.distance, kind, basis_q)
            if args.distance == 2:
                dense = dense_seam_check(merged)
                good = dense["product"] < 1e-12 and dense["commutation"] < 1e-12
                ok &= good
                print(f"[{label} {kind}] dense seam product residual {dense['product']:.2e},"
                      f" commutation {dense['commutation']:.2e}: {'ok' if good else 'FAIL'}")
            for i in range(args.inputs):
                psi_p, psi_q = _random_state(rng), _random_state(rng)
                for with_split in (False, True):
                    check, per_m = verify_merge_branches(merged, psi_p, psi_q, with_split=with_split)
                    ok &= check.passed and per_m[0] > 0 and per_m[1] > 0
                    stage = "merge+split" if with_split else "merge"
                    fids = " ".join(f"{1 - f:.1e}" for f in check.fidelities)
                    print(f"[{label} {kind}] input {i} {stage}: {check.branches} branches"
                          f" (m=0: {per_m[0]}, m=1: {per_m[1]}), infidelities {fids}:"
                          f" {'ok' if check.passed else 'FAIL'}")
    print("surgery-verify:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_cnot_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    basis_q = build_basis(Su2Params.random(rng))
    lay = build_cnot_layout(2, basis_q)
    s = 1 / math.sqrt(2)
    cases = [("|00>", (1, 0), (1, 0)), ("|01>", (1, 0), (0, 1)), ("|10>", (0, 1), (1, 0)),
             ("|11>", (0, 1), (0, 1)), ("|+0>", (s, s), (1, 0)),
             ("random", _random_state(rng), _random_state(rng))]
    ok = True
    for label, c, t in cases:
        check = verify_cnot_branches(c, t, layout=lay, label=label)
        ok &= check.passed
        print(f"{label:<7} {check.branches} branches, worst infidelity {1 - check.worst_fidelity:.2e}:"
              f" {'ok' if check.passed else 'FAIL'}")
    print("cnot-verify:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonpauli-qec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("sweep", help="run a Monte Carlo sweep from a config file")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV path (default: config 'output', else stdout)")
    p.add_argument("--workers", type=int)
    p.add_argument("--shots", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("algebra-check", help="residuals of the non-Pauli operator algebra")
    _add_params(p)
    p.add_argument("--random", type=int, metavar="N", help="check N random parameter sets")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_algebra_check)

    p = sub.add_parser("layout-dump", help="print and validate a patch layout")
    p.add_argument("--distance", type=int, required=True)
    p.add_argument("--merged", choices=BOUNDARIES, help="print the seam of a two-patch merge instead")
    _add_params(p)
    p.set_defaults(func=cmd_layout_dump)

    p = sub.add_parser("trajectory-table", help="exhaustive noiseless trajectory table")
    p.add_argument("--distance", type=int, required=True)
    p.add_argument("--protocol", type=int, default=2, choices=(1, 2))
    p.add_argument("--scheme", default="nonpauli", choices=("nonpauli", "pauli"))
    p.add_argument("--allow-large", action="store_true", help="permit d=4 enumeration")
    _add_params(p)
    p.set_defaults(func=cmd_trajectory_table)

    p = sub.add_parser("surgery-verify", help="branch-exhaustive merge/split checks")
    p.add_argument("--distance", type=int, required=True)
    p.add_argument("--inputs", type=int, default=2, help="random logical inputs per configuration")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_surgery_verify)

    p = sub.add_parser("cnot-verify", help="branch-exhaustive logical CNOT truth table (d=2)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cnot_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"{ap.prog}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{ap.prog}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
