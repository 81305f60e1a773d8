"""``hcpfactor`` command-line front end.

Exit codes: 0 success, 1 verification failure, 2 user/config error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Callable, Sequence

import numpy as np

from . import costmodel
from .caqr import caqr, ml_caqr
from .calu import calu, ml_calu
from .cannon import ml_cannon
from .dense import householder_qr
from .platform import ValidatedPlatform, load_platform, make_platform
from .schedule import BlockSchedule
from .stability import DEFAULT_GENERATORS, GENERATORS, StudyConfig, ratio_study
from .vmachine import SCHEMA_VERSION, CommLedger

log = logging.getLogger("hcpfactor")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3
SIM_ALGOS = ("caqr", "calu", "mlcaqr", "mlcalu1d", "mlcalu2d", "mlcannon")


class ConfigError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _grids(text: str) -> list[tuple[int, int]]:
    """``"2x2,4x2"`` -> ``[(2, 2), (4, 2)]`` (deepest level first)."""
    out = []
    for part in text.split(","):
        try:
            r, c = part.lower().split("x")
            out.append((int(r), int(c)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {part!r}; use ROWSxCOLS")
    return out


def _platform(args) -> ValidatedPlatform:
    if getattr(args, "grids", None):
        return make_platform(args.grids)
    if not args.platform:
        raise ConfigError("give --platform (file or bundled name) or --grids")
    return load_platform(args.platform)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_predict(args) -> int:
    platform = _platform(args)
    schedule = BlockSchedule(tuple(args.blocks)) if args.blocks else None
    reports = []
    tops = args.top_nodes or [None]
    for n in args.n:
        for t in tops:
            plat = platform if t is None else costmodel.with_top_nodes(platform, t)
            reports.append(costmodel.predict(args.algo, n, plat, schedule,
                                             share_bandwidth=not args.no_share))
    if args.format == "csv":
        _emit(costmodel.write_csv(reports), args.out)
    else:
        doc = {"schema_version": SCHEMA_VERSION,
               "rows": [row for r in reports for row in costmodel.report_rows(r)]}
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    platform = _platform(args)
    n = args.n[0]
    rng = np.random.default_rng(args.seed)
    a = rng.standard_normal((n, n))
    blocks = BlockSchedule(tuple(args.blocks)) if args.blocks else costmodel.default_blocks(n, platform)
    grid1 = (platform.p_rows(1), platform.p_cols(1))
    result: dict = {"schema_version": SCHEMA_VERSION, "algo": args.algo, "n": n, "seed": args.seed}
    anorm = np.linalg.norm(a)
    if args.algo in ("caqr", "mlcaqr"):
        res = (caqr(a, grid1, blocks.blocks[0], platform) if args.algo == "caqr"
               else ml_caqr(a, platform, blocks))
        q = res.q()
        result["residual"] = float(np.linalg.norm(a - q @ res.r_factor) / anorm)
        result["orthogonality"] = float(np.linalg.norm(q.T @ q - np.eye(n)))
        ledger = res.ledger
    elif args.algo in ("calu", "mlcalu1d", "mlcalu2d"):
        res = (calu(a, blocks.blocks[0], grid1, platform) if args.algo == "calu"
               else ml_calu(a, platform, blocks, variant=args.algo[-2:]))
        result["residual"] = float(np.linalg.norm(a[res.perm] - res.l_factor @ res.u_factor) / anorm)
        result["tau_min"] = float(np.nanmin(res.tau_trace)) if res.tau_trace.size else None
        ledger = res.ledger
    else:
        b = rng.standard_normal((n, n))
        c = rng.standard_normal((n, n))
        ledger = CommLedger(platform)
        out = ml_cannon(c, a, b, platform, platform.depth, ledger)
        result["residual"] = float(np.linalg.norm(out - (c + a @ b)) / (anorm * np.linalg.norm(b)))
    result["blocks"] = list(blocks.blocks)
    result["ledger"] = ledger.to_dict()
    cost = ledger.price()
    result["time"] = {"comm_s": list(cost.comm_time), "flop_s": cost.flop_time,
                      "total_s": cost.total_time}
    _emit(json.dumps(result, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_stability(args) -> int:
    gens = args.gens or list(DEFAULT_GENERATORS)
    unknown = [g for g in gens if g not in GENERATORS]
    if unknown:
        raise ConfigError(f"unknown generator(s): {', '.join(unknown)}")
    config = StudyConfig(n=args.n[0] if args.n else 256, variant=args.variant,
                         p_rows=tuple(args.p_rows), blocks=tuple(args.blocks or (8, 16, 32)),
                         seed=args.seed)
    report = ratio_study(gens, config)
    if args.format == "csv":
        _emit(report.to_csv(), args.out)
    else:
        doc = {"schema_version": SCHEMA_VERSION, "rows": report.csv_rows()}
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    taus = report.all_taus()
    log.info("fraction of rows within [1e-3, 10]: %.2f", report.fraction_within())
    if taus.size:
        log.info("tau_min=%.3f  fraction tau==1: %.2f", taus.min(), (taus == 1.0).mean())
    return EXIT_OK


def _verify_checks(seed: int) -> list[tuple[str, Callable[[], bool]]]:
    rng = np.random.default_rng(seed)

    def flattening() -> bool:
        plat = make_platform([(2, 2), (2, 2)])
        for _ in range(3):
            a = rng.standard_normal((64, 64))
            one = ml_calu(a, plat, (4, 8), variant="1d")
            flat = calu(a, 4, (4, 1))
            scale = 1e-12 * np.linalg.norm(a)
            if not (np.array_equal(one.perm, flat.perm)
                    and np.abs(one.l_factor - flat.l_factor).max() <= scale
                    and np.abs(one.u_factor - flat.u_factor).max() <= scale):
                return False
        return True

    def cannon() -> bool:
        plat = make_platform([(2, 2), (2, 2)])
        a, b, c = (rng.standard_normal((16, 16)) for _ in range(3))
        out = ml_cannon(c, a, b, plat)
        return np.linalg.norm(out - (c + a @ b)) <= 1e-13 * np.linalg.norm(c + a @ b)

    def qr() -> bool:
        plat = make_platform([(2, 2), (2, 2)])
        a = rng.standard_normal((64, 32))
        res = ml_caqr(a, plat, (4, 8))
        ref = householder_qr(a).r
        return np.abs(res.r_factor - ref).max() <= 1e-12 * np.abs(ref).max()

    def lu2d() -> bool:
        plat = make_platform([(2, 2), (2, 2)])
        a = rng.standard_normal((64, 64))
        res = ml_calu(a, plat, (2, 8), variant="2d")
        return np.linalg.norm(a[res.perm] - res.l_factor @ res.u_factor) <= 1e-12 * np.linalg.norm(a)

    return [
        ("1d-flattening-equivalence", flattening),
        ("ml-cannon-vs-gemm", cannon),
        ("ml-caqr-vs-householder", qr),
        ("ml-calu-2d-residual", lu2d),
    ]


def cmd_verify(args) -> int:
    failed = 0
    for name, check in _verify_checks(args.seed):
        ok = bool(check())
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hcpfactor",
                                     description="Multilevel CA factorizations on a simulated HCP.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, algos=None):
        p.add_argument("--platform", help="platform JSON file or bundled name (hopper, exascale)")
        p.add_argument("--grids", type=_grids, help="ad-hoc platform, e.g. 2x2,2x2 (deepest first)")
        if algos:
            p.add_argument("--algo", choices=algos, required=True)
        p.add_argument("--n", type=_int_list, default=None, help="matrix order(s), comma separated")
        p.add_argument("--blocks", type=_int_list, help="block sizes b1,...,bl")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("predict", help="analytical cost predictions")
    common(p, costmodel.ALGORITHMS)
    p.add_argument("--top-nodes", type=_int_list, help="sweep the top-level node count")
    p.add_argument("--no-share", action="store_true",
                   help="do not share top-level bandwidth in 1-level models")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_predict, need_n=True)

    p = sub.add_parser("simulate", help="run a factorization on the simulated machine")
    common(p, SIM_ALGOS)
    p.add_argument("--format", choices=("json",), default="json")
    p.set_defaults(func=cmd_simulate, need_n=True)

    p = sub.add_parser("stability", help="ML-CALU vs GEPP ratio study")
    p.add_argument("--gens", type=lambda s: [x for x in s.split(",") if x],
                   help=f"generators (default: {','.join(DEFAULT_GENERATORS)})")
    p.add_argument("--n", type=_int_list, default=None)
    p.add_argument("--variant", choices=("1d", "2d"), default="2d")
    p.add_argument("--p-rows", type=_int_list, default=[2, 2, 4])
    p.add_argument("--blocks", type=_int_list)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_stability, need_n=False)

    p = sub.add_parser("verify", help="built-in oracle checks; prints PASS/FAIL per check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify, need_n=False)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("HCPFACTOR_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "need_n", False) and not args.n:
        print("error: --n is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    # platform, shape and generator errors are all ValueErrors
    except (ConfigError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - stable exit-code contract
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
