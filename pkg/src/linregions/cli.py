"""Command-line interface: ``linregions {gen,tighten,count,approx,bounds,analyze}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from importlib import resources
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .bounds import DEFAULT_EXACT_K_CAP, upper_bounds
from .counting import count_exact
from .formulation import DEFAULT_EPS, METHODS, UnitBounds, build_counting_milp, \
    network_fingerprint, tighten_bounds
from .mipbound import DEFAULT_CONFIDENCE, run_mipbound
from .model import InputBox, NetworkError, NetworkModel, dumps_network, generate_random_network, \
    load_network, maps, save_network

SCHEMA_VERSION = 1
SMALL_ETA = 12.0
DEFAULT_KS = (2, 3, 4, 5)
CSV_COLUMNS = ["widths", "n0", "eta_lb_k2", "eta_lb_k3", "eta_lb_k4", "eta_lb_k5",
               "eta_exact", "eta_emp_ub", "eta_conf_ub", "t_tighten_s", "t_count_s",
               "t_approx_s"]
EXIT_INPUT_ERROR = 2


class InputError(Exception):
    pass


def report_schema() -> dict:
    """JSON schema that every ``analyze`` report validates against."""
    text = resources.files(__package__).joinpath("report_schema.json").read_text("utf-8")
    return json.loads(text)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return vals


def _float_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW,HIGH, got {text!r}")
    return lo, hi


def _emit(obj, out=None) -> None:
    out = out or sys.stdout
    json.dump(obj, out, indent=2, allow_nan=False)
    out.write("\n")


def _load(path, count_output_layer=False) -> NetworkModel:
    try:
        return load_network(path, count_output_layer=count_output_layer or None)
    except (OSError, NetworkError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _network_info(net: NetworkModel) -> dict:
    return {"widths": list(net.widths), "n0": net.input_dim,
            "fingerprint": network_fingerprint(net)}


def obtain_bounds(net: NetworkModel, method: str, cache: str | None = None,
                  time_limit: float | None = None) -> tuple[UnitBounds, bool]:
    """Tightened bounds, reusing ``cache`` when it matches the network and method."""
    fp = network_fingerprint(net)
    if cache and os.path.exists(cache):
        try:
            with open(cache, encoding="utf-8") as fh:
                ub = UnitBounds.from_dict(json.load(fh))
            if ub.fingerprint == fp and ub.method == method:
                ub.check(net)
                return ub, True
        except (OSError, ValueError, KeyError, TypeError):
            pass
    ub = tighten_bounds(net, method, time_limit=time_limit)
    if cache:
        with open(cache, "w", encoding="utf-8") as fh:
            json.dump(ub.to_dict(), fh)
    return ub, False


# --------------------------------------------------------------------------
# subcommands

def cmd_gen(args) -> dict | None:
    lo, hi = args.box
    if not lo < hi:
        raise InputError("--box needs LOW < HIGH")
    domain = InputBox([lo] * args.n0, [hi] * args.n0)
    net = generate_random_network(args.widths, args.n0, seed=args.seed, scale=args.scale,
                                  domain=domain)
    if args.output:
        save_network(net, args.output)
        return {"schema": SCHEMA_VERSION, "command": "gen", "output": args.output,
                **_network_info(net)}
    sys.stdout.write(dumps_network(net) + "\n")
    return None


def cmd_tighten(args) -> dict:
    net = _load(args.network, args.count_output_layer)
    start = time.monotonic()
    ub, hit = obtain_bounds(net, args.method, args.bounds_cache, args.time_limit)
    return {"schema": SCHEMA_VERSION, "command": "tighten", "network": _network_info(net),
            "method": args.method, "cache_hit": hit, "elapsed": time.monotonic() - start,
            "summary": ub.summary(), "notes": ub.notes,
            **({"bounds": ub.to_dict()} if args.full else {})}


def cmd_count(args) -> dict:
    net = _load(args.network, args.count_output_layer)
    t0 = time.monotonic()
    ub, hit = obtain_bounds(net, args.method, args.bounds_cache, args.time_limit)
    t1 = time.monotonic()
    res = count_exact(net, ub, args.eps, args.limit,
                      with_valid_inequalities=args.valid_inequalities,
                      full_dim=args.full_dim,
                      keep_patterns=True if args.emit_patterns else None,
                      time_limit=args.time_limit)
    t2 = time.monotonic()
    if args.emit_patterns:
        with open(args.emit_patterns, "w", encoding="utf-8") as fh:
            for p in res.patterns:
                fh.write(json.dumps(p.to_string()) + "\n")
    return {"schema": SCHEMA_VERSION, "command": "count", "network": _network_info(net),
            "method": args.method, "cache_hit": hit, **res.to_dict(),
            "eta": maps(res.count) if res.count else None, "full_dim": args.full_dim,
            "timings": {"tighten": t1 - t0, "count": t2 - t1}}


def _approx_block(net, ub, k, args) -> dict:
    cm = build_counting_milp(net, ub, args.eps)
    n_free = len(cm.milp.free_binaries())
    if k > n_free:
        raise ValueError(f"k={k} exceeds the {n_free} unstable units")
    res = run_mipbound(cm.milp, k, args.iterations, args.confidence, args.seed,
                       time_limit=args.time_limit)
    return res.to_dict()


def cmd_approx(args) -> dict:
    net = _load(args.network, args.count_output_layer)
    t0 = time.monotonic()
    ub, hit = obtain_bounds(net, args.method, args.bounds_cache, None)
    t1 = time.monotonic()
    blocks = [_approx_block(net, ub, k, args) for k in args.k]
    t2 = time.monotonic()
    head = {"schema": SCHEMA_VERSION, "command": "approx", "network": _network_info(net),
            "method": args.method, "cache_hit": hit,
            "timings": {"tighten": t1 - t0, "approx": t2 - t1}}
    if len(blocks) == 1:
        return {**head, **blocks[0]}
    return {**head, "results": blocks}


def cmd_bounds(args) -> dict:
    net = _load(args.network, args.count_output_layer)
    t0 = time.monotonic()
    ub, hit = (None, False) if args.method == "none" else \
        obtain_bounds(net, args.method, args.bounds_cache, args.time_limit)
    t1 = time.monotonic()
    rep = upper_bounds(net, ub, args.exact_k_cap)
    return {"schema": SCHEMA_VERSION, "command": "bounds", "network": _network_info(net),
            "method": args.method, "cache_hit": hit, **rep.to_dict(),
            "timings": {"tighten": t1 - t0, "bounds": time.monotonic() - t1}}


# --------------------------------------------------------------------------
# analyze

def analyze_network(net: NetworkModel, *, method: str = "milp", ks=None,
                    confidence: float = DEFAULT_CONFIDENCE, iterations: int | None = None,
                    seed: int = 0, eps: float = DEFAULT_EPS,
                    phase_time_limit: float | None = None, bounds_cache: str | None = None,
                    exact: bool | None = None, small_eta: float = SMALL_ETA,
                    exact_k_cap: int = DEFAULT_EXACT_K_CAP) -> dict:
    """Run tighten, exact count (small networks), MIPBound and the upper bounds."""
    report = {"schema": SCHEMA_VERSION, "command": "analyze", "network": _network_info(net),
              "confidence": confidence, "seed": seed, "errors": [],
              "timings": {"tighten": 0.0, "count": 0.0, "approx": 0.0, "bounds": 0.0},
              "tightening": None, "exact": None, "approx": [], "upper_bounds": None,
              "app": {}}
    timings, errors = report["timings"], report["errors"]
    conf_eta = None
    t = time.monotonic()
    try:
        ub, hit = obtain_bounds(net, method, bounds_cache, phase_time_limit)
        report["tightening"] = {"method": method, "cache_hit": hit, **ub.summary()}
    except Exception as exc:
        ub = None
        errors.append({"phase": "tighten", "message": str(exc)})
    timings["tighten"] = time.monotonic() - t

    t = time.monotonic()
    try:
        rep = upper_bounds(net, ub, exact_k_cap)
        report["upper_bounds"] = rep.to_dict()
        conf_eta = rep.eta["configuration"]
    except Exception as exc:
        rep = None
        errors.append({"phase": "bounds", "message": str(exc)})
    timings["bounds"] = time.monotonic() - t

    small = conf_eta is not None and conf_eta < small_eta
    report["small"] = small
    if exact is None:
        exact = small
    if ks is None:
        ks = () if small else DEFAULT_KS

    if exact and ub is not None:
        t = time.monotonic()
        try:
            res = count_exact(net, ub, eps, keep_patterns=False, time_limit=phase_time_limit)
            report["exact"] = {**res.to_dict(),
                               "eta": maps(res.count) if res.count else None}
        except Exception as exc:
            errors.append({"phase": "count", "message": str(exc)})
        timings["count"] = time.monotonic() - t

    if ks and ub is not None:
        t = time.monotonic()
        try:
            cm = build_counting_milp(net, ub, eps)
            n_free = len(cm.milp.free_binaries())
            for k in ks:
                if k > n_free:
                    errors.append({"phase": "approx",
                                   "message": f"k={k} exceeds the {n_free} unstable units"})
                    continue
                res = run_mipbound(cm.milp, k, iterations, confidence, seed,
                                   time_limit=phase_time_limit)
                report["approx"].append(res.to_dict())
        except Exception as exc:
            errors.append({"phase": "approx", "message": str(exc)})
        timings["approx"] = time.monotonic() - t

    if rep is not None:
        emp = maps(rep.empirical_ub)
        for block in report["approx"]:
            if block["eta_lb"] is not None:
                report["app"][str(block["k"])] = (block["eta_lb"] + emp) / 2.0
    return report


def csv_row(report: dict) -> dict:
    net = report["network"]
    lb = {b["k"]: b["eta_lb"] for b in report["approx"]}
    ubs = report["upper_bounds"] or {}
    eta = ubs.get("eta", {})
    exact = report["exact"]

    def fmt(v):
        return "" if v is None else v

    return {
        "widths": ";".join(str(w) for w in net["widths"]),
        "n0": net["n0"],
        **{f"eta_lb_k{k}": fmt(lb.get(k)) for k in (2, 3, 4, 5)},
        "eta_exact": fmt(exact["eta"] if exact else None),
        "eta_emp_ub": fmt(eta.get("empirical")),
        "eta_conf_ub": fmt(eta.get("configuration")),
        "t_tighten_s": report["timings"]["tighten"],
        "t_count_s": report["timings"]["count"],
        "t_approx_s": report["timings"]["approx"],
    }


def _analyze_path(job):
    path, kw = job
    net = load_network(path)
    return analyze_network(net, **kw)


def cmd_analyze(args) -> dict | None:
    kw = dict(method=args.method, ks=args.k, confidence=args.confidence,
              iterations=args.iterations, seed=args.seed if args.seed is not None else 0,
              eps=args.eps, phase_time_limit=args.phase_time_limit,
              exact=True if args.exact else None, small_eta=args.small_threshold,
              exact_k_cap=args.exact_k_cap)
    target = Path(args.network)
    if target.is_dir():
        if args.seed is None:
            raise InputError("batch mode requires --seed")
        paths = sorted(str(p) for p in target.glob("*.json"))
        if not paths:
            raise InputError(f"{target}: no *.json networks found")
        for p in paths:
            _load(p)
        jobs = [(p, kw) for p in paths]
        if args.workers > 1:
            with ProcessPoolExecutor(args.workers) as pool:
                reports = list(pool.map(_analyze_path, jobs))
        else:
            reports = [_analyze_path(j) for j in jobs]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            writer.writerow(csv_row(r))
        if args.csv:
            Path(args.csv).write_text(buf.getvalue(), encoding="utf-8")
            return {"schema": SCHEMA_VERSION, "command": "analyze", "batch": True,
                    "networks": paths, "csv": args.csv,
                    "errors": [{"network": p, **e} for p, r in zip(paths, reports)
                               for e in r["errors"]]}
        sys.stdout.write(buf.getvalue())
        return None
    net = _load(args.network, args.count_output_layer)
    kw["bounds_cache"] = args.bounds_cache
    report = analyze_network(net, **kw)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerow(csv_row(report))
    return report


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linregions",
                                description="Count and bound the linear regions of ReLU networks.")
    sub = p.add_subparsers(dest="command", required=True)

    def network_arg(sp, help_text="network JSON file"):
        sp.add_argument("network", help=help_text)
        sp.add_argument("--count-output-layer", action="store_true",
                        help="treat the affine output layer as a ReLU layer")

    def method_arg(sp, choices=METHODS, default="milp"):
        sp.add_argument("--method", choices=choices, default=default,
                        help="bound tightening method (default: %(default)s)")
        sp.add_argument("--bounds-cache", metavar="FILE",
                        help="read/write tightened bounds here, keyed by network fingerprint")

    g = sub.add_parser("gen", help="generate a random network")
    g.add_argument("--widths", type=_int_list, required=True)
    g.add_argument("--n0", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--box", type=_float_pair, default=(0.0, 1.0), metavar="LOW,HIGH",
                   help="input domain [LOW, HIGH]^n0 (default: 0,1)")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("tighten", help="compute big-M bounds and unit stability")
    network_arg(t)
    method_arg(t)
    t.add_argument("--time-limit", type=float)
    t.add_argument("--full", action="store_true", help="include per-unit bounds")
    t.set_defaults(func=cmd_tighten)

    c = sub.add_parser("count", help="exact count of activation patterns")
    network_arg(c)
    method_arg(c)
    c.add_argument("--eps", type=float, default=DEFAULT_EPS)
    c.add_argument("--limit", type=int)
    c.add_argument("--full-dim", action="store_true",
                   help="count only full-dimensional regions")
    c.add_argument("--valid-inequalities", action="store_true")
    c.add_argument("--emit-patterns", metavar="FILE",
                   help="write one JSON-quoted pattern per line")
    c.add_argument("--time-limit", type=float)
    c.set_defaults(func=cmd_count)

    a = sub.add_parser("approx", help="probabilistic lower bound via parity constraints")
    network_arg(a)
    method_arg(a)
    a.add_argument("--k", type=_int_list, default=[2], help="parity size(s), e.g. 2 or 2,5")
    a.add_argument("--iterations", type=int)
    a.add_argument("--confidence", type=float, default=DEFAULT_CONFIDENCE)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--eps", type=float, default=DEFAULT_EPS)
    a.add_argument("--time-limit", type=float)
    a.set_defaults(func=cmd_approx)

    b = sub.add_parser("bounds", help="analytical upper bounds")
    network_arg(b)
    method_arg(b, METHODS + ("none",))
    b.add_argument("--exact-k-cap", type=int, default=DEFAULT_EXACT_K_CAP)
    b.add_argument("--time-limit", type=float)
    b.set_defaults(func=cmd_bounds)

    z = sub.add_parser("analyze", help="full pipeline on a network or a directory of networks")
    network_arg(z, "network JSON file, or a directory of them for batch CSV output")
    method_arg(z)
    z.add_argument("--k", type=_int_list, help="parity sizes (default: none for small "
                                               "networks, 2,3,4,5 otherwise)")
    z.add_argument("--iterations", type=int)
    z.add_argument("--confidence", type=float, default=DEFAULT_CONFIDENCE)
    z.add_argument("--seed", type=int, help="required in batch mode")
    z.add_argument("--eps", type=float, default=DEFAULT_EPS)
    z.add_argument("--exact", action="store_true", help="always run the exact count")
    z.add_argument("--small-threshold", type=float, default=SMALL_ETA,
                   help="configuration-bound MAPS below which a network counts as small")
    z.add_argument("--exact-k-cap", type=int, default=DEFAULT_EXACT_K_CAP)
    z.add_argument("--phase-time-limit", type=float)
    z.add_argument("--workers", type=int, default=1)
    z.add_argument("--csv", metavar="FILE")
    z.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (ValueError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    if out is not None:
        _emit(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
