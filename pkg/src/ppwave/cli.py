"""Command-line experiment runner.

Every subcommand reads one JSON config (defaults when ``--config`` is omitted),
writes its tables as CSV and its certificates as JSON into ``--out``, and
echoes the effective config as ``effective_config.json``. Floats in CSV are
written with 17 significant digits; JSON uses the shortest round-trip form.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance
from .config import ExperimentConfig, config_from_dict, load_config
from .convergence import converge_derivatives, converge_s, pullback_table
from .delta_nets import check_strict_delta, model_net
from .errors import (ConfigurationError, DomainError, InversionFailure, NumericalError, PreconditionError)
from .geodesics import InitialData, integrate_geodesic
from .injectivity import check_property_E, find_collisions, injectivity_region, minor_certificate
from .inversion import build_inversion_data, composition_residuals, round_trip
from .profiles import builtin_profile
from .transform import TransformFamily, leading_minors

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3

SUBCOMMANDS = ("delta-check", "geodesic", "transform", "injectivity", "invert", "convergence", "pullback", "accept")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _rng(cfg: ExperimentConfig) -> np.random.Generator:
    return acceptance.make_rng(cfg.seed)


def _family(cfg: ExperimentConfig, box=None) -> TransformFamily:
    return TransformFamily(builtin_profile(cfg.profile), model_net(cfg.net), cfg.schedule(),
                           steps_per_eps=cfg.steps_per_eps, box=box)


def _map(fn, items, threads: int):
    """Apply ``fn`` to ``items`` keeping input order; results are written by the caller only."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_delta_check(cfg, out: Path, threads: int) -> int:
    rep = check_strict_delta(model_net(cfg.net), cfg.schedule(), tol=cfg.tolerances.delta_mass)
    write_csv(out / "delta_check.csv", ("eps", "mass_error", "l1"), zip(rep.eps, rep.mass_errors, rep.l1))
    ok = rep.support_ok and rep.mass_ok and rep.l1_ratio - 1.0 < cfg.tolerances.l1_ratio
    print(f"support violations {rep.support_violations}, max mass error {max(rep.mass_errors):.3g}, "
          f"l1 ratio - 1 {rep.l1_ratio - 1.0:.3g}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_geodesic(cfg, out: Path, threads: int) -> int:
    f, net, g = builtin_profile(cfg.profile), model_net(cfg.net), cfg.geodesic
    init = InitialData(tuple(g.x0), tuple(g.xdot0), g.v0, g.vdot0)
    sched = cfg.schedule()
    trajs = _map(lambda e: integrate_geodesic(f, net, e, init, g.u_end, cfg.steps_per_eps), sched, threads)
    for k, (e, tr) in enumerate(zip(sched, trajs)):
        write_csv(out / f"geodesic_{k}.csv", ("u", "x1", "x2", "v", "xdot1", "xdot2"), tr.rows())
        print(f"eps={e:g}: x(u_end)=({tr.x[-1, 0]:.6g}, {tr.x[-1, 1]:.6g}) v(u_end)={tr.v[-1]:.6g}")
    return EXIT_OK


def cmd_transform(cfg, out: Path, threads: int) -> int:
    tc = cfg.transform
    pts = [np.asarray(tc.points, float).reshape(-1, 4)]
    if tc.random_points:
        lo = np.array([b[0] for b in tc.random_box])
        hi = np.array([b[1] for b in tc.random_box])
        pts.append(_rng(cfg).uniform(lo, hi, size=(tc.random_points, 4)))
    P = np.vstack(pts)
    fam = _family(cfg)

    def one(e):
        ev = fam.evaluator(e)
        T = ev.t_batch(P)
        if not tc.jacobian:
            return T, None
        J = ev.jacobian_batch(P)
        return T, leading_minors(J)

    header = ["eps", "U", "X", "Y", "V", "tU", "tX", "tY", "tV"]
    if tc.jacobian:
        header += ["minor1", "minor2", "minor3", "det"]
    rows = []
    for e, (T, M) in zip(fam.schedule, _map(one, fam.schedule, threads)):
        for k in range(len(P)):
            rows.append([e, *P[k], *T[k]] + ([] if M is None else list(M[k])))
    write_csv(out / "transform.csv", header, rows)
    print(f"{len(P)} points x {len(fam.schedule)} eps written")
    return EXIT_OK


def cmd_injectivity(cfg, out: Path, threads: int) -> int:
    inj = cfg.injectivity
    f = builtin_profile(cfg.profile)
    fam = _family(cfg, box=inj.K)
    cert = minor_certificate(fam, inj.K, inj.delta)
    prop = check_property_E(fam, inj.K, inj.alpha_search, n_grid=inj.n_grid)
    region = injectivity_region(f, math.inf if inj.b_cap is None else inj.b_cap)
    doc = {"eps": list(fam.schedule), "admissible_eps": list(fam.admissible(inj.K)),
           "minor_certificate": cert,
           "property_E": {"alpha": prop.alpha, "eps0": prop.eps0,
                          "first_collision_U": {repr(k): v for k, v in prop.first_collision_U.items()},
                          "collisions": prop.collisions},
           "region": {"analytic": region.analytic, "a": region.a, "b_cap": inj.b_cap}}
    if inj.collision_U is not None:
        scans = {}
        for e in fam.admissible(inj.K):
            scans[repr(e)] = find_collisions(fam.evaluator(e), inj.collision_U, inj.K, n_grid=inj.n_grid)
        doc["collision_scan"] = {"U": inj.collision_U, "by_eps": scans}
    write_json(out / "injectivity.json", doc)
    print(f"minor certificate eta={cert.eta} eps0={cert.eps0}; property E alpha={prop.alpha} eps0={prop.eps0}")
    return EXIT_OK


def cmd_invert(cfg, out: Path, threads: int) -> int:
    inv = cfg.inversion
    f = builtin_profile(cfg.profile)
    fam = _family(cfg)
    data = build_inversion_data(fam, f, inv.p, inv.R, inv.beta, inv.I)
    rt = round_trip(data, f, _rng(cfg), inv.n_random)
    comp = composition_residuals(data, f)
    write_json(out / "inversion.json", {**data.as_dict(), "seed": cfg.seed, "n_random": inv.n_random})
    write_csv(out / "round_trip.csv", ("eps", "max_error"), sorted(rt.items(), reverse=True))
    write_csv(out / "composition.csv", ("eps", "on_Q", "on_A"), zip(comp.eps, comp.on_Q, comp.on_A))
    tol = cfg.tolerances
    ok = max(rt.values()) < tol.round_trip and max(comp.max_on_Q, comp.max_on_A) < tol.composition
    print(f"eps0={data.eps0} delta={data.delta} eta={data.eta:.6g}; round trip {max(rt.values()):.3g}, "
          f"composition {max(comp.max_on_Q, comp.max_on_A):.3g}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_convergence(cfg, out: Path, threads: int) -> int:
    f = builtin_profile(cfg.profile)
    fam = _family(cfg)
    a = converge_s(fam, f, cfg.region, n=cfg.grid_n)
    b = converge_derivatives(fam, f, cfg.region, u_gap=cfg.u_gap, n=cfg.grid_n)
    a.to_csv(out / "convergence_s.csv")
    b.to_csv(out / "convergence_dU.csv")
    print("s:  " + " ".join(f"{v:.4g}" for v in a.sup_norms))
    print("dU: " + " ".join(f"{v:.4g}" for v in b.sup_norms))
    return EXIT_OK


def cmd_pullback(cfg, out: Path, threads: int) -> int:
    f = builtin_profile(cfg.profile)
    rows = pullback_table(_family(cfg), f, cfg.pullback_p)
    write_csv(out / "pullback.csv", ("eps", "entry", "pulled", "target", "gap"), rows)
    last = rows[-1][0]
    print(f"max gap at eps={last:g}: {max(r[4] for r in rows if r[0] == last):.3g}")
    return EXIT_OK


def _strip_timing(d):
    if isinstance(d, dict):
        return {k: _strip_timing(v) for k, v in d.items() if k != "runtime"}
    if isinstance(d, (list, tuple)):
        return [_strip_timing(v) for v in d]
    return d


def cmd_accept(cfg, out: Path, threads: int) -> int:
    results = acceptance.run_all(cfg.seed)
    doc = {"seed": cfg.seed, "criteria": [
        {"number": r.number, "name": r.name, "passed": r.passed, "details": _strip_timing(r.details)}
        for r in results]}
    write_json(out / "acceptance.json", doc)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


COMMANDS = {
    "delta-check": cmd_delta_check, "geodesic": cmd_geodesic, "transform": cmd_transform,
    "injectivity": cmd_injectivity, "invert": cmd_invert, "convergence": cmd_convergence,
    "pullback": cmd_pullback, "accept": cmd_accept,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ppwave", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    ap.add_argument("--out", type=Path, default=Path("ppwave_out"), help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for per-eps sweeps")
    return ap


def run(subcommand: str, cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    """Run one subcommand; returns the exit status."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.json").write_text(cfg.to_json() + "\n")
    try:
        return COMMANDS[subcommand](cfg, out, max(1, threads))
    except (ConfigurationError, PreconditionError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, InversionFailure) as exc:
        print(f"numerical failure in {subcommand}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = config_from_dict({**cfg.to_dict(), "seed": args.seed})
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    return run(args.subcommand, cfg, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
