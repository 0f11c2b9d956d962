"""Command-line interface.

Exit codes: 0 success, 2 parameter or domain error, 3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .coeffs import (
    CoefficientSequence,
    make_coeffs,
    make_custom_coeffs,
    make_fbm_coeffs,
    read_coeffs_csv,
    write_coeffs_csv,
)
from .config import (
    COUPLING_KEYS,
    build_coupling_config,
    build_kernel,
    build_model,
    config_hash,
    read_config_file,
    resolve,
    theoretical_rate,
)
from .coupling import estimate_tv_tail, run_coupling
from .errors import DomainError, ErgodriftError, InvariantError
from .noise import sample_path
from .rates import rate_v, rate_v_fbm
from .toeplitz import estimate_decay_exponent, invert_coeffs, invert_coeffs_combinatorial

log = logging.getLogger("ergodrift")


def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get("ERGODRIFT_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise DomainError(f"ERGODRIFT_SEED must be an integer, got {env!r}") from None
    return 0


def _header(command: str, cfg: dict) -> str:
    return f"ergodrift {command} config_sha256={config_hash(cfg)} config={json.dumps(cfg, sort_keys=True, default=str)}"


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _parse_params(items: Sequence[str]) -> dict:
    out = {}
    for item in items or []:
        for part in item.split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise DomainError(f"parameter {part!r} is not key=value")
            k, _, v = part.partition("=")
            out[k.strip()] = v.strip()
    return out


# -- commands ---------------------------------------------------------------


def cmd_coeffs(family: str, params: dict, k_max: int, out: str) -> CoefficientSequence:
    fam = {"poly": "polynomial", "exp": "exponential"}.get(family, family)
    if fam == "custom":
        path = params.get("path") or params.get("file")
        if not path:
            raise DomainError("custom family needs --params path=<csv>")
        a = make_custom_coeffs(read_coeffs_csv(path))
        typed = {"path": path}
    else:
        aliases = {"ca": "C_a", "c_a": "C_a", "lambda": "lam", "hurst": "H"}
        typed = {aliases.get(k, k): float(v) for k, v in params.items()}
        a = make_coeffs(fam, k_max, **typed)
    cfg = {"family": family, "params": typed, "k-max": k_max}
    write_coeffs_csv(out, a.values, _header("coeffs", cfg))
    return a


def cmd_invert(coeffs_path: str, out: str, oracle_check: int = 0, method: str = "recursion") -> dict:
    a = read_coeffs_csv(coeffs_path)
    b = invert_coeffs(a, method=method)
    cfg = {"coeffs": coeffs_path, "oracle-check": oracle_check, "method": method}
    write_coeffs_csv(out, b.values, _header("invert", cfg), column="b_k")
    report = {"K": int(b.K)}
    if oracle_check:
        ref = invert_coeffs_combinatorial(a, oracle_check)
        rec = invert_coeffs(a)
        diff = float(np.max(np.abs(ref.values - rec.values[: oracle_check + 1])))
        report["oracle_max_abs_diff"] = diff
        if diff > 1e-9:
            raise InvariantError(f"recursion and combinatorial oracle differ by {diff:.3g}")
    return report


def cmd_slope(in_path: str, kmin: int, kmax: int) -> dict:
    seq = read_coeffs_csv(in_path)
    fit = estimate_decay_exponent(seq, kmin, kmax)
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residual_rms": fit.residual_rms,
        "k_range": list(fit.k_range),
        "n_dropped": fit.n_dropped,
    }


def cmd_simulate_noise(coeffs_path: str, dim: int, steps: int, history: Optional[int], seed: int,
                       replicas: int, out: str) -> None:
    a = make_custom_coeffs(read_coeffs_csv(coeffs_path))
    H = a.K if history is None else history
    cfg = {"coeffs": coeffs_path, "dim": dim, "steps": steps, "history": H, "seed": seed, "replicas": replicas}
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(f"# {_header('simulate-noise', cfg)}\n")
        fh.write("replica,n,component,delta\n")
        for r in range(replicas):
            p = sample_path(a, dim, steps, H, seed, r)
            for n in range(steps):
                for c in range(dim):
                    fh.write(f"{r},{n + 1},{c},{p.deltas[n, c]:.17g}\n")


def cmd_rate(beta: Optional[float] = None, rho: Optional[float] = None, fbm: Optional[float] = None) -> dict:
    if fbm is not None:
        v, arg = rate_v(fbm + 0.5, 1.5 - fbm)
        return {"v": rate_v_fbm(fbm), "v_numeric": v, "argmax_alpha": arg, "H": fbm}
    v, arg = rate_v(beta, rho)
    return {"v": v, "argmax_alpha": arg, "beta": beta, "rho": rho}


def cmd_rate_table(betas: Sequence[float], rhos: Sequence[float], out: str) -> list:
    rows = []
    for b in betas:
        for r in rhos:
            try:
                v, arg = rate_v(b, r)
                rows.append((b, r, v, arg, ""))
            except DomainError as exc:
                rows.append((b, r, math.nan, math.nan, str(exc)))
    cfg = {"betas": list(betas), "rhos": list(rhos)}
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(f"# {_header('rate', cfg)}\n")
        fh.write("beta,rho,v,argmax_alpha,reason\n")
        for b, r, v, arg, reason in rows:
            fh.write(f"{b:.17g},{r:.17g},{v:.17g},{arg:.17g},{reason.replace(',', ';')}\n")
    return rows


def cmd_figure1(H_list: Sequence[float], h: float, K: int, k_range: tuple, out_dir: str) -> list:
    """For each Hurst parameter write ``log_k,log_abs_b`` data and a JSON sidecar with the fitted slope."""
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    results = []
    for H in H_list:
        a = make_fbm_coeffs(H, h, K)
        b = invert_coeffs(a).values
        fit = estimate_decay_exponent(b, k_range[0], k_range[1])
        cfg = {"H": H, "h": h, "k-max": K, "k-range": list(k_range)}
        stem = Path(out_dir) / f"figure1_H{H:g}"
        k = np.arange(1, K + 1)
        keep = b[1:] != 0
        with open(f"{stem}.csv", "w", encoding="utf-8") as fh:
            fh.write(f"# {_header('figure1', cfg)}\n")
            fh.write("log_k,log_abs_b\n")
            for lk, lb in zip(np.log(k[keep] + 1.0), np.log(np.abs(b[1:][keep]))):
                fh.write(f"{lk:.17g},{lb:.17g}\n")
        side = {
            "H": H,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "residual_rms": fit.residual_rms,
            "k_range": list(fit.k_range),
            "predicted_slope": -(H + 0.5) if H < 0.5 else None,
            "regime": "proved" if H < 0.5 else "conjecture",
            "config_sha256": config_hash(cfg),
        }
        _write_json(f"{stem}.json", side)
        results.append(side)
    return results


def _write_tail_csv(path, est, cfg) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {_header('couple', cfg)}\n")
        fh.write("n,p_hat,ci_lo,ci_hi\n")
        for n, p, lo, hi in zip(est.n_grid, est.p_hat, est.ci_lo, est.ci_hi):
            fh.write(f"{int(n)},{p:.17g},{lo:.17g},{hi:.17g}\n")


def cmd_tail_experiment(cfg: dict, out: str, summary_out: Optional[str] = None,
                        trace_dir: Optional[str] = None, trace_limit: int = 10) -> dict:
    """Run the replicas described by a resolved config; write the tail CSV and a summary JSON."""
    model = build_model(cfg)
    a = build_kernel(cfg)
    ccfg = build_coupling_config(cfg)
    seed = resolve_seed(cfg["seed"])
    cfg = dict(cfg, seed=seed)
    workers = cfg["workers"] or (os.cpu_count() or 1)
    est = estimate_tv_tail(model, a, ccfg, cfg["replicas"], n_grid=None, seed=seed, workers=workers,
                           history=cfg["history"])
    _write_tail_csv(out, est, cfg)
    diag = est.diagnostics()
    summary = {
        "config_sha256": config_hash(cfg),
        "replicas": est.replicas,
        "horizon": est.horizon,
        "coalescence_fraction": est.coalesced_fraction,
        "fitted_exponent": est.decay_exponent,
        "fit_window": list(est.fit_window) if est.fit_window else None,
        "fit_reliable": est.fit_reliable,
        "v_theoretical": theoretical_rate(cfg),
        "p_hat_monotone": bool(np.all(np.diff(est.p_hat) <= 0)),
        "diagnostics": diag,
    }
    if summary_out:
        _write_json(summary_out, summary)
    if trace_dir:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)
        for stream in range(1, min(trace_limit, cfg["replicas"]) + 1):
            tr = run_coupling(model, a, ccfg, seed, stream, cfg["history"], record=True)
            with open(Path(trace_dir) / f"trace_{stream:05d}.csv", "w", encoding="utf-8") as fh:
                fh.write(f"# {_header('couple', cfg)} stream={stream}\n")
                fh.write("time,phase,event,detail\n")
                for t, phase, event, detail in tr.events:
                    fh.write(f"{t},{phase},{event},{str(detail).replace(',', ';')}\n")
    return summary


# -- argument parsing -------------------------------------------------------


def _add_coupling_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' file; keys are the flag names below")
    for key in COUPLING_KEYS:
        p.add_argument(f"--{key.name}", dest=key.name, default=None, help=f"{key.help} [default: {key.default}]")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ergodrift", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ergodrift {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="build a coefficient family and write k,a_k")
    p.add_argument("--family", required=True, choices=["poly", "exp", "fbm", "custom"])
    p.add_argument("--params", action="append", default=[],
                   help="key=value list: rho (poly); ca, lambda (exp); hurst, h (fbm); path (custom)")
    p.add_argument("--k-max", type=int, default=2**15)
    p.add_argument("--out", required=True)

    p = sub.add_parser("invert", help="invert a kernel and write k,b_k")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--oracle-check", type=int, default=0, metavar="K",
                   help="compare with the composition oracle up to index K (<= 20)")
    p.add_argument("--method", choices=["recursion", "newton"], default="recursion")

    p = sub.add_parser("slope", help="log-log decay slope of a k,value CSV")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--kmin", type=int, default=100)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--json", action="store_true", help="print JSON")

    p = sub.add_parser("simulate-noise", help="sample moving-average noise paths")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--history", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rate", help="evaluate the convergence rate v(beta, rho)")
    p.add_argument("--beta", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--fbm", type=float, metavar="H")
    p.add_argument("--grid-beta", help="comma list; with --grid-rho writes a table to --out")
    p.add_argument("--grid-rho")
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("figure1", help="inverse-kernel decay data for several Hurst parameters")
    p.add_argument("--hurst", default="0.1,0.3,0.6,0.9")
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--k-max", type=int, default=2**15)
    p.add_argument("--kmin", type=int, default=100)
    p.add_argument("--kmax", type=int, default=20_000)
    p.add_argument("--out-dir", required=True)

    for name, text in (("couple", "run coupled replicas and write the survival curve"),
                       ("tail", "tail experiment: survival curve plus summary JSON")):
        p = sub.add_parser(name, help=text)
        _add_coupling_flags(p)
        p.add_argument("--out", required=True, help="tail CSV (n,p_hat,ci_lo,ci_hi)")
        p.add_argument("--summary", help="summary JSON path (default: <out>.json for tail)")
        p.add_argument("--trace-out", help="directory for per-replica event traces")
        p.add_argument("--trace-limit", type=int, default=10)
    return ap


def _coupling_cfg(args) -> dict:
    file_vals = read_config_file(args.config) if args.config else {}
    flags = {k.name: getattr(args, k.name) for k in COUPLING_KEYS}
    return resolve(file_vals, flags)


def _run(args) -> int:
    c = args.command
    if c == "coeffs":
        cmd_coeffs(args.family, _parse_params(args.params), args.k_max, args.out)
    elif c == "invert":
        rep = cmd_invert(args.coeffs, args.out, args.oracle_check, args.method)
        print(json.dumps(rep))
    elif c == "slope":
        kmax = args.kmax
        if kmax is None:
            kmax = int(0.6 * (len(read_coeffs_csv(args.in_path)) - 1))
        res = cmd_slope(args.in_path, args.kmin, kmax)
        print(json.dumps(res) if args.json else f"slope {res['slope']:.6f} intercept {res['intercept']:.6f}")
    elif c == "simulate-noise":
        cmd_simulate_noise(args.coeffs, args.dim, args.steps, args.history, resolve_seed(args.seed),
                           args.replicas, args.out)
    elif c == "rate":
        if args.grid_beta or args.grid_rho:
            if not (args.grid_beta and args.grid_rho and args.out):
                raise DomainError("table mode needs --grid-beta, --grid-rho and --out")
            cmd_rate_table([float(x) for x in args.grid_beta.split(",")],
                           [float(x) for x in args.grid_rho.split(",")], args.out)
            return 0
        if args.fbm is None and (args.beta is None or args.rho is None):
            raise DomainError("rate needs --beta and --rho, or --fbm H")
        res = cmd_rate(args.beta, args.rho, args.fbm)
        print(json.dumps(res) if args.json else f"v = {res['v']:.10g} (argmax alpha {res['argmax_alpha']:.6g})")
    elif c == "figure1":
        H_list = [float(x) for x in args.hurst.split(",")]
        res = cmd_figure1(H_list, args.h, args.k_max, (args.kmin, args.kmax), args.out_dir)
        for r in res:
            print(f"H={r['H']:g} slope={r['slope']:.4f}")
    elif c in ("couple", "tail"):
        cfg = _coupling_cfg(args)
        summary_out = args.summary or (f"{args.out}.json" if c == "tail" else None)
        summary = cmd_tail_experiment(cfg, args.out, summary_out, args.trace_out, args.trace_limit)
        print(json.dumps({k: summary[k] for k in ("replicas", "coalescence_fraction", "fitted_exponent",
                                                   "v_theoretical")}, default=_json_default))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except InvariantError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return 3
    except (DomainError, ErgodriftError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
