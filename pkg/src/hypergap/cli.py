"""Command line driver: certificates, corpus checks, sharpness scans, rearrangement demo.

Exit codes: 0 all pass, 1 a mathematical FAIL, 2 usage or configuration
error, 3 numerical non-convergence (takes precedence over 1, since a run
that did not converge cannot vouch for its other verdicts).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import deficit as D
from .corpus import DEFAULT_SIZE, default_corpus
from .errors import ConvergenceError, DomainError, HypergapError, IntegrabilityError
from .report import SCHEMA_VERSION, csv_text, dumps

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NONCONV = 0, 1, 2, 3

# kind -> (dimensions used when --n is absent, minimum n)
CHECK_KINDS = {
    "keytool": ((4, 5, 6, 8), 4),
    "tofinish": ((4, 5, 6, 8), 4),
    "lemma31": ((4, 5, 6, 8), 4),
    "weighted": ((5, 6, 8), 5),
    "rellich": ((5, 6, 8), 5),
    "sobolev": ((5, 6), 5),
    "gjms": ((5, 6, 8), 5),
    "adams": ((4,), 4),
    "signs": (tuple(range(4, 13)), 4),
    "lowerbound": (tuple(range(4, 13)), 4),
    "keyestimate": ((4, 5, 6, 8), 4),
    "transfer": ((4, 5, 6, 8), 4),
}
PROOF_KINDS = {"signs", "lowerbound", "keyestimate", "transfer"}
SHARP_KINDS = {"sobolev": ((5,), 0.05), "rellich": ((5,), 0.15), "adams": ((4,), None),
               "optimize": ((5,), 0.02)}
COLUMNS = ["kind", "n", "item", "status", "lhs", "rhs", "gap", "scale", "rel_gap", "quad_error"]


@dataclass
class RunConfig:
    command: str
    kind: str | None = None
    dims: list = field(default_factory=list)
    tol: float | None = None
    out: str = "hypergap_reports"
    seed: int = 0
    corpus_size: int = DEFAULT_SIZE
    n_max: int = 64
    grid_points: int = 2000
    pows: list = field(default_factory=lambda: [1.0, 2.0])
    budget: int = 400
    threads: int = 1

    def validate(self):
        if self.tol is not None and not self.tol > 0:
            raise DomainError("tolerances must be positive")
        if any(int(n) != n or n < 4 for n in self.dims):
            raise DomainError("dimensions must be integers >= 4")
        if self.corpus_size < 0 or self.grid_points < 2 or self.n_max < 4 or self.budget < 1:
            raise DomainError("corpus_size, grid_points, n_max and budget out of range")
        if self.command == "check":
            if self.kind not in CHECK_KINDS:
                raise DomainError(f"unknown check kind {self.kind!r}")
            lo = CHECK_KINDS[self.kind][1]
            if any(n < lo for n in self.dims):
                raise DomainError(f"kind {self.kind} needs n >= {lo}")
            if self.kind == "adams" and any(n != 4 for n in self.dims):
                raise DomainError("the Adams checks live on H^4")
        if self.command == "sharpness":
            if self.kind not in SHARP_KINDS:
                raise DomainError(f"unknown sharpness kind {self.kind!r}")
            if self.kind == "adams" and any(n != 4 for n in self.dims):
                raise DomainError("the Adams scan lives on H^4")
            if self.kind != "adams" and any(n < 5 for n in self.dims):
                raise DomainError(f"kind {self.kind} needs n >= 5")
            if any(not 0 < p <= 2 for p in self.pows):
                raise DomainError("powers must lie in (0, 2]")
        return self

    def public(self):
        d = asdict(self)
        # execution details: must not change report bytes
        d.pop("threads")
        d.pop("out")
        return d


def thread_cap():
    raw = os.environ.get("HYPERGAP_THREADS", "").strip()
    if not raw:
        return 1
    try:
        k = int(raw)
    except ValueError:
        raise DomainError("HYPERGAP_THREADS must be a positive integer") from None
    if k < 1:
        raise DomainError("HYPERGAP_THREADS must be a positive integer")
    return k


def _pmap(fn, items, threads):
    """Ordered map; a process pool when threads > 1 (results keep input order)."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# rows

def _row(kind, n, item, rep):
    d = rep.to_dict()
    return {"kind": kind, "n": n, "item": item, "status": d["status"], "lhs": d["lhs"],
            "rhs": d["rhs"], "gap": d["gap"], "scale": rep.scale, "rel_gap": d["rel_gap"],
            "quad_error": d["quad_error"], "params": d["params"]}


def _error_row(kind, n, item, exc):
    return {"kind": kind, "n": n, "item": item, "status": "NONCONVERGED", "lhs": math.nan,
            "rhs": math.nan, "gap": math.nan, "scale": math.nan, "rel_gap": math.nan,
            "quad_error": math.nan,
            "params": {"error": type(exc).__name__, "message": str(exc)}}


@lru_cache(maxsize=16)
def _corpus(n, size, seed):
    return tuple(default_corpus(n, size, seed))


def _tol_kw(tol):
    return {} if tol is None else {"tol": tol}


def _check_profile(kind, p, tol):
    kw = _tol_kw(tol)
    if kind == "keytool":
        return [D.keytool_gap(p, **kw)]
    if kind == "tofinish":
        return list(D.tofinish_chain(p, **kw))
    if kind == "lemma31":
        return [D.lemma31_check(p, **kw)]
    if kind == "weighted":
        return list(D.euclidean_weighted_checks(p, **kw))
    if kind == "rellich":
        return [D.rellich_remainder(p, **kw)]
    if kind == "sobolev":
        return [D.sobolev_remainder(p, **kw)]
    if kind == "gjms":
        return [D.gjms_p2_check(p, **kw)]
    if kind == "adams":
        lam = 4.0
        return [D.adams_functional(D.adams_normalize(p, lam), lam, **kw)]
    raise DomainError(f"unknown check kind {kind!r}")


def _run_corpus_item(args):
    kind, n, idx, size, seed, tol = args
    p = _corpus(n, size, seed)[idx]
    try:
        reps = _check_profile(kind, p, tol)
    except (ConvergenceError, IntegrabilityError) as exc:
        return [_error_row(kind, n, p.name, exc)]
    name = p.name or f"profile{idx}"
    if len(reps) == 1:
        return [_row(kind, n, name, reps[0])]
    return [_row(kind, n, f"{name}#{j}", r) for j, r in enumerate(reps)]


def _run_proof_item(args):
    kind, n, points = args
    try:
        if kind == "signs":
            rep = D.proof_function_signs(n, np.geomspace(1e-2, 20.0, points))
        elif kind == "lowerbound":
            rep = D.lower_bound_check(n, np.geomspace(1e-2, 20.0, points))
        elif kind == "keyestimate":
            rep = D.keyestimate_check(n, np.geomspace(1e-6, 1e6, max(points // 10, 2)))
        else:
            rep = D.pointwise_transfer_bound(n, np.geomspace(1e-8, 1e8, max(points // 5, 2)))
    except ConvergenceError as exc:
        return [_error_row(kind, n, kind, exc)]
    return [_row(kind, n, kind, rep)]


def _verdict(statuses):
    if "NONCONVERGED" in statuses:
        return "NONCONVERGED", EXIT_NONCONV
    if "FAIL" in statuses:
        return "FAIL", EXIT_FAIL
    return "PASS", EXIT_OK


def _write(cfg, stem, payload, rows, columns):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.json").write_text(dumps(payload))
    (out / f"{stem}.csv").write_text(csv_text(rows, columns))
    return out / f"{stem}.json"


def _report(cfg, rows, extra=None):
    status, code = _verdict([r["status"] for r in rows])
    payload = {"schema_version": SCHEMA_VERSION, "command": cfg.command, "kind": cfg.kind,
               "config": cfg.public(), "seed": cfg.seed, "status": status, "results": rows}
    if extra:
        payload.update(extra)
    return payload, status, code


# ---------------------------------------------------------------------------
# commands

def cmd_certify(cfg):
    from .polyexact import certify_all
    certs = certify_all(cfg.n_max)
    rows = [{"kind": "certificate", "n": "", "item": k, "status": c.status}
            for k, c in sorted(certs.items())]
    payload, status, code = _report(cfg, rows, {"certificates": {k: c.to_dict() for k, c in certs.items()}})
    path = _write(cfg, "certify", payload, rows, ["kind", "item", "status"])
    bad = [k for k, c in sorted(certs.items()) if not c.ok]
    print(f"certify: {len(certs)} certificates, {len(bad)} failing -> {status}")
    for k in bad:
        print(f"  FAIL {k}: {json.dumps(certs[k].to_dict(), default=str)[:400]}")
    print(f"report: {path}")
    return code


def cmd_check(cfg):
    dims = cfg.dims or list(CHECK_KINDS[cfg.kind][0])
    if cfg.kind in PROOF_KINDS:
        items = [(cfg.kind, n, cfg.grid_points) for n in dims]
        chunks = _pmap(_run_proof_item, items, cfg.threads)
    else:
        items = []
        for n in dims:
            count = len(_corpus(n, cfg.corpus_size, cfg.seed))
            items += [(cfg.kind, n, i, cfg.corpus_size, cfg.seed, cfg.tol) for i in range(count)]
        chunks = _pmap(_run_corpus_item, items, cfg.threads)
    rows = [r for ch in chunks for r in ch]
    payload, status, code = _report(cfg, rows)
    path = _write(cfg, f"check_{cfg.kind}", payload, rows, COLUMNS)
    for n in dims:
        sts = [r["status"] for r in rows if r["n"] == n]
        worst = min((r["rel_gap"] for r in rows if r["n"] == n and not math.isnan(r["rel_gap"])),
                    default=math.nan)
        print(f"check {cfg.kind} n={n}: {len(sts)} items, "
              f"{sts.count('PASS')} PASS, {sts.count('WARN')} WARN, {sts.count('FAIL')} FAIL, "
              f"{sts.count('NONCONVERGED')} NONCONVERGED; min rel gap {worst:.3e}")
    print(f"{status}  report: {path}")
    return code


def _scan_rows(res):
    return [{"kind": res.kind, "param": float(p), "ratio": float(r), "status": s}
            for p, r, s in zip(res.params, res.ratios, res.statuses)]


def cmd_sharpness(cfg):
    from .extremal import (adams_sharpness_scan, make_bubble, optimize_ratio,
                           rellich_sharpness_scan, sobolev_sharpness_scan)
    dims = cfg.dims or list(SHARP_KINDS[cfg.kind][0])
    band = cfg.tol if cfg.tol is not None else SHARP_KINDS[cfg.kind][1]
    scans, rows, verdicts = {}, [], []
    try:
        if cfg.kind in ("sobolev", "rellich"):
            for n in dims:
                res = sobolev_sharpness_scan(n) if cfg.kind == "sobolev" else rellich_sharpness_scan(n)
                final = res.ratios[-1] / res.target
                ok = (res.trend["monotone_decreasing"] and final <= 1 + band
                      and all(s == "PASS" for s in res.statuses))
                verdicts.append(ok)
                scans[f"n={n}"] = json.loads(res.to_json())
                rows += [dict(r, n=n) for r in _scan_rows(res)]
                print(f"sharpness {cfg.kind} n={n}: final ratio/target {final:.6f} "
                      f"(band {band}), monotone={res.trend['monotone_decreasing']} -> "
                      f"{'PASS' if ok else 'FAIL'}")
        elif cfg.kind == "adams":
            out = adams_sharpness_scan(tuple(cfg.pows))
            for pw, res in out.items():
                tr = res.trend
                if pw < 2:
                    ok = tr["growth_factor"] >= 1.3 and tr["loglog_slope"] > 0
                    msg = f"growth {tr['growth_factor']:.4f} (need >= 1.3)"
                else:
                    ok = tr["max_over_min"] <= 2.0
                    msg = f"max/min {tr['max_over_min']:.4f} (need <= 2)"
                verdicts.append(ok)
                scans[f"pow={pw:g}"] = json.loads(res.to_json())
                rows += [dict(r, n=4, pow=pw) for r in _scan_rows(res)]
                print(f"sharpness adams pow={pw:g}: {msg} -> {'PASS' if ok else 'FAIL'}")
        else:
            for n in dims:
                res = optimize_ratio("sobolev", make_bubble(n, 1.0, cutoff=3.0),
                                     budget=cfg.budget, seed=cfg.seed)
                final = res.ratio / res.sharp
                ok = res.status == "PASS" and final <= 1 + band
                verdicts.append(ok)
                scans[f"n={n}"] = {"ratio": res.ratio, "sharp": res.sharp,
                                   "evaluations": res.evaluations, "converged": res.converged,
                                   "history": res.history}
                rows.append({"kind": "optimize", "n": n, "param": res.evaluations,
                             "ratio": res.ratio, "status": "PASS" if ok else "FAIL"})
                print(f"optimize sobolev n={n}: ratio/sharp {final:.6f} after "
                      f"{res.evaluations} evaluations -> {'PASS' if ok else 'FAIL'}")
    except (ConvergenceError, IntegrabilityError) as exc:
        print(f"sharpness {cfg.kind}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    status = "PASS" if all(verdicts) else "FAIL"
    payload = {"schema_version": SCHEMA_VERSION, "command": cfg.command, "kind": cfg.kind,
               "config": cfg.public(), "seed": cfg.seed, "status": status, "scans": scans}
    cols = ["kind", "n", "pow", "param", "ratio", "status"]
    path = _write(cfg, f"sharpness_{cfg.kind}", payload, rows, cols)
    print(f"{status}  report: {path}")
    return EXIT_OK if status == "PASS" else EXIT_FAIL


def random_sampled(rng, size=200):
    """A random nonnegative atomic function laid out on shells in random order."""
    from .rearrange import SampledFunction
    vals = rng.exponential(1.0, size) * (rng.random(size) < 0.8)
    wts = rng.uniform(0.01, 1.0, size)
    return SampledFunction(vals, wts)


def cmd_rearrange_demo(cfg):
    from .profile import lp_norm
    from .rearrange import (decreasing_rearrangement, hardy_check, hardy_littlewood_check,
                            sample_profile, talenti_compare)
    from .hypgeo import GeometryContext
    dims = cfg.dims or [5]
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for n in dims:
        ctx = GeometryContext(n)
        for i in range(50):
            f = random_sampled(rng)
            res = decreasing_rearrangement(f, ctx)
            for p in (1.5, 2.0, 3.0):
                rows.append(_row("hardy_maximal", n, f"random{i}:p={p:g}", hardy_check(res, p)))
            if n > 4:
                rows.append(_row("hardy_littlewood", n, f"random{i}", hardy_littlewood_check(f, ctx)))
        for p in _corpus(n, cfg.corpus_size, cfg.seed)[:5]:
            smp = sample_profile(p)
            res = decreasing_rearrangement(smp, ctx)
            for q in (1, 2, 4):
                direct = lp_norm(p, q)
                rows.append(_row("equimeasurability", n, f"{p.name}:q={q}",
                                 D.DeficitReport("equimeasurability", res.lp_norm(q), direct,
                                                 contract="equal", tol=1e-6,
                                                 params={"q": q})))
            rows.append(_row("talenti", n, p.name, talenti_compare(p)))
    payload, status, code = _report(cfg, rows)
    path = _write(cfg, "rearrange_demo", payload, rows, COLUMNS)
    for kind in ("hardy_maximal", "hardy_littlewood", "equimeasurability", "talenti"):
        sts = [r["status"] for r in rows if r["kind"] == kind]
        if sts:
            print(f"{kind}: {len(sts)} checks, {sts.count('FAIL')} FAIL")
    print(f"{status}  report: {path}")
    return code


COMMANDS = {"certify": cmd_certify, "check": cmd_check, "sharpness": cmd_sharpness,
            "rearrange-demo": cmd_rearrange_demo}


# ---------------------------------------------------------------------------
# argument handling

def build_parser():
    ap = argparse.ArgumentParser(prog="hypergap", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("kind", nargs="?", default=None,
                    help="check: " + ", ".join(CHECK_KINDS) + "; sharpness: " + ", ".join(SHARP_KINDS))
    ap.add_argument("--n", type=int, nargs="+", dest="dims", default=None, help="dimensions")
    ap.add_argument("--tol", type=float, default=None,
                    help="check tolerance, or the acceptance band for sharpness")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--config", default=None, help="flat JSON file with RunConfig fields")
    ap.add_argument("--corpus-size", type=int, dest="corpus_size", default=None)
    ap.add_argument("--n-max", type=int, dest="n_max", default=None)
    ap.add_argument("--grid-points", type=int, dest="grid_points", default=None)
    ap.add_argument("--pows", type=float, nargs="+", default=None)
    ap.add_argument("--budget", type=int, default=None)
    return ap


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DomainError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DomainError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise DomainError("config must be a flat JSON object")
    if "n" in data:
        data["dims"] = data.pop("n")
    allowed = {f.name for f in fields(RunConfig)} - {"command", "threads"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise DomainError(f"unknown config keys: {', '.join(unknown)}")
    for k, v in data.items():
        if isinstance(v, (dict, list)) and k not in ("dims", "pows"):
            raise DomainError(f"config key {k} must be a scalar")
    if isinstance(data.get("dims"), int):
        data["dims"] = [data["dims"]]
    return data


def make_config(argv):
    args = build_parser().parse_args(argv)
    values = load_config(args.config) if args.config else {}
    for k in ("kind", "dims", "tol", "out", "seed", "corpus_size", "n_max", "grid_points",
              "pows", "budget"):
        v = getattr(args, k)
        if v is not None:
            values[k] = v
    cfg = RunConfig(command=args.command, threads=thread_cap(), **values)
    cfg.dims = [int(n) for n in cfg.dims]
    cfg.pows = [float(p) for p in cfg.pows]
    if cfg.command in ("check", "sharpness") and cfg.kind is None:
        raise DomainError(f"{cfg.command} needs a kind")
    if cfg.command in ("certify", "rearrange-demo") and cfg.kind is not None:
        raise DomainError(f"{cfg.command} takes no kind")
    return cfg.validate()


def main(argv=None):
    try:
        cfg = make_config(argv)
    except SystemExit as exc:          # argparse usage errors
        return EXIT_USAGE if exc.code else EXIT_OK
    except (DomainError, TypeError, ValueError) as exc:
        print(f"hypergap: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[cfg.command](cfg)
    except ConvergenceError as exc:
        print(f"hypergap: no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except DomainError as exc:
        print(f"hypergap: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"hypergap: I/O error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except HypergapError as exc:
        print(f"hypergap: {exc}", file=sys.stderr)
        return EXIT_NONCONV


if __name__ == "__main__":
    sys.exit(main())
