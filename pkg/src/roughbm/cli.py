"""Command-line driver: config in, CSV tables and report.json out.

Every subcommand is a deterministic function of (config, seed). Experiment
seeds are derived as seed XOR a stable hash of the experiment label, and the
library keys each replication's stream on top of that.
"""
import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import warnings

import numpy as np

from . import combinatorics as cb
from . import roughpath as rp
from . import verify as vf
from ._contract import DEFAULT_BUDGET, BudgetExceeded
from .config import ConfigError, parse_config, validate
from .gaussian import ell_d_partial_norm, sample_paths
from .hermite import hermite_rank, sobolev_norm_k2, truncate
from .homogenize import VectorFieldSpec, compare_invariance
from .limits import assemble, characteristics, delta_table, expected_signature_coeff

PASSING = ("converging", "pass")
VERIFY_KINDS = ("lln", "ladder", "blocks", "cross", "irregular", "counterexample", "moments")
SUBCOMMANDS = ("hermite", "covariance", "diagrams", "lift", "fawcett", "verify", "homogenize", "variation")


def derive_seed(seed, label):
    """seed XOR a stable 32-bit hash of the experiment label."""
    h = int.from_bytes(hashlib.sha256(label.encode()).digest()[:4], "big")
    return int(seed) ^ h


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_atomic(path, text):
    """Write through a temporary file in the target directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _word_str(w):
    return "".join(str(x) for x in w)


def _check(name, verdict, summary, **extra):
    return {"name": name, "verdict": verdict, "summary": summary, **extra}


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.ndarray):
        return _json_safe(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


# subcommands: each returns (tables, checks, payload); tables are (name, header, rows)

def cmd_hermite(cfg, ctx):
    rows, comps = [], []
    for i, s in enumerate(cfg.build_series()):
        rows += [(i, q, float(c)) for q, c in enumerate(s.coeffs)]
        comps.append({"component": i, "series": s.to_dict(), "rank": hermite_rank(s), "norm": s.norm(),
                      "sobolev": {str(k): sobolev_norm_k2(s, k) for k in (0, 1, 2)}})
    checks = [_check(f"component {c['component']} rank", "pass", f"rank {c['rank']}, norm {c['norm']:.6g}")
              for c in comps]
    return [("hermite", ["component", "degree", "coefficient"], rows)], checks, {"components": comps}


def _chars(cfg):
    series, model = cfg.build_series(), cfg.build_model()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ch = characteristics(series, model, cfg.M, cfg.U)
    return series, model, ch


def _sigma_check(ch):
    neg = [w for w in ch.warnings if "negative eigenvalue" in w]
    tail = [w for w in ch.warnings if "outermost lag" in w]
    checks = [_check("Sigma positive semidefinite", "violated" if neg else "pass", neg[0] if neg else "ok")]
    if tail:
        checks.append(_check("Gamma lag truncation", "inconclusive", tail[0]))
    return checks


def cmd_covariance(cfg, ctx):
    series, model, ch = _chars(cfg)
    L = cfg.experiment["max_lag"]
    lags = np.arange(L + 1)
    rho = model.covariance_matrix(lags)
    delta = delta_table(series, model, cfg.M, lags)
    m = model.m
    rows = [(k, l, int(u), float(rho[j, k, l]), float(delta[j, k, l]))
            for k in range(m) for l in range(m) for j, u in enumerate(lags)]
    norms = []
    for k, s in enumerate(series):
        d = hermite_rank(s)
        total, last = ell_d_partial_norm(lambda u, k=k: model.covariance(k, k, u), d, cfg.U)
        norms.append({"component": k, "d": d, "partial_sum": total, "last_shell": last})
    payload = {"characteristics": ch.to_dict(), "ell_d": norms}
    return [("covariance", ["k", "l", "lag", "rho", "delta"], rows)], _sigma_check(ch), payload


def _degree_vectors(max_total, max_levels=4):
    out = []

    def rec(prefix, lo, total):
        if len(prefix) >= 2:
            out.append(tuple(prefix))
        if len(prefix) == max_levels:
            return
        for q in range(lo, max_total - total + 1):
            rec(prefix + [q], q, total + q)

    rec([], 1, 0)
    return sorted(out, key=lambda v: (sum(v), len(v), v))


def cmd_diagrams(cfg, ctx):
    exp = cfg.experiment
    vectors = [tuple(exp["q"])] if exp["q"] else _degree_vectors(exp["max_total"])
    rows = []
    for q in vectors:
        Gs = list(cb.enumerate_diagrams(q))
        kinds = [cb.classify_diagram(G) for G in Gs]
        rows.append((" ".join(map(str, q)), sum(q), len(Gs), kinds.count("regular"), kinds.count("irregular")))
    checks = [_check("diagram enumeration", "pass", f"{len(rows)} degree vectors")]
    payload = {"examples": [G.to_json() for G in list(cb.enumerate_diagrams(vectors[0]))[:8]] if vectors else []}
    return [("diagrams", ["levels", "total_degree", "diagrams", "regular", "irregular"], rows)], checks, payload


def _flat_names(prefix, m, k):
    return [prefix + "_" + _word_str(w) for w in rp.words(m, k)]


def cmd_lift(cfg, ctx):
    exp, model, series = cfg.experiment, cfg.build_model(), cfg.build_series()
    fs = [truncate(s, cfg.M) for s in series]
    m, N, reps = model.m, exp["N"], exp["reps"]
    seed = derive_seed(ctx["seed"], "lift")
    header = ["seed", "rep", "window"] + _flat_names("S", m, 1) + _flat_names("SS", m, 2) + _flat_names("D", m, 2)
    rows, worst, first = [], 0.0, []
    batch = 500
    for s0 in range(0, reps, batch):
        n = min(batch, reps - s0)
        paths = sample_paths(model, N, seed, n, s0)
        for s, t in exp["windows"]:
            S1 = rp.first_order(paths, fs, s, t)
            S2 = rp.second_order(paths, fs, s, t)
            D = rp.diagonal(paths, fs, s, t)
            err = S2 + np.swapaxes(S2, -1, -2) + D - S1[:, :, None] * S1[:, None, :]
            worst = max(worst, float(np.abs(err).max()))
            for r in range(n):
                rows.append((seed, s0 + r, f"{s}:{t}", *S1[r], *S2[r].ravel(), *D[r].ravel()))
            if s0 == 0:
                first.append(rp.lift(paths[0], fs, s, t, K=min(cfg.K, 4)).to_dict())
    order = {f"{s}:{t}": i for i, (s, t) in enumerate(exp["windows"])}
    rows.sort(key=lambda row: (order[row[2]], row[1]))
    verdict = "pass" if worst < 1e-9 else "violated"
    checks = [_check("S2 + S2^T + D = S (x) S", verdict, f"max deviation {worst:.3e}")]
    return [("lift", header, rows)], checks, {"first_replication": first, "N": N, "reps": reps}


def cmd_fawcett(cfg, ctx):
    _, _, ch = _chars(cfg)
    words = ctx.get("words") or cfg.experiment["words"]
    words = [[int(c) for c in w] if isinstance(w, str) else list(w) for w in words]
    for w in words:
        if not all(1 <= x <= ch.m for x in w):
            raise ValueError(f"word {_word_str(w)} has a letter outside 1..{ch.m}")
    rows = [(_word_str(w), s, t, expected_signature_coeff(w, s, t, ch))
            for w in words for s, t in cfg.experiment["windows"]]
    return [("fawcett", ["word", "s", "t", "value"], rows)], _sigma_check(ch), {"characteristics": ch.to_dict()}


# verify families

def _report_table(name, reports):
    rows = []
    for rep in reports:
        rows += [(rep.label, *row) for row in rep.rows()]
    return (name, ["label", "grid", "statistic", "stderr", "target"], rows)


def _report_checks(reports):
    return [_check(r.label, r.verdict, f"last value {r.values[-1]:.6g}") for r in reports]


def _delta_source(cfg, model, series):
    if cfg.experiment["delta"] == "kronecker":
        eye = np.eye(model.m)
        return lambda lags: vf.kronecker_delta(lags)[:, None, None] * eye
    return vf.model_delta(series, model, cfg.M)


def _delta_chars(delta, U):
    tab = np.asarray(delta(np.arange(U + 1)), float)
    return assemble(tab[0], tab[1:].sum(axis=0))


def _ladder_word(cfg, n):
    for w in cfg.experiment["words"]:
        if len(w) == 2 * n:
            return tuple(w)
    return (1,) * (2 * n)


def _verify_ladder(cfg, ctx):
    model, series = cfg.build_model(), cfg.build_series()
    n = ctx.get("n") or cfg.experiment["n"]
    delta = _delta_source(cfg, model, series)
    word = _ladder_word(cfg, n)
    s, t = cfg.experiment["windows"][0]
    target = expected_signature_coeff(word, s, t, _delta_chars(delta, cfg.U))
    grid = cfg.experiment["N_grid"]
    if n == 1:
        rep = vf.ladder_report(delta, grid, word, s, t, target, ctx["budget"])
    else:
        P = cb.ladder_pairing(n)
        vals = [vf.pairing_sum(P, word, N, delta, s, t, ctx["budget"]) for N in grid]
        devs = [abs(v - target) for v in vals]
        verdict = "converging" if devs[-1] <= 1e-12 else vf.decay_verdict(devs)
        rep = vf.ConvergenceReport(f"ladder pairing sum n={n}", grid, vals, None, target, verdict,
                                   {"deviation": devs})
    rep.label = f"ladder n={n} word {_word_str(word)}"
    return [rep]


def _verify_blocks(cfg, ctx):
    model, series, exp = cfg.build_model(), cfg.build_series(), cfg.experiment
    delta = _delta_source(cfg, model, series)
    P = cb.Matching([tuple(p) for p in exp["pairing"]]) if exp["pairing"] else cb.ladder_pairing(max(exp["n"], 2))
    l = 2 * P.n
    blocks = exp["blocks"] or [[1, 2, 3]] + [[j] for j in range(4, l + 1)]
    B = cb.BlockDecomposition(tuple(tuple(b) for b in blocks))
    word = _ladder_word(cfg, P.n)
    s, t = exp["windows"][0]
    rep = vf.decay_report(f"block sum {list(map(list, B.blocks))}",
                          lambda N: abs(vf.block_sum(P, B, word, N, delta, s, t, ctx["budget"])),
                          exp["N_grid"], exp["ratio"])
    return [rep]


def _verify_cross(cfg, ctx):
    model, series, exp = cfg.build_model(), cfg.build_series(), cfg.experiment
    delta = _delta_source(cfg, model, series)
    P = cb.Matching([tuple(p) for p in exp["pairing"]]) if exp["pairing"] else cb.Matching(((1, 3), (2, 4)))
    windows = exp["windows"] if len(exp["windows"]) >= 2 else [[0.0, 0.5], [0.5, 1.0]]
    words = exp["words"] if len(exp["words"]) == len(windows) else [[1, 1]] * len(windows)
    rep = vf.decay_report("cross-simplex pairing sum",
                          lambda N: abs(vf.cross_simplex_sum(P, windows, words, N, delta, ctx["budget"])),
                          exp["N_grid"], exp["ratio"])
    return [rep]


def _verify_irregular(cfg, ctx):
    model, exp = cfg.build_model(), cfg.experiment
    q = exp["q"] or [1, 2, 1]
    return vf.bm_irregular_decay(q, lambda u: model.covariance(0, 0, u), exp["N_grid"], exp["ratio"],
                                 ctx["budget"])


def _verify_counterexample(cfg, ctx):
    exp = cfg.experiment
    r = exp["r"]
    if r is None:
        far = cfg.model.get("farima")
        if far is None:
            raise ValueError("counterexample needs experiment.r or a farima model")
        r = float(far["r"])
    d = exp["d"]
    target = 1.0 + d * (r - 0.5)
    values, slopes = [], []
    for L in exp["L_grid"]:
        total, slope = vf.conditional_decay_partial(r, d, L)
        values.append(total)
        slopes.append(slope)
    ok = target > 0 and abs(slopes[-1] - target) <= 0.1
    rep = vf.ConvergenceReport(f"conditional decay partial sums r={r} d={d}", exp["L_grid"], values, None,
                               None, "converging" if ok else "violated",
                               {"slopes": slopes, "predicted_slope": target})
    return [rep], _check(rep.label, "pass" if ok else "violated",
                         f"slope {slopes[-1]:.4f} vs predicted {target:.4f}")


def _verify_lln(cfg, ctx):
    exp = cfg.experiment
    return [vf.diagonal_lln(cfg.build_model(), cfg.build_series(), cfg.M, exp["windows"], exp["N_grid"],
                            exp["reps"], derive_seed(ctx["seed"], "verify lln"), workers=ctx["threads"])]


def _verify_moments(cfg, ctx):
    series, model, ch = _chars(cfg)
    exp = cfg.experiment
    seed = derive_seed(ctx["seed"], "verify moments")
    reports = []
    for w in exp["words"]:
        for s, t in exp["windows"]:
            est = vf.mc_signature_moment([(tuple(w), (s, t))], model, series, cfg.M, exp["N"], exp["reps"], seed,
                                         workers=ctx["threads"])
            target = expected_signature_coeff(w, s, t, ch)
            ok = abs(est.mean - target) <= 4 * est.stderr + 1e-12
            reports.append(vf.ConvergenceReport(f"moment {_word_str(w)} on [{s},{t}]", [exp["N"]], [est.mean],
                                                [est.stderr], target, "converging" if ok else "inconclusive"))
    return reports


VERIFY = {"lln": _verify_lln, "ladder": _verify_ladder, "blocks": _verify_blocks, "cross": _verify_cross,
          "irregular": _verify_irregular, "counterexample": _verify_counterexample, "moments": _verify_moments}


def cmd_verify(cfg, ctx):
    kind = ctx["verify"]
    res = VERIFY[kind](cfg, ctx)
    if isinstance(res, tuple):
        reports, check = res
        checks = [check]
    else:
        reports, checks = res, None
    checks = checks or _report_checks(reports)
    return [_report_table(f"verify_{kind}", reports)], checks, {"reports": [r.to_dict() for r in reports]}


def cmd_homogenize(cfg, ctx):
    if cfg.field is None:
        raise ValueError("homogenize needs a field in the config")
    exp = cfg.experiment
    field = VectorFieldSpec.from_dict(cfg.field)
    rep = compare_invariance(field, cfg.build_model(), cfg.build_series(), cfg.M, exp["N_grid"], exp["reps"],
                             derive_seed(ctx["seed"], "homogenize"), cfg.y0, exp["steps"], cfg.U)
    x = rep.extra
    rows = []
    for i, N in enumerate(rep.grid):
        for j, v in enumerate(x["euler_mean"][i]):
            rows.append((N, "euler", f"mean_{j + 1}", v, None))
        for j, v in enumerate(x["sde_mean"]):
            rows.append((N, "sde", f"mean_{j + 1}", v, None))
        for j, v in enumerate(x["sde_mean_uncorrected"]):
            rows.append((N, "sde_uncorrected", f"mean_{j + 1}", v, None))
        rows.append((N, "gap", "max_mean_diff", rep.values[i], rep.stderrs[i]))
        rows.append((N, "gap", "z_corrected", x["z_corrected"][i], None))
        rows.append((N, "gap", "z_uncorrected", x["z_uncorrected"][i], None))
        rows.append((N, "gap", "cov_gap", x["cov_gap"][i], None))
    checks = [_check(rep.label, rep.verdict, f"z corrected {x['z_corrected'][-1]:.3f}, "
                                             f"uncorrected {x['z_uncorrected'][-1]:.3f}")]
    return [("homogenize", ["N", "side", "stat", "value", "stderr"], rows)], checks, {"report": rep.to_dict()}


def cmd_variation(cfg, ctx):
    exp, model, series = cfg.experiment, cfg.build_model(), cfg.build_series()
    fs = [truncate(s, cfg.M) for s in series]
    seed = derive_seed(ctx["seed"], "variation")
    s, t = exp["windows"][0]
    p = exp["p"]
    rows = []
    paths = sample_paths(model, exp["N"], seed, exp["reps"])
    for r in range(exp["reps"]):
        X1, X2 = rp.lift_path(paths[r], fs, s, t)
        v1, v2 = rp.r_variation(X1, X2, p)
        rows.append((seed, r, v1, v2))
    v = np.array([row[2:] for row in rows])
    ok = bool(np.all(np.isfinite(v)))
    checks = [_check(f"{p}-variation of the lift", "pass" if ok else "violated",
                     f"mean level-1 {v[:, 0].mean():.4g}, level-2 {v[:, 1].mean():.4g}")]
    payload = {"p": p, "mean": v.mean(axis=0).tolist(), "max": v.max(axis=0).tolist()}
    return [("variation", ["seed", "rep", "level1", "level2"], rows)], checks, payload


COMMANDS = {"hermite": cmd_hermite, "covariance": cmd_covariance, "diagrams": cmd_diagrams, "lift": cmd_lift,
            "fawcett": cmd_fawcett, "verify": cmd_verify, "homogenize": cmd_homogenize, "variation": cmd_variation}


def run(subcommand, config, overrides=None):
    """Run one subcommand; writes CSVs and report.json and returns the exit code.

    config is a RunConfig or a raw dict; overrides may set seed, out, threads,
    budget, n, words and verify (the verify family).
    """
    o = dict(overrides or {})
    cfg = config if not isinstance(config, dict) else validate(config)
    seed = o.get("seed") if o.get("seed") is not None else cfg.seed
    out = o.get("out") or cfg.out
    ctx = {"seed": seed, "threads": o.get("threads") or 1, "budget": o.get("budget") or DEFAULT_BUDGET,
           "n": o.get("n"), "words": o.get("words"), "verify": o.get("verify")}
    name = subcommand + (f" {ctx['verify']}" if subcommand == "verify" else "")
    report = {"subcommand": name, "seed": seed, "config": cfg.to_dict()}
    try:
        tables, checks, payload = COMMANDS[subcommand](cfg, ctx)
    except BudgetExceeded as e:
        report.update(status="refused", cost_estimate=e.cost, budget=e.budget, message=str(e))
        write_atomic(os.path.join(out, "report.json"), json.dumps(_json_safe(report), indent=2) + "\n")
        print(f"{name}: {e}", file=sys.stderr)
        return 2
    for tname, header, rows in tables:
        write_atomic(os.path.join(out, f"{tname}.csv"), csv_text(header, rows))
    ok = all(c["verdict"] in PASSING for c in checks)
    report.update(status="ok" if ok else "failed", checks=checks, result=payload,
                  tables=[f"{t[0]}.csv" for t in tables])
    write_atomic(os.path.join(out, "report.json"), json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n")
    for c in checks:
        print(f"{c['verdict'].upper():<12} {c['name']}: {c['summary']}")
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="roughbm", description="Functional sums of Gaussian sequences as rough paths.")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo batches")
    p.add_argument("--budget", type=float, help=f"operation budget for exact sums (default {DEFAULT_BUDGET:g})")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        if name == "fawcett":
            sp.add_argument("--word", action="append", dest="words", help="word such as 12; repeatable")
        if name == "verify":
            sp.add_argument("family", choices=VERIFY_KINDS)
            sp.add_argument("--n", type=int, help="number of pairs for the ladder family")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return 1
    overrides = {"seed": args.seed, "out": args.out, "threads": args.threads, "budget": args.budget,
                 "words": getattr(args, "words", None), "n": getattr(args, "n", None),
                 "verify": getattr(args, "family", None)}
    try:
        return run(args.command, cfg, overrides)
    except ValueError as e:
        print(f"{args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
