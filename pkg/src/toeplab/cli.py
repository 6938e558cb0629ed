"""Command-line experiment runner.

Exit codes: 0 success, 1 validation, 2 resource budget, 3 numeric,
4 an acceptance check embedded in the config failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, acceptance, asymfit, embedding, io, kernels, models, spectral, specfun
from .config import ExperimentConfig, apply_override, validate
from .errors import ToeplabError, ValidationError
from .models import PointX, TorusGrauertTube
from .sampling import halton_points

EXIT_ACCEPTANCE = 4


def _provenance(cfg: ExperimentConfig) -> dict:
    notes = {
        "summation": "exactly rounded sums (math.fsum) of log-shifted terms",
        "gamma_n": "scaled integrand exp(t(cos a - 1)) sin^(n-2) a, adaptive Gauss-Legendre, rtol 1e-12",
    }
    m = cfg.model
    if isinstance(m, TorusGrauertTube):
        g = models.geometry_constants(m)
        notes["geometry"] = dict(g.provenance, sigma_p_xi_value=g.sigma_p_xi, dvxi_over_dv_value=g.dvxi_over_dv)
        notes["limit_constant"] = "vol(S^{n-1}), times eps^n for the reeb variant"
    elif isinstance(m, models.CircleBundleModel):
        notes["limit_constant"] = "leading Hilbert coefficient (Euler-Maclaurin)"
    return notes


def _default_points(cfg: ExperimentConfig) -> list[PointX]:
    if cfg.points:
        return list(cfg.points)
    return halton_points(cfg.model.n, cfg.model.eps, 1, cfg.seed)


def _emb_cfg(cfg: ExperimentConfig, scaling: str | None = None) -> embedding.EmbeddingConfig:
    return embedding.EmbeddingConfig(scaling or cfg.scaling, cfg.model.variant)


def _fit_or_none(series, sign=1.0):
    try:
        f = asymfit.fit_power(series)
    except ToeplabError:
        return None
    d = f.as_dict()
    d["exponent"] = sign * d["exponent"]
    return d


def _exp_spectrum(cfg, raw):
    lam, mult = cfg.model.spectrum_arrays(float(raw["lambda_max"]))
    if "csv" in cfg.output:
        io.write_csv(cfg.output["csv"], ["lambda", "multiplicity"], zip(lam, mult))
    return {"entries": [[float(a), int(b)] for a, b in zip(lam, mult)]}, {
        "count": int(mult.sum()), "distinct": int(lam.size),
        "lambda_min": float(lam[0]) if lam.size else None,
    }


def _exp_measure(cfg, raw):
    reps = [spectral.mu_pairing(cfg.model, cfg.chi, k) for k in cfg.ks]
    rep = {
        "model": cfg.model.describe(),
        "params": {"ks": list(cfg.ks), "d": cfg.model.cr_dimension},
        "chi": {"delta1": cfg.chi.delta1, "delta2": cfg.chi.delta2, "profile": cfg.chi.profile},
        "entries": [r.as_dict() for r in reps],
    }
    if "csv" in cfg.output:
        io.write_csv(cfg.output["csv"], ["k", "value"], [(r.k, r.pairing) for r in reps])
    return rep, {"limit": reps[-1].limit, "final_pairing": reps[-1].pairing,
                 "final_rel_error": reps[-1].rel_error}


def _exp_trace(cfg, raw):
    rows = []
    for k in cfg.ks:
        row = {"k": k, "trace": spectral.trace_chi(cfg.model, cfg.chi, k)}
        if isinstance(cfg.model, TorusGrauertTube) and cfg.model.n in models.SUPPORTED_SPHERE_N:
            tc = kernels.trace_consistency(cfg.model, cfg.chi, k)
            row["quadrature"] = tc["quadrature"]
            row["relative_residual"] = tc["relative"]
        rows.append(row)
    if "csv" in cfg.output:
        io.write_csv(cfg.output["csv"], ["k", "value"], [(r["k"], r["trace"]) for r in rows])
    summary = {"final_trace": rows[-1]["trace"]}
    if "relative_residual" in rows[-1]:
        summary["max_relative_residual"] = max(r["relative_residual"] for r in rows)
    return {"entries": rows}, summary


def _exp_weyl(cfg, raw):
    series = spectral.weyl_scan(cfg.model, cfg.ks)
    if "csv" in cfg.output:
        io.write_csv(cfg.output["csv"], ["k", "value"], series)
    fit = _fit_or_none(series)
    summary = {"final_count": series[-1][1]}
    if fit:
        summary.update({"exponent": fit["exponent"], "coefficient": fit["coefficient"]})
    return {"series": series, "fit": fit}, summary


def _exp_kernel_diag(cfg, raw):
    p = _default_points(cfg)[0]
    raw_series = kernels.weighted_diag_series(cfg.model, cfg.chi, p, 0, cfg.ks)
    rescaled = kernels.diag_series(cfg.model, cfg.chi, p, cfg.ks)
    if "csv" in cfg.output:
        io.write_csv(cfg.output["csv"], ["k", "value"], rescaled)
    fit = _fit_or_none(raw_series)
    summary = {"final_rescaled": rescaled[-1][1]}
    if fit:
        summary["exponent"] = fit["exponent"]
    return {"point": p.as_dict(), "raw": raw_series, "rescaled": rescaled, "fit": fit}, summary


def _exp_kernel_offdiag(cfg, raw):
    pts = _default_points(cfg) if cfg.points else halton_points(cfg.model.n, cfg.model.eps, 2, cfg.seed)
    if len(pts) < 2:
        raise ValidationError("kernel-offdiag needs two points", "points")
    p, q = pts[0], pts[1]
    probe = kernels.kernel_probe(cfg.model, cfg.chi, p, q, cfg.ks)
    logs = kernels.offdiag_log_series(cfg.model, cfg.chi, p, q, cfg.ks)
    probe["log_normalized"] = [v for _, v in logs]
    if "csv" in cfg.output:
        io.write_csv(cfg.output["csv"], ["k", "value"], zip(cfg.ks, probe["normalized"]))
    fit = _fit_or_none(list(zip(cfg.ks, probe["normalized"])), -1.0)
    summary = {"final_normalized": probe["normalized"][-1], "final_log_normalized": logs[-1][1]}
    if fit:
        summary["decay_exponent"] = fit["exponent"]
    return probe, summary


def _exp_embed_pullback(cfg, raw):
    p = _default_points(cfg)[0]
    ecfg = _emb_cfg(cfg)
    rows = []
    for k in cfg.ks:
        f = embedding.frame_for(cfg.model, cfg.chi, k, ecfg)
        probe = embedding.embed_probe(f, ecfg, p)
        probe["deviation"] = embedding.pullback_deviation(f, ecfg, p)
        rows.append(probe)
    series = [(r["k"], r["deviation"]["deviation"]) for r in rows]
    if "csv" in cfg.output:
        io.write_csv(cfg.output["csv"], ["k", "value"], series)
    fit = _fit_or_none(series, -1.0)
    zero = all(all(b == 0.0 for b in r["deviation"]["sphere"]) for r in rows)
    summary = {"final_deviation": series[-1][1], "sphere_components_zero": 1.0 if zero else 0.0}
    if fit:
        summary["decay_exponent"] = fit["exponent"]
        summary["r_squared"] = fit["r_squared"]
    return {"probes": rows, "fit": fit}, summary


def _exp_embed_equivariance(cfg, raw):
    if cfg.model.variant != "reeb":
        raise ValidationError("equivariance needs the reeb variant", "model.operator_variant")
    p = _default_points(cfg)[0]
    rows = embedding.equivariance_series(cfg.model, cfg.chi, p, cfg.ks, _emb_cfg(cfg, "rescaled"))
    cp = embedding.moment_constant(cfg.model, cfg.chi)
    fits = {
        "a": _fit_or_none([(r["k"], r["a_dev"]) for r in rows], -1.0),
        "b": _fit_or_none([(r["k"], r["b_dev"]) for r in rows], -1.0),
        "c": _fit_or_none([(r["k"], r["c"]) for r in rows], -1.0),
    }
    summary = {"C_prime": cp, "final_c": rows[-1]["c"]}
    for key, f in fits.items():
        if f:
            summary[f"{key}_decay_exponent"] = f["exponent"]
    return {"point": p.as_dict(), "rows": rows, "C_prime": cp,
            "C_prime_shifted_index": embedding.moment_constant(cfg.model, cfg.chi, 1), "fits": fits}, summary


def _exp_embed_inject(cfg, raw):
    samples = list(cfg.points) if cfg.points else halton_points(cfg.model.n, cfg.model.eps, cfg.samples, cfg.seed)
    ecfg = _emb_cfg(cfg)
    rows = []
    for k in cfg.ks:
        f = embedding.frame_for(cfg.model, cfg.chi, k, ecfg)
        corr, pair = embedding.injectivity_scan(f, ecfg, samples)
        rows.append({"k": k, "max_correlation": float(corr), "pair": list(pair)})
    return {"samples": len(samples), "rows": rows}, {"final_max_correlation": rows[-1]["max_correlation"]}


def _exp_sphere_defect(cfg, raw):
    samples = list(cfg.points) if cfg.points else halton_points(cfg.model.n, cfg.model.eps, cfg.samples, cfg.seed)
    ecfg = _emb_cfg(cfg, "sphere-normalized")
    rows = []
    for k in cfg.ks:
        f = embedding.frame_for(cfg.model, cfg.chi, k, ecfg)
        sup, c1 = embedding.sphere_defect(f, ecfg, samples)
        rows.append({"k": k, "sup_defect": sup, "sup_sphere_gradient": max(r["sphere_grad"] for r in c1)})
    series = [(r["k"], r["sup_defect"]) for r in rows]
    if "csv" in cfg.output:
        io.write_csv(cfg.output["csv"], ["k", "value"], series)
    fit = _fit_or_none(series, -1.0)
    summary = {"final_sup_defect": series[-1][1]}
    if fit:
        summary["decay_exponent"] = fit["exponent"]
        summary["r_squared"] = fit["r_squared"]
    return {"rows": rows, "fit": fit}, summary


def _exp_fit(cfg, raw):
    series = io.read_series_csv(raw["input"])
    fit = asymfit.fit_power(series)
    out = {"fit": fit.as_dict()}
    summary = {"exponent": fit.exponent, "coefficient": fit.coefficient, "r_squared": fit.r_squared}
    if "order" in raw:
        out["richardson"] = asymfit.richardson(series, float(raw["order"]))
        summary["richardson"] = out["richardson"]
    return out, summary


def _acceptance_settings(raw: dict) -> acceptance.Settings:
    a = raw.get("acceptance", {})
    kw = {}
    chi = raw.get("chi")
    if chi:
        kw.update(delta1=float(chi["delta1"]), delta2=float(chi["delta2"]), profile=chi.get("profile", "exp"))
    for key in ("eps", "n3_measure_k", "injectivity_k"):
        if key in a:
            kw[key] = float(a[key])
    for key in ("ladder", "trace_ks", "circle_ks"):
        if key in a:
            kw[key] = tuple(a[key])
    if "defect_samples" in a:
        kw["defect_samples"] = int(a["defect_samples"])
    if "seed" in raw:
        kw["seed"] = int(raw["seed"])
    if "samples" in raw:
        kw["samples"] = int(raw["samples"])
    if "budget_mb" in raw:
        kw["budget_bytes"] = float(raw["budget_mb"]) * 2**20
    return acceptance.Settings(**kw)


def _exp_report_all(cfg, raw, echo=None):
    ids = [int(i) for i in raw.get("acceptance", {}).get("criteria", range(1, 16))]
    results = acceptance.run(ids, _acceptance_settings(raw), echo=echo)
    crit = [r.as_dict() for r in results]
    summary = {"criteria_run": len(results), "criteria_passed": sum(r.passed for r in results)}
    return {"criteria": crit}, summary, all(r.passed for r in results)


EXPERIMENT_RUNNERS = {
    "spectrum": _exp_spectrum,
    "measure": _exp_measure,
    "trace": _exp_trace,
    "weyl": _exp_weyl,
    "kernel-diag": _exp_kernel_diag,
    "kernel-offdiag": _exp_kernel_offdiag,
    "embed-pullback": _exp_embed_pullback,
    "embed-equivariance": _exp_embed_equivariance,
    "embed-inject": _exp_embed_inject,
    "sphere-defect": _exp_sphere_defect,
    "fit": _exp_fit,
}


def run(cfg: ExperimentConfig, echo=None) -> tuple[dict, int]:
    """Run one experiment; returns the report and the exit status."""
    raw = cfg.raw
    if cfg.experiment == "report-all":
        results, summary, all_ok = _exp_report_all(cfg, raw, echo)
        check_rows = []
    else:
        results, summary = EXPERIMENT_RUNNERS[cfg.experiment](cfg, raw)
        check_rows = [c.evaluate(summary) for c in cfg.checks]
        all_ok = all(c["passed"] for c in check_rows)
    report = {
        "version": __version__,
        "experiment": cfg.experiment,
        "config": raw,
        "model": cfg.model.describe() if cfg.model is not None else None,
        "provenance": _provenance(cfg),
        "results": results,
        "summary": summary,
        "checks": check_rows,
        "passed": all_ok,
    }
    if "report" in cfg.output:
        io.write_json(cfg.output["report"], report)
    return report, 0 if all_ok else EXIT_ACCEPTANCE


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ValidationError.exit_code, f"{self.prog}: error: {message}\n")


def _load_raw(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file {path} not found", "config") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc}", "config") from None


def _model_from_flags(args) -> dict | None:
    if getattr(args, "model", None) is None:
        return None
    if args.model == "torus":
        return {"kind": "torus", "n": args.n, "eps": args.eps, "operator_variant": args.variant}
    return {"kind": "circle_bundle", "preset": {"cp1": "CP1", "cp2": "CP2"}[args.model]}


def _add_model_flags(p):
    p.add_argument("--model", choices=["torus", "cp1", "cp2"])
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--variant", choices=["grauert", "reeb"], default="grauert")


def _add_common(p, with_model=True):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. chi.delta2=3")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--csv", help="series/table CSV path")
    if with_model:
        _add_model_flags(p)
        p.add_argument("--delta1", type=float)
        p.add_argument("--delta2", type=float)
        p.add_argument("--ks", help="comma-separated k ladder")
        p.add_argument("--seed", type=int)


def _compose(args, experiment: str) -> ExperimentConfig:
    raw = _load_raw(args.config)
    raw.setdefault("schema_version", 1)
    raw["experiment"] = experiment if experiment != "from-config" else raw.get("experiment")
    m = _model_from_flags(args)
    if m is not None:
        raw["model"] = m
    if getattr(args, "delta1", None) is not None or getattr(args, "delta2", None) is not None:
        chi = dict(raw.get("chi", {"delta1": 1.0, "delta2": 2.0}))
        if args.delta1 is not None:
            chi["delta1"] = args.delta1
        if args.delta2 is not None:
            chi["delta2"] = args.delta2
        raw["chi"] = chi
    if getattr(args, "ks", None):
        try:
            raw["ks"] = [float(v) for v in args.ks.split(",")]
        except ValueError:
            raise ValidationError(f"not a comma-separated list of numbers: {args.ks!r}", "ks") from None
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    out = dict(raw.get("output", {}))
    if args.out:
        out["report"] = args.out
    if getattr(args, "csv", None):
        out["csv"] = args.csv
    if out:
        raw["output"] = out
    for s in args.set:
        raw = apply_override(raw, s)
    return validate(raw)


def _cmd_specfun(args) -> int:
    fn = args.fn
    if fn == "gamma":
        v = specfun.gamma(args.n, args.t)
    elif fn == "log_gamma":
        v = specfun.log_gamma(args.n, args.t)
    elif fn == "gamma_ratio":
        v = specfun.gamma_ratio(args.n, args.t)
    elif fn == "gamma_prime":
        v = specfun.gamma_prime(args.n, args.t)
    elif fn == "bessel_i":
        v = specfun.bessel_i(args.nu, args.t)
    else:
        v = specfun.sphere_volume(args.j)
    print(io.dumps({"fn": fn, "n": args.n, "nu": args.nu, "j": args.j, "t": args.t, "value": v}), end="")
    return 0


def _cmd_spectrum(args) -> int:
    raw = _load_raw(args.config)
    raw.setdefault("schema_version", 1)
    raw["experiment"] = "spectrum"
    m = _model_from_flags(args)
    if m is not None:
        raw["model"] = m
    if args.lambda_max is not None:
        raw["lambda_max"] = args.lambda_max
    out = dict(raw.get("output", {}))
    if args.out:
        out["csv"] = args.out
    if args.report:
        out["report"] = args.report
    if out:
        raw["output"] = out
    for s in args.set:
        raw = apply_override(raw, s)
    cfg = validate(raw)
    if args.shells:
        if not isinstance(cfg.model, TorusGrauertTube):
            raise ValidationError("shell export needs a torus model", "model.kind")
        rho = cfg.model.norm_for_eigenvalue(raw["lambda_max"])
        target = cfg.output.get("csv") or "shells.csv"
        models.write_shell_csv(target, cfg.model, rho)
        return 0
    report, code = run(cfg)
    if "csv" not in cfg.output and "report" not in cfg.output:
        print(io.dumps(report), end="")
    return code


def _cmd_fit(args) -> int:
    raw = {"schema_version": 1, "experiment": "fit", "input": args.input}
    if args.order is not None:
        raw["order"] = args.order
    if args.out:
        raw["output"] = {"report": args.out}
    cfg = validate(raw)
    report, code = run(cfg)
    print(io.dumps(report["results"]["fit"]), end="")
    return code


def _cmd_generic(args, experiment) -> int:
    cfg = _compose(args, experiment)
    report, code = run(cfg, echo=lambda s: print(s, file=sys.stderr))
    if "report" not in cfg.output:
        print(io.dumps(report), end="")
    else:
        print(io.dumps({"summary": report["summary"], "passed": report["passed"]}), end="")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toeplab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"toeplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("specfun-eval", help="evaluate one special function")
    p.add_argument("--fn", required=True,
                   choices=["gamma", "log_gamma", "gamma_ratio", "gamma_prime", "bessel_i", "sphere_volume"])
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--nu", type=int, default=0)
    p.add_argument("--j", type=int, default=0)

    p = sub.add_parser("spectrum", help="eigenvalues with multiplicities up to a cutoff")
    _add_model_flags(p)
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--lambda-max", type=float, dest="lambda_max")
    p.add_argument("--out", help="CSV path (lambda,multiplicity)")
    p.add_argument("--report", help="report JSON path")
    p.add_argument("--shells", action="store_true", help="export norm_sq,count,lambda instead")

    for name, help_ in (("measure", "scaled spectral measure pairings"),
                        ("trace", "traces of chi(T/k)"),
                        ("weyl", "counting function series")):
        _add_common(sub.add_parser(name, help=help_))

    p = sub.add_parser("kernel", help="kernel diagonal or off-diagonal probes")
    _add_common(p)
    p.add_argument("--mode", choices=["diag", "offdiag"], default="diag")

    p = sub.add_parser("embed", help="embedding-map probes")
    _add_common(p)
    p.add_argument("--mode", choices=["pullback", "equivariance", "inject", "sphere-defect"], default="pullback")

    p = sub.add_parser("fit", help="power-law fit of a k,value CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--order", type=float, help="also extrapolate assuming this convergence order")
    p.add_argument("--out")

    p = sub.add_parser("run", help="run the experiment named in a config file")
    _add_common(p, with_model=False)

    p = sub.add_parser("report-all", help="run the acceptance suite")
    _add_common(p, with_model=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "specfun-eval":
            return _cmd_specfun(args)
        if args.command == "spectrum":
            return _cmd_spectrum(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "kernel":
            return _cmd_generic(args, f"kernel-{args.mode}")
        if args.command == "embed":
            kind = {"pullback": "embed-pullback", "equivariance": "embed-equivariance",
                    "inject": "embed-inject", "sphere-defect": "sphere-defect"}[args.mode]
            return _cmd_generic(args, kind)
        if args.command == "run":
            return _cmd_generic(args, "from-config")
        return _cmd_generic(args, args.command)
    except ToeplabError as exc:
        print(f"toeplab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        print("toeplab: out of memory; lower the k ladder or raise budget_mb", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
