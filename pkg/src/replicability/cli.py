"""Command-line entry point: emits every table and figure dataset as CSV or JSON."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import shlex
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, discrim, hetero, ml4, posterior2d, seqmodels
from .discrim import HDI_TIE_RULE

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

FIG1_RHOS = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25)
FIG1_MS = (5, 50, 500)
FIG2_RHOS = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25)
FIG2_MARKERS = (100, 274)
FIG4_RHOS = (0.05, 0.15, 0.25)
FIG4_MU_TRUE = (0.2, 0.4, 0.6, 0.8)
FIG5_MUS = (0.148, 0.565, 0.852)
ALL_GROUPS = ("ml4", "ml4+ref", "aa", "ih", "aa+ref", "ih+ref")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors become single-line validation failures."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> List[float]:
    try:
        out = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if not out:
        raise UsageError("list must not be empty")
    return out


def _ints(text: str) -> List[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise UsageError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _linspace_grid(n: int) -> List[float]:
    if n < 2:
        raise UsageError("grid size must be >= 2")
    return [round(v, 12) for v in np.linspace(0.0, 1.0, n)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    return v


def render(rows: List[dict], meta: Dict[str, object], fmt: str) -> str:
    if fmt == "json":
        payload = {"meta": meta, "rows": [{k: _jsonable(v) for k, v in r.items()} for r in rows]}
        return json.dumps(payload, indent=1) + "\n"
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0].keys())
        writer.writerow(cols)
        for r in rows:
            writer.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


# ---------------------------------------------------------------- commands

def cmd_figure1(args) -> tuple:
    rhos = _floats(args.rho) if args.rho is not None else list(FIG1_RHOS)
    ms = _ints(args.m) if args.m is not None else list(FIG1_MS)
    mus = _linspace_grid(args.grid_mu)
    rows = []
    for rho in rhos:
        for r in discrim.hdi_grid(mus, rho, ms, args.level):
            r["panel"] = hetero.panel_label(rho)
            rows.append(r)
    return rows, {"hdi_tie_rule": HDI_TIE_RULE, "mu_points": len(mus)}


def cmd_figure5(args) -> tuple:
    rho = _floats(args.rho)[0] if args.rho is not None else 0.175
    m_obs = args.m_obs
    ms = _ints(args.m) if args.m is not None else list(range(1, 501))
    mus = _floats(args.mu) if args.mu is not None else list(FIG5_MUS)
    rows = []
    for r in discrim.hdi_grid(mus, rho, ms, args.level):
        r["kind"] = "band"
        rows.append(r)
    pair = discrim.minimal_separable_pair(m_obs, rho, args.level)
    extra = {"hdi_tie_rule": HDI_TIE_RULE, "rho": rho, "m_obs": m_obs,
             "pair_search": "scan 0.5 + j*0.001 upward"}
    if pair is None:
        extra["minimal_separable_pair"] = "none"
    else:
        extra["minimal_separable_pair"] = (
            f"{pair.mu_low:g},{pair.mu_high:g} hdi_low=[{pair.hdi_low.lower:.6g},{pair.hdi_low.upper:.6g}] "
            f"hdi_high=[{pair.hdi_high.lower:.6g},{pair.hdi_high.upper:.6g}] gap={pair.gap:.6g}")
    return rows, extra


def cmd_effective_size(args) -> tuple:
    rhos = _floats(args.rho) if args.rho is not None else list(FIG2_RHOS)
    ms = _ints(args.m) if args.m is not None else sorted(set(range(1, 301)) | set(FIG2_MARKERS))
    rows = []
    for rho in rhos:
        for m in ms:
            me = seqmodels.effective_sample_size(m, rho)
            rows.append({"m": m, "rho": rho, "m_e": me, "m_e_rounded": int(round(me)),
                         "asymptote": (1.0 / rho) if rho > 0 else None})
    return rows, {}


def _prior(args, allowed=("uniform", "jeffreys")) -> posterior2d.PriorSpec:
    spec = posterior2d.PriorSpec.parse(args.prior or "uniform")
    if spec.kind not in allowed and spec.kind != "fixed_rho":
        raise UsageError(f"prior {args.prior!r} not valid here")
    return spec


def cmd_overlap(args) -> tuple:
    spec = _prior(args)
    mus = _floats(args.mu) if args.mu is not None else list(posterior2d.OVERLAP_MU_VALUES)
    mu_nodes = posterior2d.default_nodes(args.grid_mu)
    rho_nodes = posterior2d.default_nodes(args.grid_rho)
    mat = posterior2d.overlap_matrix(mus, args.m_obs, spec, mu_nodes, rho_nodes)
    rows = [{"mu_i": mus[i], "mu_j": mus[j], "x_i": int(round(args.m_obs * mus[i])),
             "x_j": int(round(args.m_obs * mus[j])), "overlap": float(mat[i, j])}
            for i in range(len(mus)) for j in range(len(mus))]
    return rows, {"prior": spec.label(), "m": args.m_obs,
                  "mu_grid_reading": posterior2d.OVERLAP_MU_READING,
                  "grid": f"{args.grid_mu}x{args.grid_rho} cell midpoints",
                  "jeffreys_fd_step": posterior2d.JEFFREYS_FD_STEP}


def cmd_conditional(args) -> tuple:
    rhos = _floats(args.rho) if args.rho is not None else list(FIG4_RHOS)
    mus_true = _floats(args.mu) if args.mu is not None else list(FIG4_MU_TRUE)
    nodes = posterior2d.default_nodes(args.grid_mu)
    rows = []
    for rho in rhos:
        for mt in mus_true:
            x = int(round(args.m_obs * mt))
            dens = posterior2d.conditional_density(x, args.m_obs, rho, nodes)
            for mu, d in zip(nodes, dens):
                rows.append({"rho": rho, "mu_true": mt, "x": x, "mu": float(mu), "density": float(d)})
    return rows, {"m": args.m_obs, "prior_mu": "uniform", "grid": f"{args.grid_mu} cell midpoints"}


def cmd_example1(args) -> tuple:
    thetas = _floats(args.theta) if args.theta is not None else list(hetero.TABLE1_THETAS)
    sigmas = _floats(args.sigma) if args.sigma is not None else list(hetero.TABLE1_SIGMAS)
    rows = hetero.ex1_table(thetas, sigmas, args.se)
    return rows, {"panel_rule": hetero.PANEL_RULE}


def cmd_example2(args) -> tuple:
    biases = _floats(args.bias) if args.bias is not None else list(hetero.TABLE2_BIASES)
    noises = _floats(args.noise) if args.noise is not None else list(hetero.TABLE2_NOISES)
    n = None if args.n == 0 else args.n
    rows = hetero.ex2_table(args.u, biases, noises, n, args.critical)
    meta = {"panel_rule": hetero.PANEL_RULE,
            "quadrature": f"composite Gauss-Legendre order {hetero.GL_ORDER}, "
                          f"{hetero.DEFAULT_PANELS} panels on [-{hetero.Z_SPAN:g}, {hetero.Z_SPAN:g}], "
                          f"doubling check {hetero.CONVERGENCE_TOL:g}",
            "undefined_rho": f"min(mu, 1-mu) < {hetero.DEGENERATE_MU_TOL:g}"}
    if n is not None:
        s = hetero.DeliveryScenario(args.u, 0.0, 0.0, n=n, critical=args.critical)
        meta["critical_count"] = s.critical_count
        meta["alpha"] = format(s.test_size, ".17g")
    return rows, meta


def cmd_ml4(args) -> tuple:
    prior_names = ["jeffreys", "weak"] if args.prior in (None, "all") else [args.prior]
    for p in prior_names:
        if p not in ml4.PRIORS:
            raise UsageError(f"ml4 prior must be jeffreys, weak or all, got {p!r}")
    groups = list(ALL_GROUPS) if args.groups in (None, "all") else [args.groups]
    meta = {"draws_per_group": args.draws, "block_size": ml4.BLOCK_SIZE,
            "generator": "PCG64 via SeedSequence([seed, stream]) blocks",
            "rho_variance_divisor": "m", "reference_se": "se_hedges(g=J*1.34, 12, 11)"}
    rows = []
    results = {}
    if args.summary:
        table = ml4.load_summary(args.summary)
        meta["input"] = f"summary {args.summary}"
        for group in groups:
            if group not in table:
                raise UsageError(f"group {group!r} not in summary file")
            stats, se = table[group]
            for p in prior_names:
                r = ml4.analyze([], [se] * stats.m, p, group, args.draws, args.seed,
                                args.level, stats=stats)
                rows.append(r.summary)
    else:
        path = args.input or ml4.bundled_path("ml4_synthetic_sites.csv")
        if not args.input:
            meta["input"] = "bundled SYNTHETIC site data (not the real sites)"
        else:
            meta["input"] = f"records {path}"
        records = ml4.load_records(path)
        for group in groups:
            for p in prior_names:
                r = ml4.analyze_records(records, group, p, args.draws, args.seed, args.level)
                results[(group, p)] = r
                rows.append(r.summary)
        for p in prior_names:
            if ("aa", p) in results and ("ih", p) in results:
                c = ml4.group_contrast(results[("aa", p)].draws, results[("ih", p)].draws, args.level)
                meta[f"contrast_ih_minus_aa_{p}"] = (
                    f"mean={c.mean_diff:.6g} hdi=[{c.hdi.lower:.6g},{c.hdi.upper:.6g}] "
                    f"P(ih>aa)={c.exceedance:.6g}")
    return rows, meta


COMMANDS = {
    "figure1": cmd_figure1, "figure5": cmd_figure5, "effective-size": cmd_effective_size,
    "overlap": cmd_overlap, "conditional": cmd_conditional, "example1": cmd_example1,
    "example2": cmd_example2, "ml4": cmd_ml4,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=ml4.DEFAULT_SEED)
    common.add_argument("--level", type=float, default=0.95)
    common.add_argument("--grid-mu", type=int, default=None)
    common.add_argument("--grid-rho", type=int, default=posterior2d.DEFAULT_GRID_SIZE)
    common.add_argument("--draws", type=int, default=ml4.DEFAULT_DRAWS)
    common.add_argument("--prior", default=None,
                        help="uniform | jeffreys | weak | fixed:<rho> (ml4 also accepts all)")
    common.add_argument("--groups", default=None, choices=("all",) + ALL_GROUPS)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="replicability", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("figure1", parents=[common], help="HDI grid of X/m versus mu")
    s.add_argument("--rho", help="comma list (default 0,.05,...,.25)")
    s.add_argument("--m", help="comma list (default 5,50,500)")

    s = sub.add_parser("figure5", parents=[common], help="HDI bands versus m and minimal separable pair")
    s.add_argument("--rho", help="single value (default 0.175)")
    s.add_argument("--m", help="comma list of m for the bands (default 1..500)")
    s.add_argument("--m-obs", type=int, default=17)
    s.add_argument("--mu", help="comma list of band centres")

    s = sub.add_parser("effective-size", parents=[common], help="m_e curves")
    s.add_argument("--rho")
    s.add_argument("--m")

    s = sub.add_parser("overlap", parents=[common], help="pairwise posterior overlap of mu")
    s.add_argument("--m-obs", type=int, default=100)
    s.add_argument("--mu", help="comma list of mu values")

    s = sub.add_parser("conditional", parents=[common], help="posterior of mu at fixed rho")
    s.add_argument("--m-obs", type=int, default=100)
    s.add_argument("--rho")
    s.add_argument("--mu", help="comma list of true mu values")

    s = sub.add_parser("example1", parents=[common], help="population heterogeneity table")
    s.add_argument("--theta")
    s.add_argument("--sigma")
    s.add_argument("--se", type=float, default=1.0)

    s = sub.add_parser("example2", parents=[common], help="delivery heterogeneity table")
    s.add_argument("--u", type=float, default=1.0)
    s.add_argument("--bias")
    s.add_argument("--noise")
    s.add_argument("--n", type=int, default=100, help="0 for large-n rows only")
    s.add_argument("--critical", type=float, default=0.59)

    s = sub.add_parser("ml4", parents=[common], help="effect-size reanalysis pipeline")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--input", help="site records CSV (site_id,g,n1,n2,protocol)")
    src.add_argument("--summary", help="sufficient statistics CSV (group,m,mean_g,sd_g[,se])")
    return p


_GRID_MU_DEFAULTS = {"figure1": 101, "figure5": 101, "overlap": posterior2d.DEFAULT_GRID_SIZE,
                     "conditional": 1000}


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _fail("validation", exc)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.grid_mu is None:
        args.grid_mu = _GRID_MU_DEFAULTS.get(args.command, 101)
    try:
        if not 0.0 < args.level < 1.0:
            raise UsageError("--level must lie in (0, 1)")
        if args.draws < 1000:
            raise UsageError("--draws must be >= 1000")
        rows, extra = COMMANDS[args.command](args)
        meta = {"tool": f"replicability {__version__}",
                "command": "replicability " + " ".join(shlex.quote(a) for a in argv),
                "seed": args.seed, "level": args.level}
        meta.update(extra)
        text = render(rows, meta, args.format)
        if args.out:
            try:
                Path(args.out).write_text(text)
            except OSError as exc:
                raise OSError(f"cannot write {args.out}: {exc.strerror or exc}") from None
        else:
            sys.stdout.write(text)
    except hetero.ConvergenceError as exc:
        _fail("numeric", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        _fail("io", exc)
        return EXIT_IO
    except ValueError as exc:
        _fail("validation", exc)
        return EXIT_VALIDATION
    return 0


def _fail(code: str, exc: Exception) -> None:
    msg = " ".join(str(exc).split())
    print(f"error: code={code} message={msg}", file=sys.stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
