"""Command-line orchestration.

Subcommands: rmt-sample, graph-solve, decimate, stats, theory-curve,
fit-phi, figure. Every run writes into one output directory containing
manifest.json (fully resolved parameters; the only place a timestamp
appears), inputs/ (copies of the consumed files) and curves/ (CSV outputs).
Identical resolved parameters and seed give byte-identical curve files.

Parameter resolution, highest priority first: command-line flags, the
SPECTRAL_SEED / SPECTRAL_OUT environment variables, the --config JSON file,
built-in defaults.

Exit codes: 0 success, 2 validation error, 3 numeric/fit failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, io, qgraph, rmt, spectra, theory
from .errors import EstimationFailure, FitFailure, NumericError

log = logging.getLogger("specstats")

_DEFAULTS = {
    "seed": 12345,
    "out": "specstats-run",
    "threads": 1,
    "phis": "1,0.95,0.85,0.7",
}


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def _load_config(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def _resolve(args, cfg, key, env=None, cast=str):
    """flags > environment > config file > builtin default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is None and env is not None:
        value = os.environ.get(env)
    if value is None:
        value = cfg.get(key)
    if value is None:
        value = _DEFAULTS.get(key)
    return None if value is None else cast(value)


def _parse_phis(text):
    phis = [float(p) for p in str(text).split(",") if p.strip()]
    if not phis or any(not 0 < p <= 1 for p in phis):
        raise ValueError(f"invalid phi list {text!r}")
    return phis


def _phi_tag(phi):
    return ("%g" % phi)


class _Run:
    """Output directory with manifest/inputs/curves structure."""

    def __init__(self, out_dir, command, params, workers):
        self.dir = Path(out_dir)
        self.curves = self.dir / "curves"
        self.inputs = self.dir / "inputs"
        self.curves.mkdir(parents=True, exist_ok=True)
        self.inputs.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "tool": "specstats",
            "version": __version__,
            "command": command,
            "parameters": params,
            "workers": workers,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }

    def consume(self, path):
        """Copy an input file into inputs/ for provenance."""
        dest = self.inputs / Path(path).name
        if Path(path).resolve() != dest.resolve():
            shutil.copyfile(path, dest)
        return path

    def curve_path(self, name):
        return self.curves / name

    def finish(self, extra=None):
        self.manifest.update(extra or {})
        with open(self.dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(self.manifest, fh, indent=2, default=str)
            fh.write("\n")
        return 0


def _pool_map(threads):
    if threads and threads > 1:
        pool = ThreadPoolExecutor(max_workers=threads)
        return lambda fn, it: list(pool.map(fn, it)), pool
    return lambda fn, it: list(map(fn, it)), None


def _load_ensemble(paths, run):
    members = []
    for p in paths:
        run.consume(p)
        seq, _ = io.read_levels(p)
        members.append(seq)
    return spectra.SpectralEnsemble(tuple(members))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_rmt_sample(args, cfg):
    seed = _resolve(args, cfg, "seed", env="SPECTRAL_SEED", cast=int)
    out = _resolve(args, cfg, "out", env="SPECTRAL_OUT")
    threads = _resolve(args, cfg, "threads", cast=int)
    cls = theory.EnsembleClass.coerce(_resolve(args, cfg, "ensemble"))
    dim = _resolve(args, cfg, "dim", cast=int)
    count = _resolve(args, cfg, "count", cast=int)
    if dim is None or count is None:
        raise ValueError("rmt-sample needs --dim and --count")
    params = {"ensemble": cls.value, "dim": dim, "count": count, "seed": seed,
              "trim_fraction": rmt.TRIM_FRACTION}
    run = _Run(out, "rmt-sample", params, threads)
    spec = rmt.RandomMatrixSpec(cls, dim, count, seed)
    mapper, pool = _pool_map(threads)
    members = mapper(lambda m: rmt.sample_spectrum(spec, m), range(count))
    if pool:
        pool.shutdown()
    for m, seq in enumerate(members):
        io.write_levels(seq, run.curve_path(f"member_{m:04d}.csv"))
    return run.finish()


def _cmd_graph_solve(args, cfg):
    out = _resolve(args, cfg, "out", env="SPECTRAL_OUT")
    run = _Run(out, "graph-solve", {
        "graph": args.graph, "k_min": args.k_min, "k_max": args.k_max,
        "levels": args.levels, "dedup_kramers": args.dedup_kramers,
        "unfold": args.unfold}, 1)
    run.consume(args.graph)
    g = io.read_graph(args.graph)
    k_min = args.k_min
    k_max = args.k_max
    if k_max is None:
        if args.levels is None:
            raise ValueError("graph-solve needs --k-max or --levels")
        per_level = np.pi / g.total_length
        if args.dedup_kramers:
            per_level *= 2.0
        k_max = k_min + args.levels * per_level
    seq = qgraph.find_eigenvalues(g, k_min, k_max,
                                  dedup_kramers=args.dedup_kramers)
    meta = {"total_length": "%.17g" % g.total_length,
            "weyl_expected": int(round(g.weyl_count(k_min, k_max)))}
    io.write_levels(seq, run.curve_path("levels.csv"), extra_meta=meta)
    if args.unfold:
        eff = g.total_length / (2.0 if args.dedup_kramers else 1.0)
        unfolded = spectra.unfold_constant_density(seq, eff)
        io.write_levels(unfolded, run.curve_path("levels_unfolded.csv"),
                        extra_meta={"effective_length": "%.17g" % eff})
    return run.finish({"found": len(seq),
                       "weyl_expected": meta["weyl_expected"]})


def _cmd_decimate(args, cfg):
    seed = _resolve(args, cfg, "seed", env="SPECTRAL_SEED", cast=int)
    out = _resolve(args, cfg, "out", env="SPECTRAL_OUT")
    run = _Run(out, "decimate", {
        "inputs": list(args.inputs), "phi": args.phi, "seed": seed,
        "fixed_count": args.fixed_count,
        "remove_indices": args.remove_indices}, 1)
    remove = None
    if args.remove_indices:
        run.consume(args.remove_indices)
        remove = np.loadtxt(args.remove_indices, dtype=int, ndmin=1)
    for idx, path in enumerate(args.inputs):
        run.consume(path)
        seq, meta = io.read_levels(path)
        if remove is not None:
            thinned = spectra.decimate_systematic(seq, remove)
        else:
            if args.phi is None:
                raise ValueError("decimate needs --phi or --remove-indices")
            thinned = spectra.decimate(seq, args.phi, seed=[seed, idx],
                                       fixed_count=args.fixed_count)
        io.write_levels(thinned, run.curve_path(Path(path).name),
                        extra_meta=meta)
    return run.finish()


def _stat_curves(ens, measure, args):
    if measure == "pspacing":
        pdf, cdf = spectra.spacing_histogram(
            ens, order=args.order, bin_width=args.bin_width, s_max=args.s_max)
        return {"pspacing": pdf, "ispacing": cdf}
    if measure in ("sigma2", "delta3"):
        grid = np.arange(args.l_step, args.l_max + 1e-9, args.l_step)
        fn = (spectra.number_variance if measure == "sigma2"
              else spectra.spectral_rigidity)
        return {measure: fn(ens, grid)}
    if measure == "power":
        if args.truncate:
            ens = spectra.truncate_members(ens)
        return {"power": spectra.power_spectrum_estimator(
            ens, centered=args.centered)}
    raise ValueError(f"unknown measure {measure!r}")


def _cmd_stats(args, cfg):
    out = _resolve(args, cfg, "out", env="SPECTRAL_OUT")
    run = _Run(out, "stats", {
        "measure": args.measure, "inputs": list(args.inputs),
        "order": args.order, "bin_width": args.bin_width,
        "s_max": args.s_max, "l_max": args.l_max, "l_step": args.l_step,
        "truncate": args.truncate, "centered": args.centered}, 1)
    ens = _load_ensemble(args.inputs, run)
    for name, curve in _stat_curves(ens, args.measure, args).items():
        io.write_curve(curve, run.curve_path(f"{name}.csv"),
                       extra_meta={"members": len(ens)})
    return run.finish()


def _theory_curve(measure, cls, phi, grid, k_gauss=3, m_max=10):
    params = theory.default_missing_params(cls, phi, k_gauss=k_gauss,
                                           m_max=m_max)
    if measure == "pspacing":
        y = theory.p_missing(params, grid)
    elif measure == "sigma2":
        y = np.array([theory.sigma2_missing(cls, phi, x) for x in grid])
    elif measure == "delta3":
        y = np.array([theory.delta3_missing(cls, phi, x) for x in grid])
    elif measure == "power":
        y = np.array([theory.power_missing(cls, phi, x) for x in grid])
    elif measure == "y2":
        y = np.array([theory.cluster_y2(cls, x) for x in grid])
    elif measure == "form-b":
        y = np.array([theory.form_b(cls, x) for x in grid])
    else:
        raise ValueError(f"unknown measure {measure!r}")
    meta = {"measure": measure, "class": cls.value, "phi": "%g" % phi,
            "k_gauss": k_gauss, "m_max": m_max,
            "fit_provenance": "frozen dim-500 calibration" }
    return spectra.CurveWithErrors(grid, y, np.zeros_like(grid), meta=meta)


def _theory_grid(measure, args):
    if measure == "pspacing":
        return np.arange(0.0, args.s_max + 1e-9, args.grid_step or 0.02)
    if measure in ("sigma2", "delta3"):
        step = args.grid_step or args.l_step
        return np.arange(step, args.l_max + 1e-9, step)
    if measure == "power":
        step = args.grid_step or 0.005
        return np.arange(step, 0.5 + 1e-9, step)
    if measure in ("y2", "form-b"):
        step = args.grid_step or 0.02
        hi = 10.0 if measure == "y2" else 3.0
        grid = np.arange(0.0, hi + 1e-9, step)
        if measure == "form-b":
            grid = grid[np.abs(grid - 1.0) > 1e-9]
        return grid
    raise ValueError(f"unknown measure {measure!r}")


def _cmd_theory_curve(args, cfg):
    out = _resolve(args, cfg, "out", env="SPECTRAL_OUT")
    cls = theory.EnsembleClass.coerce(_resolve(args, cfg, "ensemble"))
    phis = _parse_phis(_resolve(args, cfg, "phis"))
    run = _Run(out, "theory-curve", {
        "measure": args.measure, "ensemble": cls.value, "phis": phis}, 1)
    for phi in phis:
        grid = _theory_grid(args.measure, args)
        curve = _theory_curve(args.measure, cls, phi, grid)
        io.write_curve(curve,
                       run.curve_path(f"theory_{args.measure}_{_phi_tag(phi)}.csv"))
    return run.finish()


def _cmd_fit_phi(args, cfg):
    out = _resolve(args, cfg, "out", env="SPECTRAL_OUT")
    cls = theory.EnsembleClass.coerce(_resolve(args, cfg, "ensemble"))
    run = _Run(out, "fit-phi", {
        "measure": args.measure, "ensemble": cls.value,
        "input": args.input}, 1)
    run.consume(args.input)
    curve = io.read_curve(args.input)
    phi_hat, se = theory.estimate_phi(curve, cls, args.measure)
    result = {"phi_hat": phi_hat, "std_error": se}
    with open(run.dir / "fit_phi.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    print(f"phi_hat = {phi_hat:.4f} +- {se:.4f}")
    return run.finish(result)


# ---------------------------------------------------------------------------
# figure bundles
# ---------------------------------------------------------------------------

def _sample_ensemble(cls, dim, count, seed, threads):
    spec = rmt.RandomMatrixSpec(cls, dim, count, seed)
    mapper, pool = _pool_map(threads)
    members = mapper(lambda m: rmt.sample_spectrum(spec, m), range(count))
    if pool:
        pool.shutdown()
    return spectra.SpectralEnsemble(tuple(members),
                                    label=f"{cls.value} dim={dim}")


def _decimated(ens, phi, seed_base, fixed_count=False):
    if phi == 1.0:
        return ens
    members = tuple(
        spectra.decimate(m, phi, seed=[seed_base, j], fixed_count=fixed_count)
        for j, m in enumerate(ens.members))
    return spectra.SpectralEnsemble(members, label=ens.label)


def _figure_fig2(run, cls, dim, count, seed, threads):
    ens = _sample_ensemble(cls, dim, count, seed, threads)
    fit_params = {}
    for order in (0, 1, 2):
        pdf, _ = spectra.spacing_histogram(ens, order=order, bin_width=0.05,
                                           s_max=order + 4.0)
        fit = rmt.fit_spacing_model(pdf, order)
        io.write_curve(pdf, run.curve_path(f"fig2_spacing{order}_data.csv"),
                       extra_meta={"class": cls.value})
        grid = np.arange(0.0, order + 4.0, 0.02)
        model = spectra.CurveWithErrors(grid, fit.density(grid),
                                        np.zeros_like(grid))
        io.write_curve(model, run.curve_path(f"fig2_spacing{order}_fit.csv"),
                       extra_meta={"class": cls.value,
                                   "gamma": "%.9g" % fit.gamma,
                                   "mu": "%.9g" % fit.mu,
                                   "chi": "%.9g" % fit.chi})
        fit_params[f"order{order}"] = {"gamma": fit.gamma, "mu": fit.mu,
                                       "chi": fit.chi,
                                       "residual": fit.residual}
    return fit_params


def _figure_fluct(run, tag, cls, dim, count, seed, threads, phis, l_max):
    ens = _sample_ensemble(cls, dim, count, seed, threads)
    grid = np.arange(0.25, l_max + 1e-9, 0.25)
    for i, phi in enumerate(phis):
        dens = _decimated(ens, phi, seed_base=seed + 1000 * (i + 1))
        suffix = _phi_tag(phi)
        pdf, cdf = spectra.spacing_histogram(dens)
        io.write_curve(pdf, run.curve_path(f"{tag}_pspacing_{suffix}.csv"))
        io.write_curve(cdf, run.curve_path(f"{tag}_ispacing_{suffix}.csv"))
        io.write_curve(spectra.number_variance(dens, grid),
                       run.curve_path(f"{tag}_sigma2_{suffix}.csv"))
        io.write_curve(spectra.spectral_rigidity(dens, grid),
                       run.curve_path(f"{tag}_delta3_{suffix}.csv"))
        for measure, mgrid in (("pspacing", np.arange(0.0, 5.0, 0.02)),
                               ("sigma2", grid), ("delta3", grid)):
            curve = _theory_curve(measure, cls, phi, mgrid)
            io.write_curve(curve,
                           run.curve_path(f"{tag}_{measure}-theory_{suffix}.csv"))


def _figure_fig5(run, cls, dim, count, seed, threads, phis):
    ens = _sample_ensemble(cls, dim, count, seed, threads)
    for i, phi in enumerate(phis):
        dens = _decimated(ens, phi, seed_base=seed + 1000 * (i + 1))
        if phi < 1.0:
            dens = spectra.truncate_members(dens)
        ps = spectra.power_spectrum_estimator(dens, centered=True)
        suffix = _phi_tag(phi)
        io.write_curve(ps, run.curve_path(f"fig5_power_{suffix}.csv"))
        grid = ps.x[ps.x <= 0.5]
        curve = _theory_curve("power", cls, phi, grid)
        io.write_curve(curve, run.curve_path(f"fig5_power-theory_{suffix}.csv"))


_FIGURE_DEFAULTS = {
    "fig2": {"ensemble": "GSE", "dim": 200, "count": 500},
    "fig3": {"ensemble": "GSE", "dim": 200, "count": 300},
    "fig4": {"ensemble": "GUE", "dim": 200, "count": 300},
    "fig5": {"ensemble": "GSE", "dim": 300, "count": 800},
}


def _cmd_figure(args, cfg):
    seed = _resolve(args, cfg, "seed", env="SPECTRAL_SEED", cast=int)
    out = _resolve(args, cfg, "out", env="SPECTRAL_OUT")
    threads = _resolve(args, cfg, "threads", cast=int)
    name = args.name
    if name not in _FIGURE_DEFAULTS:
        raise ValueError(f"unknown figure {name!r}; choose from "
                         f"{sorted(_FIGURE_DEFAULTS)}")
    defaults = _FIGURE_DEFAULTS[name]
    cls = theory.EnsembleClass.coerce(
        _resolve(args, cfg, "ensemble") or defaults["ensemble"])
    dim = _resolve(args, cfg, "dim", cast=int) or defaults["dim"]
    count = _resolve(args, cfg, "count", cast=int) or defaults["count"]
    phis = _parse_phis(_resolve(args, cfg, "phis"))
    params = {"figure": name, "ensemble": cls.value, "dim": dim,
              "count": count, "seed": seed, "phis": phis}
    run = _Run(out, f"figure {name}", params, threads)
    extra = {}
    if name == "fig2":
        extra["fits"] = _figure_fig2(run, cls, dim, count, seed, threads)
    elif name in ("fig3", "fig4"):
        _figure_fluct(run, name, cls, dim, count, seed, threads, phis,
                      l_max=3.0)
    else:
        _figure_fig5(run, cls, dim, count, seed, threads, phis)
    return run.finish(extra)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="specstats",
        description="Spectral fluctuation statistics of chaotic spectra "
                    "with missing levels")
    parser.add_argument("--config", help="JSON config file with defaults")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("--out", help="output run directory")
    parser.add_argument("--threads", type=int, help="parallel workers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rmt-sample", help="sample a random-matrix ensemble")
    p.add_argument("--ensemble", help="GUE or GSE")
    p.add_argument("--dim", type=int, help="distinct levels per matrix")
    p.add_argument("--count", type=int, help="number of members")
    p.set_defaults(fn=_cmd_rmt_sample)

    p = sub.add_parser("graph-solve", help="solve a quantum graph band")
    p.add_argument("--graph", required=True, help="GraphSpec JSON file")
    p.add_argument("--k-min", type=float, default=0.5)
    p.add_argument("--k-max", type=float)
    p.add_argument("--levels", type=int,
                   help="size the band by Weyl for this many levels")
    p.add_argument("--dedup-kramers", action="store_true")
    p.add_argument("--unfold", action="store_true",
                   help="also write the unfolded sequence")
    p.set_defaults(fn=_cmd_graph_solve)

    p = sub.add_parser("decimate", help="randomly thin level sequences")
    p.add_argument("--phi", type=float, help="observed fraction")
    p.add_argument("--fixed-count", action="store_true",
                   help="keep exactly round(phi*N) levels")
    p.add_argument("--remove-indices",
                   help="file of level indices for systematic removal")
    p.add_argument("inputs", nargs="+", help="level-sequence CSV files")
    p.set_defaults(fn=_cmd_decimate)

    p = sub.add_parser("stats", help="fluctuation statistics of an ensemble")
    p.add_argument("--measure", required=True,
                   choices=["pspacing", "sigma2", "delta3", "power"])
    p.add_argument("--order", type=int, default=0)
    p.add_argument("--bin-width", type=float, default=0.1)
    p.add_argument("--s-max", type=float, default=5.0)
    p.add_argument("--l-max", type=float, default=3.0)
    p.add_argument("--l-step", type=float, default=0.25)
    p.add_argument("--truncate", action="store_true",
                   help="truncate members to a common length (power)")
    p.add_argument("--centered", action="store_true",
                   help="center spacings per member (power)")
    p.add_argument("inputs", nargs="+", help="unfolded level CSV files")
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("theory-curve", help="analytic fluctuation curves")
    p.add_argument("--measure", required=True,
                   choices=["pspacing", "sigma2", "delta3", "power", "y2",
                            "form-b"])
    p.add_argument("--ensemble", help="GUE or GSE")
    p.add_argument("--phis", help="comma-separated observed fractions")
    p.add_argument("--s-max", type=float, default=5.0)
    p.add_argument("--l-max", type=float, default=3.0)
    p.add_argument("--l-step", type=float, default=0.05)
    p.add_argument("--grid-step", type=float)
    p.set_defaults(fn=_cmd_theory_curve)

    p = sub.add_parser("fit-phi", help="fit the observed fraction to a curve")
    p.add_argument("--measure", required=True,
                   choices=["power", "sigma2", "pspacing"])
    p.add_argument("--ensemble", help="GUE or GSE")
    p.add_argument("--input", required=True, help="measured CurveWithErrors CSV")
    p.set_defaults(fn=_cmd_fit_phi)

    p = sub.add_parser("figure", help="data+theory bundle for a figure analog")
    p.add_argument("name", help="fig2, fig3, fig4 or fig5")
    p.add_argument("--ensemble", help="override the figure's default class")
    p.add_argument("--dim", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--phis", help="comma-separated observed fractions")
    p.set_defaults(fn=_cmd_figure)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return args.fn(args, cfg)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"specstats: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FitFailure, EstimationFailure) as exc:
        print(f"specstats: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
