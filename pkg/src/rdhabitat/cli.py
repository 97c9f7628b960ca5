"""Command-line front end: analysis reports and reproducible simulations.

Exit codes: 0 success, 2 infeasible analysis, 3 numerical blow-up,
4 I/O or config error.  Flags override config-file keys; the environment
variable named in config.ENV_OUT_DIR overrides the configured output
directory (an explicit --out flag wins over both).
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from . import figures, storage
from .diagnostics import classify_pattern, radial_spectrum, transient_metrics
from .domain import Region, rasterize, region_flat_mask
from .errors import (BlowUp, ConfigError, DegenerateDomain, DisconnectedDomain,
                     EmptyRegion, EmptyResult, Infeasible, NoBand, NoSignChange,
                     NumericalFailure, PoleAtMode, RdHabitatError,
                     RegionNotRectangular, ShapeMismatch)
from .kinetics import (allee_regime, coexistence_equilibria,
                       first_lyapunov_number, hopf_threshold_a,
                       hopf_threshold_s, is_locally_stable, jacobian_at,
                       unique_equilibrium)
from .linstab import (DiffusionPair, admissible_modes, band_edges,
                      classify_regime, dispersion_curve, sample_dispersion,
                      turing_boundary_d2)
from .solver import (GENERATOR_NAME, FillMode, SimConfig, VerdictKind,
                     make_ic_from_snapshot, make_ic_noise, run)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_BLOWUP = 3
EXIT_CONFIG = 4

_INFEASIBLE_ERRORS = (Infeasible, EmptyResult, NoSignChange, PoleAtMode, EmptyRegion)
_CONFIG_ERRORS = (ConfigError, ShapeMismatch, DegenerateDomain,
                  DisconnectedDomain, OSError)


def _fmt(x: float) -> str:
    return repr(float(x))


def _load_config(args) -> cfgmod.ExperimentConfig:
    text = ""
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    pairs = cfgmod.parse_pairs(text)
    pairs = cfgmod.apply_overrides(pairs, args.set or [])
    cfg = cfgmod.from_pairs(pairs)
    env_dir = os.environ.get(cfgmod.ENV_OUT_DIR)
    if env_dir:
        cfg = cfg.with_(out_dir=env_dir)
    if args.out is not None:
        cfg = cfg.with_(out_dir=args.out)
    return cfg


def _apply_threads(args) -> None:
    if getattr(args, "threads", None) is None:
        return
    if args.threads < 1:
        raise ConfigError(f"--threads must be at least 1, got {args.threads}")
    import numba

    numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))


def _outdir(cfg: cfgmod.ExperimentConfig) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def _header_pairs(cfg: cfgmod.ExperimentConfig) -> list[tuple[str, str]]:
    return cfgmod.resolved_pairs(cfg, include_outputs=False)


def _domain_extent(cfg: cfgmod.ExperimentConfig) -> float:
    spec = cfg.domain_spec()
    return max(max(r.x1 for r in spec.rects), max(r.y1 for r in spec.rects))


# --------------------------------------------------------------- analyze

def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    p, d = cfg.params, cfg.diffusion
    lines: list[str] = []

    eqs = coexistence_equilibria(p)
    lines.append(f"allee_regime = {allee_regime(p).name}")
    for i, eq in enumerate(eqs):
        lines.append(f"equilibrium[{i}] = ({_fmt(eq.u_star)}, {_fmt(eq.v_star)})")
    eq = unique_equilibrium(p)
    J = jacobian_at(eq, p)
    lines.append(f"jacobian = [[{_fmt(J.a11)}, {_fmt(J.a12)}], [{_fmt(J.a21)}, {_fmt(J.a22)}]]")
    lines.append(f"trace = {_fmt(J.trace)}")
    lines.append(f"determinant = {_fmt(J.det)}")
    lines.append(f"temporally_stable = {is_locally_stable(J)}")

    try:
        s_h = hopf_threshold_s(p)
        lines.append(f"hopf_threshold_s = {_fmt(s_h)}")
        sigma = first_lyapunov_number(p.with_(s=s_h))
        kind = "super-critical" if sigma < 0 else "sub-critical"
        lines.append(f"first_lyapunov_number = {_fmt(sigma)}")
        lines.append(f"hopf_criticality = {kind}")
    except _INFEASIBLE_ERRORS as exc:
        lines.append(f"hopf_threshold_s = unavailable ({exc})")
    if args.a_bracket is not None:
        lo, hi = args.a_bracket
        a_h = hopf_threshold_a(p, (lo, hi))
        lines.append(f"hopf_threshold_a = {_fmt(a_h)}")

    try:
        d2t = turing_boundary_d2(J, d.d1)
        lines.append(f"turing_boundary_d2 = {_fmt(d2t)}")
    except _INFEASIBLE_ERRORS as exc:
        lines.append(f"turing_boundary_d2 = unavailable ({exc})")

    curve = None
    try:
        curve = dispersion_curve(J, d)
        lines.append(f"band_k1 = {_fmt(curve.k1)}")
        lines.append(f"band_k2 = {_fmt(curve.k2)}")
        lines.append(f"k_critical = {_fmt(curve.k_c)}")
        lines.append(f"k_argmax = {_fmt(curve.k_argmax)}")
        L = _domain_extent(cfg)
        modes = admissible_modes(J, d, L)
        lines.append(f"modes_L = {_fmt(L)}")
        lines.append(f"modes_admissible_count = {len(modes.admissible)}")
        lines.append(f"modes_dominant = {modes.dominant}")
    except NoBand:
        lines.append("band = none (no unstable wavenumber band)")

    print("\n".join(lines))
    if args.write:
        out = _outdir(cfg)
        storage.write_report(os.path.join(out, "analysis.txt"),
                             [tuple(ln.split(" = ", 1)) for ln in lines if " = " in ln],
                             _header_pairs(cfg))
        if curve is not None:
            figures.save_dispersion_plot(os.path.join(out, "dispersion.png"),
                                         curve.samples, (curve.k1, curve.k2))
    return EXIT_OK


# --------------------------------------------------------------- dispersion

def cmd_dispersion(args) -> int:
    cfg = _load_config(args)
    p, d = cfg.params, cfg.diffusion
    eq = unique_equilibrium(p)
    J = jacobian_at(eq, p)

    band = None
    head: list[tuple[str, str]] = []
    try:
        k1, k2 = band_edges(J, d)
        band = (k1, k2)
        curve = dispersion_curve(J, d)
        head += [("k1", _fmt(k1)), ("k2", _fmt(k2)),
                 ("k_critical", _fmt(curve.k_c)), ("k_argmax", _fmt(curve.k_argmax))]
        k_max = args.k_max if args.k_max is not None else 2.0 * k2
    except NoBand:
        head.append(("note", "no unstable band"))
        k_max = args.k_max if args.k_max is not None else math.pi / cfg.h
    samples = sample_dispersion(J, d, k_max, args.n)

    out = _outdir(cfg)
    path = os.path.join(out, "dispersion.csv")
    lines = ["# rdhabitat-dispersion 1"]
    lines += [f"# {k} = {v}" for k, v in head]
    lines += [f"# config.{k} = {v}" for k, v in _header_pairs(cfg)]
    lines.append("k,re_lambda_max,im_lambda")
    for k, re_l, im_l in samples:
        lines.append(f"{_fmt(k)},{_fmt(re_l)},{_fmt(im_l)}")
    storage._atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())
    figures.save_dispersion_plot(os.path.join(out, "dispersion.png"), samples, band)
    for k, v in head:
        print(f"{k} = {v}")
    print(f"wrote {path} ({args.n} samples up to k={k_max:g})")
    return EXIT_OK


# --------------------------------------------------------------- map

def cmd_map(args) -> int:
    cfg = _load_config(args)
    p = cfg.params
    d1 = cfg.diffusion.d1
    res = args.res
    if res < 2:
        raise ConfigError(f"--res must be at least 2, got {res}")
    a_values = np.linspace(args.a_min, args.a_max, res)
    d2_values = np.linspace(args.d2_min, args.d2_max, res)

    labels: list[list[str]] = []
    boundary = np.full(res, np.nan)
    traces = np.full(res, np.nan)
    for i, a in enumerate(a_values):
        row: list[str] = []
        try:
            pa = p.with_(a=float(a))
            J = jacobian_at(unique_equilibrium(pa), pa)
            traces[i] = J.trace
        except RdHabitatError:
            labels.append(["Unknown"] * res)
            continue
        try:
            boundary[i] = turing_boundary_d2(J, d1)
        except RdHabitatError:
            pass
        for d2 in d2_values:
            try:
                row.append(classify_regime(J, DiffusionPair(d1, float(d2))).value)
            except RdHabitatError:
                row.append("Unknown")
        labels.append(row)

    hopf_a = None
    finite = np.isfinite(traces)
    sign_change = np.nonzero(np.diff(np.sign(traces[finite])) != 0)[0]
    if sign_change.size:
        idx = np.nonzero(finite)[0]
        i = int(idx[sign_change[0]])
        try:
            hopf_a = hopf_threshold_a(p, (float(a_values[i]), float(a_values[i + 1])))
        except RdHabitatError:
            pass

    out = _outdir(cfg)
    head = [(f"config.{k}", v) for k, v in _header_pairs(cfg)]
    grid_path = os.path.join(out, "regime_map.csv")
    lines = ["# rdhabitat-regime-map 1"]
    if hopf_a is not None:
        lines.append(f"# hopf_line_a = {_fmt(hopf_a)}")
    lines += [f"# {k} = {v}" for k, v in head]
    lines.append("a,d2,regime")
    for i, a in enumerate(a_values):
        for j, d2 in enumerate(d2_values):
            lines.append(f"{_fmt(a)},{_fmt(d2)},{labels[i][j]}")
    storage._atomic_write_bytes(grid_path, ("\n".join(lines) + "\n").encode())

    boundary_path = os.path.join(out, "turing_boundary.csv")
    blines = ["# rdhabitat-turing-boundary 1"]
    blines += [f"# {k} = {v}" for k, v in head]
    blines.append("a,d2_turing")
    for a, d2t in zip(a_values, boundary):
        blines.append(f"{_fmt(a)},{_fmt(d2t)}")
    storage._atomic_write_bytes(boundary_path, ("\n".join(blines) + "\n").encode())

    figures.save_regime_map_plot(os.path.join(out, "regime_map.png"),
                                 a_values, d2_values, labels, boundary, hopf_a)
    n_unknown = sum(row.count("Unknown") for row in labels)
    print(f"wrote {grid_path} ({res}x{res} cells, {n_unknown} unknown) and {boundary_path}")
    return EXIT_OK


# --------------------------------------------------------------- simulate

def _build_ic(cfg: cfgmod.ExperimentConfig, g, eq):
    if cfg.ic_kind is cfgmod.ICKind.NOISE:
        return make_ic_noise(eq, cfg.sim.epsilon, cfg.sim.seed, g, region=cfg.ic_region), []
    snap = storage.read_snapshot(cfg.ic_snapshot)
    ic = make_ic_from_snapshot(snap.state, cfg.ic_fill, g, eq=eq)
    meta = [("resume.source", cfg.ic_snapshot), ("resume.fill", cfg.ic_fill.name.lower())]
    return ic, meta


def _run_and_write(cfg: cfgmod.ExperimentConfig) -> int:
    spec = cfg.domain_spec()
    g = rasterize(spec, cfg.h)
    eq = unique_equilibrium(cfg.params)
    ic, meta = _build_ic(cfg, g, eq)
    out = _outdir(cfg)
    head = _header_pairs(cfg)
    extra = [("generator", GENERATOR_NAME)] + meta

    try:
        result = run(cfg.sim, ic, cfg.params, cfg.diffusion, g,
                     stationarity_tol=cfg.stationarity_tol,
                     check_after=cfg.check_after)
    except BlowUp as exc:
        print(f"blow-up at t={exc.t:g}: {exc}", file=sys.stderr)
        if exc.state is not None:
            path = os.path.join(out, f"blowup_t{exc.state.t:g}.snap")
            storage.write_snapshot(path, exc.state, g, head, extra)
            print(f"diagnostic snapshot: {path}", file=sys.stderr)
        return EXIT_BLOWUP

    snap_dir = os.path.join(out, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    for snap in result.snapshots:
        storage.write_snapshot(os.path.join(snap_dir, f"snapshot_t{snap.t:g}.snap"),
                               snap, g, head, extra)
    storage.write_mask_pgm(os.path.join(out, "domain_mask.pgm"), g)
    storage.write_series(os.path.join(out, "series.csv"), result.series, head, extra)

    final = result.snapshots[-1]
    cls = classify_pattern(final, eq, g, result.verdict)
    metrics: list[tuple[str, str]] = list(meta)
    metrics.append(("verdict", result.verdict.kind.value))
    if result.verdict.t_settle is not None:
        metrics.append(("t_settle", _fmt(result.verdict.t_settle)))
    metrics.append(("dt_final", _fmt(result.dt_final)))
    metrics.append(("halvings", str(result.halvings)))
    metrics.append(("pattern", cls.tag.value))
    metrics.append(("confidence", _fmt(cls.confidence)))

    band = None
    try:
        band = band_edges(jacobian_at(eq, cfg.params), cfg.diffusion)
    except (NoBand, Infeasible):
        pass
    try:
        summary = radial_spectrum(final.u, g, region=Region.ALL, band=band)
    except RegionNotRectangular:
        summary = radial_spectrum(final.u, g, region=Region.D1, band=band)
        metrics.append(("spectrum_region", "d1"))
    metrics.append(("k_peak", _fmt(summary.k_peak)))
    if summary.band_ok is not None:
        metrics.append(("band_ok", str(summary.band_ok)))
    metrics.append(("spot_count", str(summary.spot_count)))

    if bool(region_flat_mask(g, Region.D2).any()):
        tm = transient_metrics(result.series, eq)
        metrics.append(("t_onset_d2", "never" if tm.t_onset_d2 is None else _fmt(tm.t_onset_d2)))
        metrics.append(("t_settle_d2", "never" if tm.t_settle_d2 is None else _fmt(tm.t_settle_d2)))
        metrics.append(("peak_amplitude_d2",
                        "never" if tm.peak_amplitude_d2 is None else _fmt(tm.peak_amplitude_d2)))

    storage.write_report(os.path.join(out, "metrics.txt"), metrics, head)
    figures.save_state_heatmaps(os.path.join(out, "final.png"), final, g, label=cls.tag.value)
    figures.save_series_plot(os.path.join(out, "series.png"), result.series)

    print(f"verdict = {result.verdict.kind.value}")
    if result.verdict.t_settle is not None:
        print(f"t_settle = {result.verdict.t_settle:g}")
    print(f"pattern = {cls.tag.value} (confidence {cls.confidence:.3f})")
    print(f"k_peak = {summary.k_peak:.4f}")
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    _apply_threads(args)
    return _run_and_write(cfg)


def cmd_resume(args) -> int:
    cfg = _load_config(args)
    _apply_threads(args)
    fill_names = {"zero": FillMode.ZERO, "homogeneous": FillMode.HOMOGENEOUS}
    overrides = {"ic_kind": cfgmod.ICKind.SNAPSHOT}
    if args.snapshot is not None:
        overrides["ic_snapshot"] = args.snapshot
    if args.fill is not None:
        overrides["ic_fill"] = fill_names[args.fill]
    cfg = cfg.with_(**overrides)
    if cfg.ic_snapshot is None:
        raise ConfigError("resume needs --snapshot or ic.snapshot in the config")
    if cfg.ic_fill is None:
        raise ConfigError("resume needs --fill or ic.fill in the config")
    return _run_and_write(cfg)


# --------------------------------------------------------------- classify

def _geometry_from_header(header: dict[str, str]):
    pairs = storage.embedded_config_pairs(header)
    if not pairs:
        raise ConfigError("snapshot embeds no config block; cannot rebuild geometry")
    cfg = cfgmod.from_pairs(pairs)
    return cfg, rasterize(cfg.domain_spec(), cfg.h)


def cmd_classify(args) -> int:
    from .solver import Verdict

    lines = []
    for path in args.snapshots:
        snap = storage.read_snapshot(path)
        cfg, g = _geometry_from_header(snap.header)
        eq = unique_equilibrium(cfg.params)
        # a saved snapshot carries no run verdict; labels describe morphology
        cls = classify_pattern(snap.state, eq, g, Verdict(kind=VerdictKind.STATIONARY))
        band = None
        try:
            band = band_edges(jacobian_at(eq, cfg.params), cfg.diffusion)
        except (NoBand, Infeasible):
            pass
        try:
            summary = radial_spectrum(snap.state.u, g, region=Region.ALL, band=band)
        except RegionNotRectangular:
            summary = radial_spectrum(snap.state.u, g, region=Region.D1, band=band)
        line = (f"{path}: pattern={cls.tag.value} confidence={cls.confidence:.3f} "
                f"k_peak={summary.k_peak:.4f} band_ok={summary.band_ok} "
                f"spot_count={summary.spot_count}")
        print(line)
        lines.append(line)
        if args.pgm:
            storage.write_threshold_pgm(f"{path}.pgm", snap.state.u, g)
    if args.write:
        cfg0, _ = _geometry_from_header(storage.read_snapshot(args.snapshots[0]).header)
        out = _outdir(cfg0)
        storage._atomic_write_bytes(os.path.join(out, "classify.txt"),
                                    ("\n".join(lines) + "\n").encode())
    return EXIT_OK


# --------------------------------------------------------------- series

def cmd_series(args) -> int:
    from .solver import TimeSeries, spatial_average

    snaps = [storage.read_snapshot(path) for path in args.snapshots]
    snaps.sort(key=lambda s: s.state.t)
    cfg, g = _geometry_from_header(snaps[0].header)
    for s in snaps[1:]:
        if int(s.header["nx"]) != g.nx or int(s.header["ny"]) != g.ny:
            raise ShapeMismatch("snapshots disagree on grid dimensions")
    has_d2 = bool(region_flat_mask(g, Region.D2).any())

    def means(state, region):
        return spatial_average(state, g, region)

    rows = []
    for s in snaps:
        u1, v1 = means(s.state, Region.D1)
        u2, v2 = means(s.state, Region.D2) if has_d2 else (math.nan, math.nan)
        ua, va = means(s.state, Region.ALL)
        rows.append((s.state.t, u1, v1, u2, v2, ua, va))
    data = np.array(rows, dtype=np.float64)
    series = TimeSeries(t=data[:, 0], mean_u_d1=data[:, 1], mean_v_d1=data[:, 2],
                        mean_u_d2=data[:, 3], mean_v_d2=data[:, 4],
                        mean_u_all=data[:, 5], mean_v_all=data[:, 6])
    if args.out is not None:
        cfg = cfg.with_(out_dir=args.out)
    out = _outdir(cfg)
    path = os.path.join(out, "series_from_snapshots.csv")
    storage.write_series(path, series, cfgmod.resolved_pairs(cfg, include_outputs=False),
                         [("source", "recomputed from snapshots")])
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


# --------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="config file path")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("-o", "--out", help="output directory (overrides config and env)")
    common.add_argument("--threads", type=int,
                        help="worker threads for the solver (capped at machine limit)")

    parser = argparse.ArgumentParser(
        prog="rdhabitat",
        description="Stability analysis and pattern simulation for a prey-predator "
                    "reaction-diffusion model on square and fragmented habitats.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", parents=[common],
                          help="equilibria, thresholds, band and mode report")
    p_an.add_argument("--a-bracket", nargs=2, type=float, metavar=("LO", "HI"),
                      help="also solve the oscillation threshold in a within [LO, HI]")
    p_an.add_argument("--write", action="store_true",
                      help="write analysis.txt and dispersion.png to the output dir")
    p_an.set_defaults(func=cmd_analyze)

    p_di = sub.add_parser("dispersion", parents=[common],
                          help="growth-rate curve CSV and figure")
    p_di.add_argument("--k-max", type=float, help="largest sampled wavenumber")
    p_di.add_argument("--n", type=int, default=512, help="number of samples (default 512)")
    p_di.set_defaults(func=cmd_dispersion)

    p_map = sub.add_parser("map", parents=[common],
                           help="regime labels over the (a, d2) plane")
    p_map.add_argument("--a-min", type=float, required=True)
    p_map.add_argument("--a-max", type=float, required=True)
    p_map.add_argument("--d2-min", type=float, required=True)
    p_map.add_argument("--d2-max", type=float, required=True)
    p_map.add_argument("--res", type=int, default=21,
                       help="grid resolution per axis (default 21)")
    p_map.set_defaults(func=cmd_map)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run the PDE and write snapshots, series, metrics")
    p_sim.set_defaults(func=cmd_simulate)

    p_re = sub.add_parser("resume", parents=[common],
                          help="continue from a saved snapshot with a chosen D2 fill")
    p_re.add_argument("--snapshot", help="source snapshot path")
    p_re.add_argument("--fill", choices=("zero", "homogeneous"),
                      help="state for cells the snapshot does not cover")
    p_re.set_defaults(func=cmd_resume)

    p_cl = sub.add_parser("classify", parents=[common],
                          help="re-analyze saved snapshots")
    p_cl.add_argument("snapshots", nargs="+", help="snapshot files")
    p_cl.add_argument("--pgm", action="store_true",
                      help="write a thresholded graymap next to each snapshot")
    p_cl.add_argument("--write", action="store_true", help="also write classify.txt")
    p_cl.set_defaults(func=cmd_classify)

    p_se = sub.add_parser("series", parents=[common],
                          help="recompute region means from snapshots")
    p_se.add_argument("snapshots", nargs="+", help="snapshot files")
    p_se.set_defaults(func=cmd_series)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INFEASIBLE_ERRORS as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (BlowUp, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
