"""``fopsim`` command line: sweeps, PSF/collection, USAF rendering and design tools."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .explorer import (IRDYE_680LT, InfeasibleError, SweepSettings, design_sweep,
                       min_thickness)
from .filter_model import (BLEED_ANCHORS, BAND_EDGE_NM, FilterError, calibrate_n_eff, od_of)
from .fop_tracer import (DesignError, TracerGuardError, angular_transmittance,
                         saturation_angle)
from .frontend import (FrontendConfig, Order, calibrate_scatter, sweep_frontend, worst_case)
from .imaging import (ImagingError, UsafPattern, collection_efficiency, ctf, element_contrast,
                      fwhm_deg, fwhm_xy, psf_angular, psf_spatial, render_usaf, resolution_at,
                      usaf_line_widths)
from .io import (ConfigError, RunConfig, load_config, svg_plot, write_csv, write_json,
                 write_pgm)
from .response import AngularResponse, ResponseError, rectangular, unity

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_GUARD = 0, 2, 3, 4
# PSF widths and kernels need the acceptance knee resolved finer than 1 deg
FINE_STEP = 0.25


class UsageError(ValueError):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _anchor(text: str) -> tuple[float, float]:
    try:
        th, nm = text.split(":")
        return float(th), float(nm)
    except ValueError:
        raise argparse.ArgumentTypeError(f"anchor must be THETA:NM, got {text!r}") from None


# ------------------------------------------------------------------ helpers

class Run:
    """Resolved configuration plus global flags for one invocation."""

    def __init__(self, args):
        cfg = load_config(args.config) if args.config else load_config()
        self.cfg: RunConfig = cfg
        self.seed = cfg.seed if args.seed is None else args.seed
        self.threads = cfg.threads if args.threads is None else args.threads
        if self.seed < 0:
            raise UsageError("--seed must be >= 0")
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")
        self.out = Path(args.out_dir or cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.measured = AngularResponse.from_csv(args.measured) if args.measured else None

    def theta_grid(self, theta_max=None, step=None) -> np.ndarray:
        tmax = self.cfg.sweep["theta_max"] if theta_max is None else theta_max
        st = self.cfg.sweep["theta_step"] if step is None else step
        if not 0 < tmax <= 90 or st <= 0:
            raise UsageError("theta range must satisfy 0 < theta_max <= 90 and step > 0")
        n = int(math.floor(tmax / st + 1e-9)) + 1
        return np.round(np.arange(n) * st, 10)

    def fop_response(self, design=None, samples=None, grid=None) -> AngularResponse:
        if self.measured is not None:
            return self.measured
        grid = self.theta_grid() if grid is None else grid
        return angular_transmittance(design or self.cfg.fop, grid,
                                     samples or self.cfg.sweep["samples"], self.seed,
                                     threads=self.threads)

    def path(self, name, override=None) -> Path:
        return Path(override) if override else self.out / name


def _select_response(run: Run, args) -> AngularResponse:
    if getattr(args, "bare", False):
        return unity()
    if getattr(args, "rect", None) is not None:
        return rectangular(args.rect)
    step = min(run.cfg.sweep["theta_step"], FINE_STEP)
    return run.fop_response(grid=run.theta_grid(90.0, step))


def _geometry(run: Run, args):
    g = run.cfg.geometry
    kw = {}
    if getattr(args, "working_distance", None) is not None:
        kw["working_distance"] = args.working_distance
    if getattr(args, "medium_index", None) is not None:
        kw["medium_index"] = args.medium_index
    return g.with_(**kw) if kw else g


def _frontend_config(run: Run, order, wavelength, fop_T):
    fr = run.cfg.frontend
    cfg = FrontendConfig(Order.parse(order), run.cfg.fop, run.cfg.filter,
                         fr["s_capture"], fr["s_exit"])
    calibrated = False
    if fr["calibrate"]:
        s_c, s_e = calibrate_scatter(cfg, wavelength, fop_T, fr["last_od_0"],
                                     fr["first_od_oblique"])
        cfg = FrontendConfig(cfg.order, cfg.fop, cfg.filter, s_c, s_e)
        calibrated = True
    return cfg, calibrated


# ----------------------------------------------------------------- commands

def cmd_angle_sweep(run: Run, args) -> int:
    grid = run.theta_grid(args.theta_max, args.theta_step)
    samples = args.samples or run.cfg.sweep["samples"]
    alphas = args.alpha if args.alpha is not None else list(run.cfg.sweep["alpha_list"])
    if run.measured is not None and alphas:
        raise UsageError("--alpha cannot be combined with --measured")
    curves = {}
    if alphas:
        for a in alphas:
            curves[f"alpha {a:g} deg"] = (a, angular_transmittance(
                run.cfg.fop.with_alpha(a), grid, samples, run.seed, threads=run.threads))
    else:
        curves["plate"] = (run.cfg.fop.alpha_deg, run.measured if run.measured is not None else
                           angular_transmittance(run.cfg.fop, grid, samples, run.seed,
                                                 threads=run.threads))
    summary = []
    for label, (a, resp) in curves.items():
        if alphas:
            csv_path = run.out / f"angle_sweep_alpha{a:g}.csv"
        else:
            csv_path = run.path("angle_sweep.csv", args.out)
        resp.to_csv(csv_path)
        sat = saturation_angle(resp)
        summary.append({"alpha_deg": float(a), "csv": csv_path.name,
                        "t0": float(resp.transmittance[0]),
                        "saturation_angle_deg": None if math.isnan(sat) else sat})
        print(f"{label}: T(0)={resp.transmittance[0]:.4f}  saturation {sat:g} deg")
    svg_plot(run.out / "angle_sweep.svg",
             {k: (r.theta_deg, r.transmittance) for k, (_, r) in curves.items()},
             "angle of incidence (deg)", "transmittance", log_y=args.scale == "log")
    write_json(run.out / "angle_sweep.json", {"seed": run.seed, "samples": samples,
                                              "curves": summary})
    return EXIT_OK


def cmd_frontend_sweep(run: Run, args) -> int:
    lam = args.wavelength if args.wavelength is not None else run.cfg.frontend["lambda_ex"]
    tmax = min(run.cfg.sweep["theta_max"], 89.0)
    grid = run.theta_grid(tmax)
    fop_T = run.fop_response(grid=grid) if run.measured is None else run.measured
    grid = fop_T.theta_deg[fop_T.theta_deg < 90.0]
    orders = list(Order) if args.order == "all" else [Order.parse(args.order)]
    base, calibrated = _frontend_config(run, Order.FILTER_LAST, lam, fop_T)
    curves, worst = {}, {}
    for o in orders:
        resp = sweep_frontend(base.with_order(o), lam, grid, fop_T)
        curves[o.value] = resp
        th, od = worst_case(resp)
        worst[o.value] = {"theta_deg": th, "od": od}
        print(f"{o.value:>5}: worst OD {od:.2f} at {th:g} deg")
    rows = zip(grid, *[c.transmittance for c in curves.values()])
    write_csv(run.path("frontend_sweep.csv", args.out), ["theta_deg", *curves], rows)
    svg_plot(run.out / "frontend_sweep.svg",
             {k: (c.theta_deg, od_of(c.transmittance)) for k, c in curves.items()},
             "angle of incidence (deg)", "optical density")
    write_json(run.out / "frontend_sweep.json",
               {"wavelength_nm": lam, "s_capture": base.s_capture, "s_exit": base.s_exit,
                "calibrated": calibrated, "worst": worst})
    return EXIT_OK


def cmd_psf(run: Run, args) -> int:
    T = _select_response(run, args)
    geom = _geometry(run, args)
    psf = psf_angular(T)
    fw = fwhm_deg(T)
    xy = fwhm_xy(fw, geom.working_distance, geom.medium_index)
    psf.to_csv(run.out / "psf.csv", "psf")
    kernel = psf_spatial(T, geom, geom.pixel_pitch / 4.0, max_radius=20 * geom.pixel_pitch)
    write_pgm(run.out / "psf_kernel.pgm", kernel)
    write_json(run.out / "psf.json", {"fwhm_deg": fw, "fwhm_xy_um": xy,
                                      "working_distance_um": geom.working_distance,
                                      "medium_index": geom.medium_index})
    print(f"FWHM {fw:.2f} deg  ({xy:.1f} um at l={geom.working_distance:g} um)")
    return EXIT_OK


def cmd_eta(run: Run, args) -> int:
    T = _select_response(run, args)
    eta = collection_efficiency(T)
    write_json(run.out / "eta.json", {"eta_c": eta})
    print(f"eta_c {eta:.6g}")
    return EXIT_OK


def _line_widths(run: Run, args) -> list[float]:
    if args.line_widths is not None:
        widths = args.line_widths
    elif run.cfg.render["line_widths"]:
        widths = list(run.cfg.render["line_widths"])
    else:
        widths = usaf_line_widths()
    if not widths:
        raise UsageError("empty line-width list")
    if any(w <= 0 for w in widths):
        raise UsageError("line widths must be positive")
    return sorted(widths, reverse=True)


def cmd_render_usaf(run: Run, args) -> int:
    widths = _line_widths(run, args)
    T = _select_response(run, args)
    geom = _geometry(run, args)
    rc = run.cfg.render
    fop = run.cfg.fop if rc["fiber_mask"] else None
    rows = []
    for w in widths:
        pat = UsafPattern(w, "vertical")
        img, center = render_usaf(pat, T, geom, fop=fop, oversample=rc["oversample"],
                                  phase=args.phase)
        name = f"usaf_w{w:g}.pgm"
        write_pgm(run.out / name, img)
        rows.append((w, element_contrast(img, pat, center), name))
    write_csv(run.out / "usaf_contrast.csv", ["line_width_um", "contrast", "image"], rows)
    return EXIT_OK


def cmd_ctf(run: Run, args) -> int:
    widths = _line_widths(run, args)
    level = args.contrast_level if args.contrast_level is not None else run.cfg.render["contrast_level"]
    if not 0 < level < 1:
        raise UsageError("contrast level must lie in (0, 1)")
    T = _select_response(run, args)
    geom = _geometry(run, args)
    rc = run.cfg.render
    fop = run.cfg.fop if rc["fiber_mask"] else None
    table = ctf(T, geom, widths, fop=fop, phases=rc["phases"], oversample=rc["oversample"])
    write_csv(run.path("ctf.csv", args.out), ["line_width_um", "contrast"], table)
    nyq = geom.nyquist_width if widths[-1] <= geom.nyquist_width <= widths[0] else None
    res = resolution_at(table, level, nyq)
    write_json(run.out / "resolution.json",
               {"level": level, "line_width_um": res.line_width, "pixel_limited": res.pixel_limited,
                "reached": res.reached, "nyquist_width_um": geom.nyquist_width,
                "working_distance_um": geom.working_distance})
    flag = " (pixel-limited)" if res.pixel_limited else ""
    if res.reached:
        print(f"resolution at {level:g} contrast: {res.line_width:.1f} um{flag}")
    else:
        print(f"contrast does not cross {level:g} between {widths[0]:g} and {widths[-1]:g} um{flag}")
    return EXIT_OK


def cmd_optimize_h(run: Run, args) -> int:
    if run.measured is not None:
        raise UsageError("optimize-h simulates the plate; --measured is not applicable")
    oc = dict(run.cfg.optimize)
    for k in ("od_target", "theta_min", "theta_max", "order", "h_min", "h_max", "samples"):
        v = getattr(args, k)
        if v is not None:
            oc[k] = v
    if args.wavelength is not None:
        oc["lambda_ex"] = args.wavelength
    fr = run.cfg.frontend
    scatter = fr["s_capture"] > 0 or fr["s_exit"] > 0
    if scatter and not args.allow_scatter:
        raise UsageError("scatter is enabled in [frontend]; pass --allow-scatter to acknowledge")
    res = min_thickness(run.cfg.fop, run.cfg.filter, oc["lambda_ex"], oc["od_target"],
                        (oc["theta_min"], oc["theta_max"]), oc["order"],
                        s_capture=fr["s_capture"], s_exit=fr["s_exit"], allow_scatter=scatter,
                        h_min=oc["h_min"], h_max=oc["h_max"], samples=oc["samples"],
                        seed=run.seed, threads=run.threads)
    write_json(run.out / "optimize.json",
               {"h_um": res.h, "worst_od": res.worst_od, "worst_theta_deg": res.worst_theta,
                "od_target": oc["od_target"], "order": Order.parse(oc["order"]).value,
                "lambda_ex_nm": oc["lambda_ex"], "evaluations": res.evaluations,
                "warning": res.warning})
    print(f"h = {res.h} um (worst OD {res.worst_od:.2f} at {res.worst_theta:g} deg)")
    return EXIT_OK


def cmd_design_sweep(run: Run, args) -> int:
    if run.measured is not None:
        raise UsageError("design-sweep simulates every design; --measured is not applicable")
    sw = run.cfg.sweep
    nas = args.na if args.na is not None else list(sw["na_list"])
    ffs = args.ff if args.ff is not None else list(sw["ff_list"])
    hs = args.h if args.h is not None else list(sw["h_list"])
    lams = args.wavelength if args.wavelength is not None else list(sw["lambda_list"])
    if not (nas and ffs and hs and lams):
        raise UsageError("every sweep grid must be non-empty")
    settings = SweepSettings(order=Order.parse(args.order or run.cfg.frontend["order"]),
                             emission_nm=sw["emission_nm"],
                             samples=args.samples or sw["samples"], seed=run.seed,
                             threads=run.threads)
    rows = design_sweep(nas, ffs, hs, lams, run.cfg.geometry, run.cfg.filter,
                        base=run.cfg.fop, fluor=IRDYE_680LT, settings=settings)
    dicts = [r.as_dict() for r in rows]
    keys = list(dicts[0])
    write_csv(run.path("design_sweep.csv", args.out), keys, [[d[k] for k in keys] for d in dicts])
    write_json(run.out / "design_sweep.json", {"order": settings.order.value, "rows": dicts})
    for d in dicts:
        print(f"NA {d['na']:.3f} FF {d['fill_factor']:.3f} h {d['h']:g}: "
              f"eta_c {d['eta_c']:.4g}  worst OD {d['worst_od']:.2f}")
    return EXIT_OK


def cmd_calibrate_filter(run: Run, args) -> int:
    anchors = args.anchor or list(BLEED_ANCHORS)
    edge = args.edge if args.edge is not None else BAND_EDGE_NM
    n = calibrate_n_eff(anchors, edge)
    write_json(run.out / "calibrate_filter.json",
               {"n_eff": n, "edge_nm": edge,
                "anchors": [{"theta_deg": t, "wavelength_nm": w} for t, w in anchors]})
    print(f"n_eff {n:.5f}")
    return EXIT_OK


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--config", default=argparse.SUPPRESS, help="INI-style run configuration")
    glob.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    glob.add_argument("--out-dir", default=argparse.SUPPRESS)
    glob.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    glob.add_argument("--measured", default=argparse.SUPPRESS,
                      help="CSV angular response (theta_deg,value) used instead of simulating")

    p = argparse.ArgumentParser(prog="fopsim", parents=[glob],
                                description="Fiber optic plate and filter frontend simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[glob], help=help_)
        sp.set_defaults(func=fn)
        return sp

    def response_flags(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--bare", action="store_true", help="bare sensor, T = 1")
        g.add_argument("--rect", type=float, metavar="DEG", help="ideal cutoff at DEG")

    def geom_flags(sp):
        sp.add_argument("--working-distance", type=float, metavar="UM")
        sp.add_argument("--medium-index", type=float)

    sp = add("angle-sweep", cmd_angle_sweep, "plate transmittance vs angle of incidence")
    sp.add_argument("--theta-max", type=float)
    sp.add_argument("--theta-step", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--alpha", type=_float_list, help="acceptance angles to sweep (deg)")
    sp.add_argument("--scale", choices=("log", "linear"), default="log")
    sp.add_argument("--out")

    sp = add("frontend-sweep", cmd_frontend_sweep, "excitation rejection of the three stacks")
    sp.add_argument("--order", default="all", help="first, last, dual or all")
    sp.add_argument("--lambda", dest="wavelength", type=float, metavar="NM")
    sp.add_argument("--out")

    sp = add("psf", cmd_psf, "angular and spatial point spread function")
    response_flags(sp)
    geom_flags(sp)

    sp = add("eta", cmd_eta, "collection efficiency")
    response_flags(sp)
    geom_flags(sp)

    for name, fn in (("render-usaf", cmd_render_usaf), ("ctf", cmd_ctf)):
        sp = add(name, fn, "render USAF elements" if name == "render-usaf"
                 else "contrast transfer function and resolution")
        sp.add_argument("--line-widths", type=_float_list, metavar="LIST")
        sp.add_argument("--contrast-level", type=float)
        sp.add_argument("--phase", type=float, default=0.0)
        sp.add_argument("--out")
        response_flags(sp)
        geom_flags(sp)

    sp = add("optimize-h", cmd_optimize_h, "minimum plate thickness for an OD target")
    sp.add_argument("--od-target", type=float)
    sp.add_argument("--theta-min", type=float)
    sp.add_argument("--theta-max", type=float)
    sp.add_argument("--order")
    sp.add_argument("--lambda", dest="wavelength", type=float, metavar="NM")
    sp.add_argument("--h-min", type=int)
    sp.add_argument("--h-max", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--allow-scatter", action="store_true")

    sp = add("design-sweep", cmd_design_sweep, "NA / FF / thickness / wavelength tradeoff table")
    sp.add_argument("--na", type=_float_list)
    sp.add_argument("--ff", type=_float_list)
    sp.add_argument("--h", type=_float_list)
    sp.add_argument("--lambda", dest="wavelength", type=_float_list, metavar="LIST")
    sp.add_argument("--order")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--out")

    sp = add("calibrate-filter", cmd_calibrate_filter, "fit the filter effective index")
    sp.add_argument("--anchor", type=_anchor, action="append", metavar="THETA:NM")
    sp.add_argument("--edge", type=float, metavar="NM")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for k in ("config", "seed", "out_dir", "threads", "measured"):
        if not hasattr(args, k):
            setattr(args, k, None)
    try:
        run = Run(args)
        return args.func(run, args)
    except (ConfigError, UsageError, ResponseError) as exc:
        print(f"fopsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"fopsim: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TracerGuardError as exc:
        print(f"fopsim: internal guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (DesignError, FilterError, ImagingError, ValueError) as exc:
        print(f"fopsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
