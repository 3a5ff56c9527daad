"""Command-line driver.

Subcommands: ``simulate`` renders a calibration capture of a virtual
display, ``calibrate`` recovers parameters from two captures,
``table2``/``sweep`` run the batch error experiments, ``demo`` writes
the mismatched-rendering artifact images.  Exit codes: 0 success, 1
configuration error, 2 calibration/runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .capture import CapturedImage, SimOptions, add_poisson_noise, simulate_capture
from .errors import ConfigError, StripeCalError
from .estimation import (
    CalibrationConfig,
    CandidateBounds,
    Observation,
    calibrate,
    read_corners,
    write_corners,
)
from .experiments import (
    ExperimentConfig,
    autoframed_pose,
    demo_distortion,
    perturb_display,
    run_noise_sweep,
    run_table2,
)
from .patterns import make_calibration_multiplex
from .pose import Intrinsics, project_points
from .presets import preset, preset_names

__all__ = ["main"]

_CONFIG_FIELDS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors (1 = configuration error)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_capture_size(sub):
    sub.add_argument("--capture-w", type=int, default=None,
                     help="capture width in pixels (default 1920)")
    sub.add_argument("--capture-h", type=int, default=None,
                     help="capture height in pixels (default 1080)")
    sub.add_argument("--uhd", action="store_true",
                     help="shorthand for a 3840x2160 capture")


def _capture_size(args) -> tuple[int, int]:
    w = args.capture_w or (3840 if args.uhd else 1920)
    h = args.capture_h or (2160 if args.uhd else 1080)
    return w, h


def _parse_noise_levels(text: str) -> tuple[float | None, ...]:
    """Comma list of target SNRs in dB; 'inf' or 'none' means noiseless."""
    levels = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token in ("inf", "none", "clean"):
            levels.append(None)
        else:
            try:
                levels.append(float(token))
            except ValueError:
                raise ConfigError(f"bad noise level {token!r}") from None
    if not levels:
        raise ConfigError("empty noise level list")
    return tuple(levels)


def _experiment_config(args) -> ExperimentConfig:
    """Merge a JSON config file (if given) with command-line overrides."""
    data: dict = {}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(_CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data.update(loaded)
    if "noise_scale" in data and data["noise_scale"] is not None:
        data["noise_scale"] = tuple(
            None if v is None else float(v) for v in data["noise_scale"]
        )
    for key in _CONFIG_FIELDS:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "uhd", False):
        data["capture_w"], data["capture_h"] = 3840, 2160
    if getattr(args, "noise", None) is not None:
        data["noise_scale"] = _parse_noise_levels(args.noise)
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _load_intrinsics(path: str) -> Intrinsics:
    try:
        data = json.loads(Path(path).read_text())
        return Intrinsics(fx=float(data["fx"]), fy=float(data["fy"]),
                          cx=float(data["cx"]), cy=float(data["cy"]),
                          width=int(data["width"]), height=int(data["height"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad intrinsics file {path}: {exc}") from exc


def _save_intrinsics(path: Path, intr: Intrinsics) -> None:
    path.write_text(json.dumps({
        "fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy,
        "width": intr.width, "height": intr.height,
    }, indent=2) + "\n")


# -- subcommands ---------------------------------------------------------------


def _cmd_simulate(args) -> int:
    display = preset(args.preset)
    if args.perturb:
        rng = np.random.default_rng(args.seed)
        display = perturb_display(display, args.perturb, rng)
    geom = display.geometry
    w, h = _capture_size(args)
    pose = autoframed_pose(display, args.u, args.v, args.d, w, h, args.fill)
    panel = make_calibration_multiplex(geom.panel_w, geom.panel_h)
    options = SimOptions(supersample=args.supersample, psf_sigma=args.psf_sigma)
    capture = simulate_capture(panel, display, pose, options)
    if args.noise_scale is not None:
        rng = np.random.default_rng(args.seed)
        capture = add_poisson_noise(capture, args.noise_scale, rng)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = args.tag or f"d{args.d:g}"
    capture.save_png(out / f"capture_{tag}.png")
    write_corners(out / f"corners_{tag}.txt",
                  project_points(pose, geom.corners_mm()))
    _save_intrinsics(out / f"intrinsics_{tag}.json", pose.intrinsics)
    (out / f"truth_{tag}.json").write_text(json.dumps({
        "p": display.p, "alpha_deg": display.alpha_deg,
        "t": display.t, "sigma": display.sigma,
        "u": args.u, "v": args.v, "d": args.d,
    }, indent=2) + "\n")
    print(f"wrote capture_{tag}.png, corners_{tag}.txt, "
          f"intrinsics_{tag}.json, truth_{tag}.json under {out}")
    return 0


def _cmd_calibrate(args) -> int:
    display = preset(args.preset)
    geom = display.geometry
    obs = []
    for cap_path, corner_path, intr_path in (
        (args.capture1, args.corners1, args.intrinsics1),
        (args.capture2, args.corners2, args.intrinsics2),
    ):
        image = CapturedImage.load_png(cap_path)
        corners = read_corners(corner_path)
        obs.append(Observation(image, corners, _load_intrinsics(intr_path)))
    config = CalibrationConfig(
        bounds=CandidateBounds(m_max=args.m_max),
        flip=args.flip,
        dtype=args.dtype,
    )
    result = calibrate(obs[0], obs[1], geom, config)
    text = result.to_report_text()
    print(text, end="")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        (out / "report.csv").write_text(
            result.csv_header() + "\n" + result.to_csv_row() + "\n")
    return 0


def _cmd_table2(args) -> int:
    config = _experiment_config(args)
    report = run_table2(config)
    print(report.format_table(), end="")
    return 0


def _cmd_sweep(args) -> int:
    config = _experiment_config(args)
    reports = run_noise_sweep(config)
    for label, report in reports.items():
        mean = report.mean_errors()
        print(f"{label:>8s}  snr {report.mean_snr_db():8.3f} dB  "
              + "  ".join(f"{k} {mean[k]:.6g}" for k in report.PARAMS)
              + f"  failures {report.failures}")
    return 0


def _cmd_demo(args) -> int:
    display = preset(args.preset)
    render_like = dataclasses.replace(
        display,
        p=args.render_pitch if args.render_pitch is not None else display.p,
        alpha=(math.radians(args.render_slant_deg)
               if args.render_slant_deg is not None else display.alpha),
        t=args.render_gap if args.render_gap is not None else display.t,
        sigma=(args.render_offset
               if args.render_offset is not None else display.sigma),
    )
    w, h = _capture_size(args)
    paths = demo_distortion(display, render_like, args.out_dir, d=args.d,
                            capture_w=w, capture_h=h, fill=args.fill)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stripecal",
                     description="slanted-barrier display calibration toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", parents=[], parser_class=_Parser,
                          help="render one calibration capture")
    sim.add_argument("--preset", default="FHD55B", choices=preset_names())
    sim.add_argument("--d", type=float, default=700.0, help="distance, mm")
    sim.add_argument("--u", type=float, default=0.0, help="horizontal offset, mm")
    sim.add_argument("--v", type=float, default=0.0, help="vertical offset, mm")
    sim.add_argument("--fill", type=float, default=0.90)
    sim.add_argument("--supersample", type=int, default=3)
    sim.add_argument("--psf-sigma", type=float, default=0.6)
    sim.add_argument("--noise-scale", type=float, default=None,
                     help="photon count per unit intensity (omit = noiseless)")
    sim.add_argument("--perturb", type=float, default=0.0,
                     help="random relative perturbation of the preset")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--tag", default=None, help="output filename suffix")
    sim.add_argument("--out-dir", default="out")
    _add_capture_size(sim)
    sim.set_defaults(func=_cmd_simulate)

    cal = subs.add_parser("calibrate", parser_class=_Parser,
                          help="recover display parameters from two captures")
    cal.add_argument("--preset", default="FHD55B", choices=preset_names(),
                     help="panel geometry (resolution and pitch) of the display")
    cal.add_argument("--capture1", required=True)
    cal.add_argument("--corners1", required=True)
    cal.add_argument("--intrinsics1", required=True)
    cal.add_argument("--capture2", required=True)
    cal.add_argument("--corners2", required=True)
    cal.add_argument("--intrinsics2", required=True)
    cal.add_argument("--flip", action="store_true",
                     help="captures are mirrored (shot via a mirror)")
    cal.add_argument("--m-max", type=int, default=8)
    cal.add_argument("--dtype", default="float64", choices=["float32", "float64"])
    cal.add_argument("--out-dir", default=None)
    cal.set_defaults(func=_cmd_calibrate)

    for name, fn, help_text in (
        ("table2", _cmd_table2, "batch error statistics for one display"),
        ("sweep", _cmd_sweep, "error statistics across noise levels"),
    ):
        sub = subs.add_parser(name, parser_class=_Parser, help=help_text)
        sub.add_argument("--config", default=None,
                         help="JSON file with ExperimentConfig fields")
        sub.add_argument("--preset", dest="display", default=None,
                         choices=preset_names())
        sub.add_argument("--trials", type=int, default=None)
        sub.add_argument("--perturbation", type=float, default=None)
        sub.add_argument("--jitter-mm", type=float, default=None)
        sub.add_argument("--rotation-deg", type=float, default=None)
        sub.add_argument("--d1", type=float, default=None)
        sub.add_argument("--d2", type=float, default=None)
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--out-dir", default=None)
        sub.add_argument("--workers", type=int, default=None)
        sub.add_argument("--fill", type=float, default=None)
        sub.add_argument("--supersample", type=int, default=None)
        sub.add_argument("--psf-sigma", dest="psf_sigma", type=float, default=None)
        sub.add_argument("--m-max", dest="m_max", type=int, default=None)
        sub.add_argument("--dtype", default=None, choices=["float32", "float64"])
        sub.add_argument("--noise-scale", dest="noise", default=None,
                         help="comma list of target SNRs in dB ('inf' = clean)")
        _add_capture_size(sub)
        sub.set_defaults(func=fn)

    demo = subs.add_parser("demo", parser_class=_Parser,
                           help="render correct-vs-mismatched display captures")
    demo.add_argument("--preset", default="FHD55B", choices=preset_names())
    demo.add_argument("--render-pitch", type=float, default=None)
    demo.add_argument("--render-slant-deg", type=float, default=None)
    demo.add_argument("--render-gap", type=float, default=None)
    demo.add_argument("--render-offset", type=float, default=None)
    demo.add_argument("--d", type=float, default=700.0)
    demo.add_argument("--fill", type=float, default=0.90)
    demo.add_argument("--out-dir", default="out")
    _add_capture_size(demo)
    demo.set_defaults(func=_cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"stripecal: configuration error: {exc}", file=sys.stderr)
        return 1
    except StripeCalError as exc:
        print(f"stripecal: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"stripecal: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
