"""Command-line front end.

Configuration is merged as defaults, then an optional ``--config`` file of
``key=value`` lines (keys mirror the long flag names), then explicit flags.
Exit codes: 0 success, 1 usage error, 2 data error, 3 simulation failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, DivergenceError, OpcError, ResourceError
from .geometry import Rect
from .ilt import IltConfig, optimize
from .layout import ClipConfig, Layer, clip, parse_layout
from .litho import DoseSpec, KernelSet, ResistConfig, default_kernels, load_kernels, print_image, save_kernels
from .mbopc import OpcConfig, correct_image
from .metrics import MetricConfig, evaluate
from .pipeline import PipelineConfig, generate_dataset
from .raster import rasterize, read_pgm, write_pgm

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SIM = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}") from None


def _rect(text: str, flag: str) -> Rect:
    try:
        vals = _ints(text)
        if len(vals) != 4:
            raise ValueError(f"expected x0,y0,x1,y1, got {text!r}")
        return Rect(*vals)
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from None


# Every tunable: key -> (parser, default). Flags share these names.
SETTINGS: dict[str, tuple] = {
    "seed": (int, 0),
    "workers": (int, 1),
    "sigma": (float, 10.0),
    "modes": (int, 1),
    "alpha": (float, 50.0),
    "ith": (float, 0.225),
    "threshold": (float, 0.5),
    "dose": (float, 1.0),
    "dose-min": (float, 0.98),
    "dose-max": (float, 1.02),
    "ilt-iters": (int, 200),
    "ilt-step": (float, 1.0),
    "wl2": (float, 1.0),
    "wpvb": (float, 0.025),
    "beta": (float, 4.0),
    "stop-tol": (float, 0.0),
    "opc-iters": (int, 20),
    "gain": (float, 0.5),
    "fraglen": (int, 40),
    "max-offset": (int, 40),
    "epe-constraint": (int, 15),
    "epe-spacing": (int, 40),
    "core-size": (int, 512),
    "contexts": (_ints, (0, 16, 32, 64, 128)),
    "canvas": (int, 2048),
    "layers": (lambda s: tuple(Layer(t) for t in s.split(",")), (Layer.METAL, Layer.VIA)),
}


def read_config_file(path: str) -> dict:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"--config {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lstrip("-").replace("_", "-")
        if not sep or key not in SETTINGS:
            raise UsageError(f"{path}:{n}: unknown or malformed setting {line!r}")
        try:
            out[key] = SETTINGS[key][0](value.strip())
        except ValueError as exc:
            raise UsageError(f"{path}:{n}: bad value for {key}: {exc}") from None
    return out


def effective_settings(args: argparse.Namespace) -> dict:
    eff = {k: default for k, (_, default) in SETTINGS.items()}
    if args.config:
        eff.update(read_config_file(args.config))
    for key in SETTINGS:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            eff[key] = val
    return eff


def build_configs(s: dict) -> dict:
    """Validated module configs; raises UsageError naming the setting at fault."""
    try:
        resist = ResistConfig(alpha=s["alpha"], i_th=s["ith"], print_threshold=s["threshold"])
        dose = DoseSpec(nominal=1.0, min_dose=s["dose-min"], max_dose=s["dose-max"])
        ilt = IltConfig(max_iters=s["ilt-iters"], step_size=s["ilt-step"], weight_l2=s["wl2"],
                        weight_pvb=s["wpvb"], beta=s["beta"], dose=dose, resist=resist, stop_tol=s["stop-tol"])
        opc = OpcConfig(fragment_len=s["fraglen"], max_iters=s["opc-iters"], gain=s["gain"],
                        max_offset=s["max-offset"])
        metric = MetricConfig(epe_constraint=s["epe-constraint"], epe_spacing=s["epe-spacing"], dose=dose)
        clip_cfg = ClipConfig(core_size=s["core-size"], contexts=tuple(s["contexts"]), layers=tuple(s["layers"]))
        pipe = PipelineConfig(clip=clip_cfg, canvas_size=s["canvas"], resist=resist, ilt=ilt, opc=opc,
                              workers=s["workers"], seed=s["seed"])
        if s["sigma"] <= 0 or s["modes"] < 1:
            raise ValueError("sigma must be > 0 and modes >= 1")
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    return dict(resist=resist, dose=dose, ilt=ilt, opc=opc, metric=metric, clip=clip_cfg, pipeline=pipe)


def format_settings(s: dict) -> str:
    def fmt(v):
        if isinstance(v, tuple):
            return ",".join(x.value if isinstance(x, Layer) else str(x) for x in v)
        return str(v)
    return "".join(f"{k}={fmt(s[k])}\n" for k in sorted(s))


# --------------------------------------------------------------------------- helpers

def _kernels(args, s) -> KernelSet:
    if getattr(args, "kernels", None):
        return load_kernels(args.kernels)
    return default_kernels(s["sigma"], s["modes"])


def _read_layout(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    try:
        return parse_layout(text)
    except DataError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def _read_image(path: str, what: str) -> np.ndarray:
    try:
        return read_pgm(path)
    except OSError as exc:
        raise DataError(f"{what} {path}: {exc.strerror}") from None


def _history_stream(path):
    return open(path, "w", newline="", encoding="utf-8") if path else sys.stdout


# --------------------------------------------------------------------------- subcommands

def cmd_simulate(args, s, cfgs):
    mask = _read_image(args.mask, "--mask")
    z = print_image(mask, _kernels(args, s), cfgs["resist"], dose=s["dose"])
    write_pgm(args.out, z)


def cmd_ilt(args, s, cfgs):
    target = _read_image(args.target, "--target")
    res = optimize(target, _kernels(args, s), cfgs["ilt"], seed=s["seed"])
    write_pgm(args.out, res.mask)
    fh = _history_stream(args.history)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "l2", "pvb"])
        w.writerow([0, repr(res.initial[0]), repr(res.initial[1])])
        for it, l2, pv in res.loss_history:
            w.writerow([it, repr(l2), repr(pv)])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_opc(args, s, cfgs):
    target = _read_image(args.target, "--target")
    mask, trace, _ = correct_image(target, _kernels(args, s), cfgs["resist"], cfgs["opc"])
    write_pgm(args.out, mask)
    fh = _history_stream(args.history)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "mean_abs_epe"])
        for i, v in enumerate(trace):
            w.writerow([i, repr(v)])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_eval(args, s, cfgs):
    mask = _read_image(args.mask, "--mask")
    layout = _read_layout(args.layout)
    core = _rect(args.core, "--core")
    window = _rect(args.window, "--window") if args.window else core
    if mask.shape != (window.height, window.width):
        raise DataError(f"--mask {args.mask}: image is {mask.shape[1]}x{mask.shape[0]}, "
                        f"window {window.as_tuple()} needs {window.width}x{window.height}")
    if not window.contains(core):
        raise DataError(f"--core {args.core} is not inside --window {args.window}")
    shapes = clip(layout, window, Layer(args.layer))
    local_core = core.translate(-window.x0, -window.y0)
    report = evaluate(mask, shapes, local_core, _kernels(args, s), cfgs["resist"], cfgs["metric"])
    out = report.as_dict()
    out.update(core=list(core.as_tuple()), window=list(window.as_tuple()), layer=args.layer,
               epe_constraint=cfgs["metric"].epe_constraint, epe_spacing=cfgs["metric"].epe_spacing,
               resist=asdict(cfgs["resist"]))
    text = json.dumps(out, sort_keys=True) + "\n"
    if args.json_out:
        Path(args.json_out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_clip(args, s, cfgs):
    layout = _read_layout(args.layout)
    window = _rect(args.window, "--window")
    shapes = clip(layout, window, Layer(args.layer))
    if args.out:
        write_pgm(args.out, rasterize(shapes, window))
    for p in shapes:
        sys.stdout.write(" ".join(f"{x} {y}" for x, y in p.vertices) + "\n")


def _read_cells(arg: str) -> list[str]:
    if arg.startswith("@"):
        try:
            text = Path(arg[1:]).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"--cells {arg}: {exc.strerror}") from None
        return [t for t in text.replace(",", " ").split() if t]
    return [t.strip() for t in arg.split(",") if t.strip()]


def cmd_dataset_gen(args, s, cfgs):
    layout = _read_layout(args.layout)
    cells = _read_cells(args.cells) if args.cells else list(layout.cells)
    kernels = _kernels(args, s)
    source = Path(args.kernels).name if args.kernels else f"synthetic(sigma={s['sigma']},modes={s['modes']})"
    man = generate_dataset(layout, cells, cfgs["pipeline"], args.out, kernels,
                           design_name=args.design, kernel_source=source)
    counts = ", ".join(f"{k}={v}" for k, v in sorted(man.counts.items()))
    sys.stderr.write(f"wrote {len(man.records)} tiles ({counts}) to {args.out}\n")


def cmd_kernels(args, s, cfgs):
    save_kernels(args.out, default_kernels(s["sigma"], s["modes"]))


# --------------------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_FLAG_TYPES = {"contexts": str, "layers": str}


def _add_settings(p, keys):
    for key in keys:
        parser = SETTINGS[key][0]
        p.add_argument(f"--{key}", type=_FLAG_TYPES.get(key, parser), default=None, metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--dump-config", action="store_true", help="print effective settings and exit")
    _add_settings(common, ["seed", "workers", "sigma", "modes", "alpha", "ith", "threshold"])
    common.add_argument("--kernels", help="LKRN kernel file (default: synthetic Gaussian set)")

    ap = _Parser(prog="maskforge", description="Lithography mask synthesis and dataset generation.")
    ap.add_argument("--version", action="version", version=f"maskforge {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="print image of a mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    _add_settings(p, ["dose"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ilt", parents=[common], help="pixel ILT for a target image")
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", dest="ilt_iters", type=int)
    p.add_argument("--step", dest="ilt_step", type=float)
    p.add_argument("--history", help="loss history CSV (default: stdout)")
    _add_settings(p, ["wl2", "wpvb", "beta", "stop-tol", "dose-min", "dose-max"])
    p.set_defaults(func=cmd_ilt)

    p = sub.add_parser("opc", parents=[common], help="model-based OPC for a target image")
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", dest="opc_iters", type=int)
    p.add_argument("--history", help="EPE trace CSV (default: stdout)")
    _add_settings(p, ["gain", "fraglen", "max-offset"])
    p.set_defaults(func=cmd_opc)

    p = sub.add_parser("eval", parents=[common], help="L2, EPE, PVB and shot count of a mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--core", required=True, help="x0,y0,x1,y1")
    p.add_argument("--window", help="x0,y0,x1,y1 covered by the mask image (default: core)")
    p.add_argument("--layer", default="metal", choices=[l.value for l in Layer])
    p.add_argument("--json-out")
    _add_settings(p, ["epe-constraint", "epe-spacing", "dose-min", "dose-max"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("clip", parents=[common], help="clip a layer to a window")
    p.add_argument("--layout", required=True)
    p.add_argument("--window", required=True, help="x0,y0,x1,y1")
    p.add_argument("--layer", default="metal", choices=[l.value for l in Layer])
    p.add_argument("--out", help="PGM of the rasterized clip")
    p.set_defaults(func=cmd_clip)

    p = sub.add_parser("dataset-gen", parents=[common], help="generate a tile dataset")
    p.add_argument("--layout", required=True)
    p.add_argument("--cells", help="comma list or @file (default: every cell)")
    p.add_argument("--out", required=True)
    p.add_argument("--design", default="design")
    _add_settings(p, ["contexts", "core-size", "canvas", "layers", "ilt-iters", "ilt-step", "wl2", "wpvb",
                      "beta", "stop-tol", "opc-iters", "gain", "fraglen", "max-offset", "dose-min", "dose-max"])
    p.set_defaults(func=cmd_dataset_gen)

    p = sub.add_parser("kernels", parents=[common], help="write a synthetic kernel file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kernels)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        for key in ("contexts", "layers"):
            raw = getattr(args, key, None)
            if isinstance(raw, str):
                try:
                    setattr(args, key, SETTINGS[key][0](raw))
                except ValueError as exc:
                    raise UsageError(f"--{key}: {exc}") from None
        settings = effective_settings(args)
        cfgs = build_configs(settings)
        if args.dump_config:
            sys.stdout.write(format_settings(settings))
            return EXIT_OK
        args.func(args, settings, cfgs)
    except UsageError as exc:
        sys.stderr.write(f"maskforge: error: {exc}\n")
        return EXIT_USAGE
    except (DivergenceError, OpcError) as exc:
        sys.stderr.write(f"maskforge: simulation failed: {exc}\n")
        return EXIT_SIM
    except (DataError, ResourceError) as exc:
        sys.stderr.write(f"maskforge: {exc}\n")
        return EXIT_DATA
    except OSError as exc:
        name = exc.filename if exc.filename else ""
        sys.stderr.write(f"maskforge: {name}: {exc.strerror or exc}\n")
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
