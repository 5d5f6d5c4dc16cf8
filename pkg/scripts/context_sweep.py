"""Generate the demo dataset and tabulate mask quality against context size.

Runs dataset generation through the CLI (so the configuration is exactly
what ``maskforge dataset-gen`` would see), evaluates every ground-truth mask
and writes one CSV per mask family.
"""
import argparse
import time
from pathlib import Path

from maskforge.cli import build_configs, effective_settings, main as cli_main, build_parser
from maskforge.demo import demo_layout_text
from maskforge.litho import default_kernels
from maskforge.pipeline import MANIFEST, context_sweep_report, evaluate_dataset, load_manifest, verify_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(Path(__file__).resolve().parents[1] / "configs" / "smoke64.cfg"))
    ap.add_argument("--out", default="runs/context_sweep")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--context-fill", choices=["target", "zero"], default="target")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = ["dataset-gen", "--config", args.config, "--out", str(out / "dataset"), "--layout", ""]
    settings = effective_settings(build_parser().parse_args(base))
    cfgs = build_configs(settings)
    layout = out / "demo.txt"
    layout.write_text(demo_layout_text(settings["core-size"]))
    base[-1] = str(layout)

    t0 = time.perf_counter()
    code = cli_main(base + ["--design", "demo", "--workers", str(args.workers)])
    if code:
        raise SystemExit(code)
    print(f"generation: {time.perf_counter() - t0:.1f} s")
    violations = verify_dataset(out / "dataset" / MANIFEST)
    print(f"verify: {len(violations)} violations")

    kernels = default_kernels(settings["sigma"], settings["modes"])
    man = load_manifest(out / "dataset" / MANIFEST)
    for family in ("opc", "ilt"):
        metrics = evaluate_dataset(out / "dataset" / MANIFEST, kernels, family, cfgs["resist"], cfgs["metric"],
                                   context_fill=args.context_fill)
        report = context_sweep_report(man, metrics)
        (out / f"context_sweep_{family}.csv").write_text(report)
        print(f"\n{family}\n{report}")


if __name__ == "__main__":
    main()
