"""Write the constructed demo placement (3 cell types, 7 instances) as a layout file."""
import argparse

from maskforge.demo import demo_layout_text, expected_cores


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--core-size", type=int, default=512, help="core size the geometry is scaled to")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(demo_layout_text(args.core_size))
    print(f"wrote {args.out}: {expected_cores(args.core_size)} cores per layer at core size {args.core_size}")


if __name__ == "__main__":
    main()
