#!/usr/bin/env python3
"""Render a multi-panel sweep figure from aggregate CSVs.

    python plots/render_sweeps.py --panels beta_a.csv beta_xstar.csv target_mr.csv \
        --out fig2.png [--labels "genuine modification" ...] [--dump-data fig2.json]
"""
import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from figlib import ColumnError, PanelSpec, build_sweep_figure, save_figure

DEFAULT_LABELS = {
    "beta_a": "effect of the agent on the true feature",
    "beta_xstar": "effect of the true feature on the outcome",
    "target_mr": "true misreporting rate",
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--panels", nargs="+", required=True)
    parser.add_argument("--labels", nargs="*", default=None)
    parser.add_argument("--out", required=True)
    parser.add_argument("--dump-data", default=None,
                        help="write the plotted values as JSON")
    args = parser.parse_args(argv)

    labels = args.labels
    if labels and len(labels) != len(args.panels):
        parser.error("--labels must match --panels")
    specs = []
    for i, path in enumerate(args.panels):
        stem = Path(path).stem
        label = labels[i] if labels else DEFAULT_LABELS.get(stem, stem)
        specs.append(PanelSpec(csv_path=path, x_label=label))
    try:
        fig, backing = build_sweep_figure(specs)
    except ColumnError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    save_figure(fig, args.out)
    if args.dump_data:
        Path(args.dump_data).write_text(json.dumps(backing, indent=2))
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
