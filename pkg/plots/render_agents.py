#!/usr/bin/env python3
"""Render a grouped per-agent bar chart with CI whiskers.

    python plots/render_agents.py --in agents.csv --out fig3.png [--dump-data fig3.json]
"""
import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from figlib import ColumnError, build_agent_figure, save_figure


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="infile", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--dump-data", default=None)
    args = parser.parse_args(argv)
    try:
        fig, backing = build_agent_figure(args.infile)
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
