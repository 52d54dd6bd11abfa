"""Command-line entry point: ``simulate --config run.ini [overrides]``."""

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import SCHEMES, SimConfig, load_config
from .errors import ConfigError, OutputError, SimulationError
from .harness import emit_results, place_drop, preflight_output, run_experiment, summarize
from .topology import build_grid

OUTPUT_ENV = "MMIMO_U_OUTPUT_DIR"

log = logging.getLogger("mmimo_u")


def _int_list(text):
    try:
        values = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _scheme_list(text):
    values = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [v for v in values if v not in SCHEMES]
    if bad or not values:
        raise argparse.ArgumentTypeError(
            f"unknown scheme(s) {', '.join(bad) or text!r}; choose from {', '.join(SCHEMES)}")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Monte-Carlo coexistence study of massive-MIMO cells and Wi-Fi "
                    "in unlicensed spectrum.")
    p.add_argument("--config", required=True, type=Path,
                   help="INI file; missing keys take their defaults (an empty file is valid)")
    p.add_argument("--scheme", type=_scheme_list,
                   help=f"comma-separated subset of {','.join(SCHEMES)}")
    p.add_argument("--antennas", type=_int_list, help="antenna counts, e.g. 32,64,128")
    p.add_argument("--drops", type=int, help="Monte-Carlo drops per antenna count")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    p.add_argument("--out", type=Path,
                   help=f"output directory (default: ${OUTPUT_ENV}, then run.output_dir)")
    p.add_argument("--dump-layout", action="store_true",
                   help="also write the node layout of every drop as JSON")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress output")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def resolve_config(args) -> SimConfig:
    cfg = load_config(args.config)
    run = {}
    for key, attr in (("schemes", "scheme"), ("antennas", "antennas"), ("drops", "drops"),
                      ("seed", "seed"), ("workers", "workers")):
        value = getattr(args, attr)
        if value is not None:
            run[key] = value
    out = args.out or os.environ.get(OUTPUT_ENV)
    if out:
        run["output_dir"] = str(out)
    return cfg.replace(run=run) if run else cfg


def dump_layouts(cfg: SimConfig, out_dir: Path) -> None:
    grid = build_grid(cfg.scenario.inter_site_distance, cfg.scenario.rings)
    folder = out_dir / "layouts"
    folder.mkdir(exist_ok=True)
    for drop in range(cfg.run.drops):
        nodes, _, _ = place_drop(cfg, grid, drop)
        (folder / f"drop_{drop:05d}.json").write_text(nodes.to_json() + "\n", encoding="utf-8")


def _progress(done, total):
    if done == total or done % max(total // 20, 1) == 0:
        print(f"  {done}/{total} drops", file=sys.stderr, flush=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out_dir = preflight_output(cfg.run.output_dir)
        if args.dump_layout:
            dump_layouts(cfg, out_dir)
        result = run_experiment(cfg, progress=None if args.quiet else _progress)
        files = emit_results(result, out_dir)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return OutputError.exit_code
    if not args.quiet:
        summary = summarize(result)
        for n, entry in summary["antennas"].items():
            for name, r in entry["fig4"].items():
                print(f"N={n:>4} {name:<10} cellular {r['cellular_mbps']:7.1f} Mbps"
                      f"  wifi {r['wifi_mbps']:6.1f} Mbps")
        print(f"wrote {len(files)} files to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
