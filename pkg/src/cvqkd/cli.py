"""Command-line front end: ``cvqkd rate | scan | xi-max | optimize-va | dump | estimate``.

Every flag can also be given in a JSON file passed with ``--config``; keys are
the long flag names with dashes or underscores. Flags override the file.
"""

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import estimation, keyrate, scans


def parse_grid(text):
    """``"1,2,5"`` -> [1, 2, 5]; ``"0:100:5"`` -> inclusive range with step 5."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(x) for x in text]
    text = str(text).strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError(f"range {text!r} must read start:stop:step with step > 0 and stop >= start")
        start, stop, step = parts
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_pair(text):
    vals = parse_grid(text)
    if len(vals) != 2:
        raise ValueError(f"expected two values lo,hi, got {text!r}")
    return tuple(vals)


def _common(p):
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--modulation", help="psk:M,alpha | qam-bin:m,Va | qam-dg:m,Va,nu | gauss:Va | file:PATH")
    ch = p.add_mutually_exclusive_group()
    ch.add_argument("--distance-km", help="distance(s) in km: value, list a,b,c or range start:stop:step")
    ch.add_argument("--transmittance", help="transmittance(s) T in (0, 1]; same syntax as --distance-km")
    p.add_argument("--xi", help="excess noise (shot-noise units)")
    p.add_argument("--beta", type=float, help=f"reconciliation efficiency (default {scans.DEFAULT_BETA})")
    p.add_argument("--detection", choices=keyrate.DETECTIONS)
    p.add_argument("--mutual-info", type=float, help="override I(X;Y) in bits (required for homodyne)")
    p.add_argument("--dim", type=int, help="Fock truncation override")
    p.add_argument("--workers", type=int, help="threads for grid evaluation")
    p.add_argument("--out", help="write results here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"))


def build_parser():
    parser = argparse.ArgumentParser(prog="cvqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    kw = {"argument_default": argparse.SUPPRESS}

    p = sub.add_parser("rate", help="key rate at one channel point", **kw)
    _common(p)

    p = sub.add_parser("scan", help="key rate over a grid of d, T, V_A or alpha", **kw)
    _common(p)
    p.add_argument("--va-grid", help="modulation variances to sweep")
    p.add_argument("--alpha-grid", help="PSK amplitudes to sweep")

    p = sub.add_parser("xi-max", help="largest excess noise with a positive key rate", **kw)
    _common(p)
    p.add_argument("--optimize-va", action="store_true", help="maximise over V_A at each point")
    p.add_argument("--va-bracket", help="lo,hi for the V_A search (default 0.05,20)")

    p = sub.add_parser("optimize-va", help="V_A maximising the key rate", **kw)
    _common(p)
    p.add_argument("--va-bracket", help="lo,hi for the V_A search (default 0.05,20)")

    p = sub.add_parser("dump", help="write a constellation as re,im,prob", **kw)
    _common(p)

    p = sub.add_parser("estimate", help="simulate heterodyne data and estimate the key rate", **kw)
    _common(p)
    p.add_argument("--samples", type=int, help="number of channel uses")
    p.add_argument("--seed", type=int, help="RNG seed (required)")
    p.add_argument("--chunks", type=int, help="split sampling over this many sub-streams")
    p.add_argument("--batch-in", help="read outcomes from a k,re_beta,im_beta CSV instead of sampling")
    p.add_argument("--batch-out", help="also write the sampled outcomes as CSV")
    p.add_argument("--worst-case", action="store_true", help="apply finite-size penalties")
    p.add_argument("--kappa", type=float, help="penalty constant (required with --worst-case)")
    p.add_argument("--eps-pe", type=float, help="parameter-estimation failure probability (default 1e-10)")
    return parser


DEFAULTS = {
    "beta": scans.DEFAULT_BETA,
    "detection": keyrate.HETERODYNE,
    "format": "csv",
    "workers": 1,
    "xi": "0",
    "eps_pe": 1e-10,
    "chunks": 1,
    "optimize_va": False,
    "worst_case": False,
}


def merged_options(args):
    """Defaults, then the config file, then explicit flags."""
    opts = dict(DEFAULTS)
    given = vars(args)
    if "config" in given:
        with open(given["config"]) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("config file must hold a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in doc.items()})
    opts.update(given)
    if "modulation" not in opts:
        raise ValueError("--modulation is required (flag or config file)")
    return opts


def make_config(opts):
    grid = lambda key: parse_grid(opts[key]) if opts.get(key) is not None else None  # noqa: E731
    return scans.ScanConfig(
        modulation=opts["modulation"],
        distances=grid("distance_km"),
        transmittances=grid("transmittance"),
        xi=parse_grid(opts["xi"]),
        beta=float(opts["beta"]),
        detection=opts["detection"],
        dim=opts.get("dim"),
        va_grid=grid("va_grid"),
        alpha_grid=grid("alpha_grid"),
        optimize_va=bool(opts["optimize_va"]),
        va_bracket=parse_pair(opts["va_bracket"]) if opts.get("va_bracket") else scans.VA_BRACKET,
        mutual_info=opts.get("mutual_info"),
        workers=int(opts["workers"]),
    )


@dataclass(frozen=True)
class EstimateRow:
    n: int
    seed: int
    c1: float
    c2: float
    nB: float
    K: float
    chi: float
    mutual_info: float
    Z_low: float
    Z_high: float
    kappa: float
    eps_pe: float


def run_estimate(cfg, opts):
    if cfg.mod.kind in ("gauss", "file"):
        raise ValueError("estimate needs a finite coherent constellation (psk, qam-bin or qam-dg)")
    if opts.get("seed") is None:
        raise ValueError("estimate needs an explicit --seed")
    worst = bool(opts["worst_case"])
    if worst and opts.get("kappa") is None:
        raise ValueError("--worst-case needs --kappa; the penalty constant has no default")
    an = scans.analysis_for(cfg.mod, cfg.dim)
    c = an.constellation
    seed = int(opts["seed"])
    if opts.get("batch_in"):
        batch = estimation.read_batch_csv(opts["batch_in"], seed)
    else:
        if opts.get("samples") is None:
            raise ValueError("estimate needs --samples (or --batch-in)")
        pts = cfg.channel_points()
        if len(pts) != 1 or len(cfg.xi) != 1:
            raise ValueError("estimate simulates one channel point and one xi")
        _, T = pts[0]
        n, chunks = int(opts["samples"]), int(opts["chunks"])
        if chunks > 1:
            batch = estimation.sample_channel_split(c, T, cfg.xi[0], n, seed, chunks)
        else:
            batch = estimation.sample_channel(c, T, cfg.xi[0], n, seed)
    if opts.get("batch_out"):
        estimation.write_batch_csv(batch, opts["batch_out"])
    stats = estimation.empirical_stats(batch, an)
    kappa, eps = 0.0, float(opts["eps_pe"])
    if worst:
        kappa = float(opts["kappa"])
        stats = estimation.worst_case(stats, batch.n, eps, kappa).as_stats()
    r = keyrate.key_rate_from_stats(an, stats, cfg.beta, cfg.detection, cfg.mutual_info)
    return EstimateRow(batch.n, seed, stats.c1, stats.c2, stats.nB, r.K, r.chi, r.mutual_info,
                       r.z_low, r.z_high, kappa, eps)


def run(argv=None):
    """Execute a command; returns (rendered text, whether it went to --out)."""
    args = build_parser().parse_args(argv)
    opts = merged_options(args)
    cfg = make_config(opts)
    cmd = args.command
    header = None
    if cmd == "rate":
        rows = [scans.cmd_rate(cfg)]
    elif cmd == "scan":
        rows = scans.cmd_scan(cfg)
    elif cmd == "xi-max":
        rows = scans.cmd_xi_max(cfg)
    elif cmd == "optimize-va":
        rows, header = [scans.cmd_optimize_va(cfg)], ["V_A_opt", "K_opt"]
    elif cmd == "dump":
        rows, header = scans.cmd_dump_constellation(cfg), ["re", "im", "prob"]
    else:
        rows = [run_estimate(cfg, opts)]
    text = scans.to_json(rows, header) if opts["format"] == "json" else scans.to_csv(rows, header)
    if opts.get("out"):
        with open(opts["out"], "w", newline="") as fh:
            fh.write(text)
        return text, True
    return text, False


def main(argv=None):
    try:
        text, wrote = run(argv)
    except (ValueError, OSError) as exc:
        print(f"cvqkd: error: {exc}", file=sys.stderr)
        return 2
    if not wrote:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
