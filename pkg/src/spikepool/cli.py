"""Command-line entry points: proof-of-concept traces, tuning sweeps, network runs
and neuro-core planning, written as CSV or JSON.

Settings resolve as command-line flags, then ``--config`` file, then built-in
defaults. The seed additionally falls back to ``SPIKEPOOL_SEED``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .avam import build_avam_tree
from .errors import InfeasibleMappingError, SpikePoolError
from .heuristics import (
    DEFAULT_GRIDS,
    SweepConfig,
    evaluate_sweep,
    resolve_distribution,
)
from .mjop import MjopNet
from .network import (
    argmax_class,
    load_bundle,
    random_graph,
    rate_forward,
    relative_error,
    save_bundle,
    spiking_forward,
)
from .pooling import Layout, PoolMethod, PoolParams, PoolSpec, TensorShape, plan_core_map
from .sim import SynapseFilter, TimeBase, filter_spikes, periodic_trains


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).replace("x", ",").split(",") if v.strip()]


def _methods(text):
    items = text if isinstance(text, (list, tuple)) else str(text).split(",")
    return [PoolMethod(str(m).strip().lower().replace("-", "_")) for m in items if str(m).strip()]


# name -> (converter, help). Every option is also a valid config-file key.
OPTIONS = {
    "dt": (float, "simulation step in seconds"),
    "steps": (int, "number of time steps"),
    "tau_in": (float, "input synapse time constant (s)"),
    "tau_out": (float, "output synapse time constant (s)"),
    "tau_e": (float, "ensemble output synapse time constant (s)"),
    "scale": (float, "MJOP output scale"),
    "radius": (_floats, "AVAM radius, or a comma-separated list"),
    "phi": (float, "AVAM max firing rate (Hz)"),
    "seed": (int, "random seed"),
    "out": (str, "output path"),
    "format": (str, "csv or json"),
    "dist": (str, "ISI distribution: 'light', 'fat' or a CSV histogram path"),
    "bundle": (str, "weight bundle manifest path"),
    "periods": (_ints, "input spike periods, comma-separated"),
    "method": (str, "pooling method to sweep: mjop or avam"),
    "grid": (_floats, "sweep grid, comma-separated"),
    "groups": (int, "number of sampled ISI groups"),
    "group_size": (int, "ISIs per group (pooling window size)"),
    "methods": (_methods, "pooling methods for run-net, comma-separated"),
    "inputs": (str, "CSV of input vectors (one per row)"),
    "n_inputs": (int, "number of random inputs when --inputs is absent"),
    "shape": (_ints, "tensor shape C,H,W"),
    "window": (_ints, "pooling window r,c"),
    "capacity": (int, "compartments per neuro-core"),
    "layout": (str, "channels_first or channels_last"),
}

COMMON = ("dt", "steps", "seed", "out", "format")

COMMANDS = {
    "poc-mjop": {
        "help": "MJOP net on four periodic inputs; trace file",
        "options": COMMON + ("tau_in", "tau_out", "scale", "periods"),
        "defaults": {"steps": 300, "tau_in": 0.005, "tau_out": 0.005, "scale": 1.1,
                     "periods": [10, 8, 4, 6]},
    },
    "poc-avam": {
        "help": "AVAM net on four periodic inputs, one output column per radius",
        "options": COMMON + ("tau_in", "tau_e", "radius", "phi", "periods"),
        "defaults": {"steps": 300, "tau_in": 0.005, "tau_e": 0.001, "phi": 500.0,
                     "radius": [0.20, 0.25, 0.30], "periods": [10, 8, 4, 6]},
    },
    "sweep": {
        "help": "scale/radius sweep over sampled ISI groups; scatter and summary files",
        "options": COMMON + ("tau_in", "tau_out", "tau_e", "phi", "dist", "method", "grid",
                             "groups", "group_size"),
        "defaults": {"steps": 300, "tau_in": 0.005, "tau_out": 0.005, "tau_e": 0.001,
                     "phi": 500.0, "dist": "light", "method": "avam", "grid": None,
                     "groups": 256, "group_size": 4},
    },
    "run-net": {
        "help": "rate-model and spiking scores of a weight bundle per pooling method",
        "options": COMMON + ("bundle", "inputs", "n_inputs", "methods", "scale", "radius",
                             "phi", "tau_e", "tau_out"),
        "defaults": {"steps": 400, "n_inputs": 20, "methods": [PoolMethod.TRUE_MAX, PoolMethod.AVAM],
                     "scale": 1.0, "radius": [0.25], "phi": 500.0, "tau_e": 0.001,
                     "tau_out": 0.005},
    },
    "plan-cores": {
        "help": "assign pooling inputs to neuro-cores; JSON core map",
        "options": ("out", "format", "shape", "window", "capacity", "layout"),
        "defaults": {"format": "json", "shape": [1, 32, 32], "window": [2, 2],
                     "capacity": 1024, "layout": "channels_first"},
    },
    "make-bundle": {
        "help": "write a small random weight bundle (for trying run-net)",
        "options": ("seed", "out"),
        "defaults": {},
    },
}

BASE_DEFAULTS = {"dt": 0.001, "seed": 0, "format": "csv"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikepool", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"], description=spec["help"])
        p.add_argument("--config", help="flat key = value config file (or a JSON output file)")
        for opt in spec["options"]:
            conv, text = OPTIONS[opt]
            p.add_argument("--" + opt.replace("_", "-"), dest=opt, type=conv, default=None, help=text)
    return parser


def read_config(path) -> dict:
    """Parse a config file into converted option values.

    Accepts ``key = value`` lines (``#`` comments, dashes or underscores in
    keys) or a JSON object, including the ``config`` block of a JSON output.
    """
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
        raw = raw.get("config", raw)
    else:
        raw = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected 'key = value'")
            key, value = line.split("=", 1)
            raw[key.strip()] = value.strip()
    out = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        if key == "command":
            continue
        if key not in OPTIONS:
            raise ValueError(f"{path}: unknown config key {key!r}")
        if value is None:
            continue
        out[key] = OPTIONS[key][0](value)
    return out


def resolve(args: argparse.Namespace) -> dict:
    spec = COMMANDS[args.command]
    cfg = dict(BASE_DEFAULTS)
    cfg.update(spec["defaults"])
    if "seed" in spec["options"] and os.environ.get("SPIKEPOOL_SEED"):
        cfg["seed"] = int(os.environ["SPIKEPOOL_SEED"])
    if args.config:
        cfg.update({k: v for k, v in read_config(args.config).items() if k in spec["options"]})
    cfg.update({k: v for k, v in vars(args).items() if k in spec["options"] and v is not None})
    cfg = {k: v for k, v in cfg.items() if k in spec["options"]}
    if cfg.get("format", "csv") not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {cfg['format']!r}")
    if "out" in spec["options"] and not cfg.get("out"):
        raise ValueError("--out is required")
    return cfg


def _jsonable(value):
    if isinstance(value, PoolMethod):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def recorded_config(config: dict) -> dict:
    """Run settings echoed into JSON output; the destination path is left out."""
    return {k: _jsonable(v) for k, v in config.items() if k != "out"}


def render(columns, rows, fmt: str, config: dict) -> str:
    if fmt == "json":
        doc = {"config": recorded_config(config), "columns": list(columns),
               "rows": [[_jsonable(v) for v in row] for row in rows]}
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf)  # RFC 4180: CRLF line ends, minimal quoting
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_atomic(path, text: str):
    """Write ``text`` so that ``path`` either appears complete or not at all."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def sibling(path, tag: str) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_{tag}{path.suffix}")


def _timebase(cfg) -> TimeBase:
    return TimeBase(int(cfg["steps"]), float(cfg["dt"]))


def _poc_inputs(cfg, tb):
    periods = cfg["periods"]
    trains = periodic_trains(periods, tb)
    currents = filter_spikes(trains, SynapseFilter(cfg["tau_in"]), tb)
    cols = [f"U{i + 1}" for i in range(len(periods))]
    return trains, currents, cols


def cmd_poc_mjop(cfg) -> dict:
    tb = _timebase(cfg)
    trains, currents, ucols = _poc_inputs(cfg, tb)
    net = MjopNet.build(len(cfg["periods"]), cfg["scale"], dt=tb.dt)
    trace = net.simulate(trains, SynapseFilter(cfg["tau_in"]), SynapseFilter(cfg["tau_out"]), tb)
    columns = ["t"] + ucols + ["true_max", "avg", "u_out", "scaled_u_out"]
    data = np.column_stack([currents, currents.max(1), currents.mean(1), trace.u_out, trace.scaled])
    rows = [[t] + list(r) for t, r in enumerate(data)]
    return {cfg["out"]: render(columns, rows, cfg["format"], cfg)}


def radius_column(r: float) -> str:
    return f"u_out_r{r:g}"


def cmd_poc_avam(cfg) -> dict:
    tb = _timebase(cfg)
    _, currents, ucols = _poc_inputs(cfg, tb)
    outs = []
    for r in cfg["radius"]:
        net = build_avam_tree(len(cfg["periods"]), cfg["phi"], r, tau_e=cfg["tau_e"])
        outs.append(net.evaluate(currents, tb).output)
    columns = ["t"] + ucols + ["true_max", "avg"] + [radius_column(r) for r in cfg["radius"]]
    data = np.column_stack([currents, currents.max(1), currents.mean(1)] + outs)
    rows = [[t] + list(r) for t, r in enumerate(data)]
    return {cfg["out"]: render(columns, rows, cfg["format"], cfg)}


def cmd_sweep(cfg) -> dict:
    method = PoolMethod(cfg["method"].lower())
    grid = cfg["grid"] or list(DEFAULT_GRIDS.get(method, ()))
    sc = SweepConfig(
        dist=resolve_distribution(cfg["dist"]), grid=tuple(grid), n_groups=cfg["groups"],
        group_size=cfg["group_size"], seed=cfg["seed"], tb=_timebase(cfg),
        f_in=SynapseFilter(cfg["tau_in"]), f_out=SynapseFilter(cfg["tau_out"]),
        phi=cfg["phi"], tau_e=cfg["tau_e"])
    res = evaluate_sweep(sc, method)
    est_cols = [f"est_{res.param}_{v:g}" for v in res.grid]
    columns = ["group"] + [f"isi_{i + 1}" for i in range(sc.group_size)] + ["true_max", "avg"] + est_cols
    rows = [[g] + [int(v) for v in res.isis[g]] + [res.true_max[g], res.avg[g]] + list(res.estimates[:, g])
            for g in range(sc.n_groups)]
    summary_cols = ["method", "param", "value", "pearson_r", "slope", "corr_defined", "n_groups"]
    summary = [[method.value, res.param, v, c, s, bool(d), sc.n_groups]
               for v, c, s, d in zip(res.grid, res.correlations, res.slopes, res.correlation_defined)]
    return {
        cfg["out"]: render(columns, rows, cfg["format"], cfg),
        sibling(cfg["out"], "summary"): render(summary_cols, summary, cfg["format"], cfg),
    }


def _load_inputs(cfg, n_features):
    if cfg.get("inputs"):
        rows = []
        with open(cfg["inputs"], newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if row and not row[0].lstrip().startswith("#"):
                    rows.append([float(v) for v in row])
        xs = np.array(rows, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != n_features:
            raise SpikePoolError(f"inputs file must have {n_features} values per row")
        return xs
    rng = np.random.default_rng(cfg["seed"])
    return rng.uniform(-1.0, 1.0, (cfg["n_inputs"], n_features))


def cmd_run_net(cfg) -> dict:
    if not cfg.get("bundle"):
        raise ValueError("--bundle is required")
    graph = load_bundle(cfg["bundle"])
    xs = _load_inputs(cfg, graph.input_size)
    tb = _timebase(cfg)
    n = graph.n_classes
    params = PoolParams(f_in=SynapseFilter(graph.synapse_tau), scale=cfg["scale"],
                        f_out=SynapseFilter(cfg["tau_out"]), phi=cfg["phi"],
                        radius=cfg["radius"][0] if len(cfg["radius"]) == 1 else cfg["radius"],
                        tau_e=cfg["tau_e"])
    columns = (["input", "method", "rel_err", "rate_class", "spike_class", "agree"]
               + [f"rate_{i}" for i in range(n)] + [f"spike_{i}" for i in range(n)])
    rows, summary = [], []
    for method in cfg["methods"]:
        errs, agree = [], []
        for i, x in enumerate(xs):
            rate = rate_forward(graph, x, method)
            spike = spiking_forward(graph, x, tb, method, params).scores
            err = relative_error(spike, rate)
            a, b = argmax_class(rate), argmax_class(spike)
            errs.append(err)
            agree.append(a == b)
            rows.append([i, method.value, err, a, b, a == b] + list(rate) + list(spike))
        summary.append(["summary", method.value, float(np.mean(errs)), "", "", float(np.mean(agree))]
                       + [""] * (2 * n))
    return {cfg["out"]: render(columns, rows + summary, cfg["format"], cfg)}


def cmd_plan_cores(cfg) -> dict:
    shape = TensorShape(*cfg["shape"], Layout(cfg["layout"]))
    spec = PoolSpec(tuple(cfg["window"]))
    try:
        cmap = plan_core_map(shape, spec, cfg["capacity"])
    except InfeasibleMappingError as exc:
        print(f"spikepool: infeasible: {exc}", file=sys.stderr)
        report = {"feasible": False, "reason": str(exc), "n_cores": 0, "cores": []}
        cols, rows = ["core", "channel", "row_start", "row_stop", "col_start", "col_stop", "compartments"], []
    else:
        straddle = cmap.straddling_windows(shape, spec)
        report = dict(cmap.to_dict(), feasible=straddle == 0 and cmap.max_load <= cmap.capacity,
                      straddling_windows=straddle)
        cols = ["core", "channel", "row_start", "row_stop", "col_start", "col_stop", "compartments"]
        rows = [[a.core, a.channel, *a.rows, *a.cols, a.compartments] for a in cmap.assignments]
    if cfg["format"] == "json":
        text = json.dumps({"config": recorded_config(cfg), **report},
                          indent=1, allow_nan=False) + "\n"
    else:
        text = render(cols, rows, "csv", cfg)
    return {cfg["out"]: text}


def cmd_make_bundle(cfg) -> dict:
    path = Path(cfg["out"])
    save_bundle(random_graph(cfg["seed"]), path)
    return {}


HANDLERS = {
    "poc-mjop": cmd_poc_mjop,
    "poc-avam": cmd_poc_avam,
    "sweep": cmd_sweep,
    "run-net": cmd_run_net,
    "plan-cores": cmd_plan_cores,
    "make-bundle": cmd_make_bundle,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        outputs = HANDLERS[args.command](cfg)
        for path, text in outputs.items():
            write_atomic(path, text)
    except (SpikePoolError, ValueError, OSError) as exc:
        print(f"spikepool {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
