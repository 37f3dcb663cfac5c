"""Command-line front end.

Every command that writes a primary output also writes ``<out>.meta.json``.
The sidecar's ``config`` entry is a complete, replayable run configuration:
entropy drawn from live sources (OS entropy, timing jitter) is saved next to
the output and referenced as a file-replay source, so ``replay`` reproduces
the primary output byte for byte.

Exit status: 0 success / all tests pass, 1 a test failed, 2 some test was
not applicable and none failed, 3 usage, configuration or I/O error.
"""
from __future__ import annotations

import argparse
import copy
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import battery as bat
from .combiner import CombinerDescriptor, HybridGenerator, segment_index
from .errors import ConfigurationError, RandomnessError
from .fileio import atomic_output, read_bitstream, read_json, sidecar_path, write_bitstream, write_json
from .montecarlo import McTask, generator_label, compare_generators
from .prng import PrngDescriptor, PseudoGenerator
from .sources import EntropySourceDescriptor, open_source
from .streams import SymbolStream, symbols_to_bits

COMMANDS = ("generate", "test", "dice", "demo-defect", "demo-mc", "replay")
EXIT_ERROR = 3

DEFAULT_RS = {"kind": "os-entropy", "params": {}}
DEFAULT_SS = {"family": "mix64", "seed": 1}
# Demos pin their entropy too, so a default run prints the same table every time.
DEMO_RS = {"kind": "deterministic-test", "params": {"seed": 20240601}}

DEFECT_SEEDS = {"randu": 1, "mix64": 1}
DEFECT_COUNT = 10**6
DEFECT_LAGS = (1, 2)

MC_COUNT = 10**5
MC_GENERATORS = (
    {"family": "mix64", "seed": 42},
    {"family": "lcg", "a": 5, "c": 1, "modulus": 16, "seed": 0},
    {"preset": "randu", "seed": 1},
    {"mode": "digital-dice", "q": 2**32, "mix_rate": "1", "rs": DEMO_RS, "ss": {"preset": "randu", "seed": 1}},
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="primary output path")
    common.add_argument("--bits", type=int, help="number of bits to generate")
    common.add_argument("--count", type=int, help="number of symbols / samples")
    common.add_argument("--q", type=int, help="symbol alphabet size")
    common.add_argument("--mix-rate", help="fresh entropy draws per output, as P/K")
    common.add_argument("--significance", type=float, help="test significance level")
    common.add_argument("--format", choices=("raw", "ascii", "json", "csv"))
    common.add_argument("--seed", type=int, help="PRNG seed")
    common.add_argument("--preset", help="PRNG preset (randu, minstd)")

    parser = _Parser(prog="hybridrng", description="Hybrid random generation and randomness testing.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("generate", parents=[common], help="write a bitstream")
    p_test = sub.add_parser("test", parents=[common], help="run the test battery on a bitstream file")
    p_test.add_argument("input", nargs="?", help="bitstream file")
    p_test.add_argument("--input-mode", choices=("raw", "ascii"), help="bitstream file mode")
    sub.add_parser("dice", parents=[common], help="write digital-dice symbols")
    sub.add_parser("demo-defect", parents=[common], help="RANDU lattice defect vs mix64 vs hybrid")
    sub.add_parser("demo-mc", parents=[common], help="Monte Carlo generator comparison")
    p_replay = sub.add_parser("replay", parents=[common], help="re-run a command from its sidecar")
    p_replay.add_argument("sidecar", help="metadata sidecar written by an earlier run")
    return parser


# --- configuration -------------------------------------------------------------


def _ss_section(cfg: dict) -> dict:
    if "combiner" in cfg:
        return cfg["combiner"].setdefault("ss", dict(DEFAULT_SS))
    return cfg.setdefault("prng", dict(DEFAULT_SS))


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge the config file with flags; flags win, in a fixed order."""
    cfg = read_json(args.config) if args.config else {}
    cfg = copy.deepcopy(cfg)
    cfg["command"] = args.command
    for key in ("out", "bits", "count", "significance", "format"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "input", None):
        cfg["input"] = args.input
    if getattr(args, "input_mode", None):
        cfg["input_mode"] = args.input_mode

    wants_hybrid = args.command == "dice" or args.q is not None or args.mix_rate is not None
    if wants_hybrid and args.command in ("generate", "dice") and "combiner" not in cfg:
        cfg["combiner"] = {
            "mode": "digital-dice",
            "rs": dict(DEFAULT_RS),
            "ss": cfg.pop("prng", dict(DEFAULT_SS)),
        }
    if "combiner" in cfg:
        comb = cfg["combiner"]
        if args.q is not None:
            comb["q"] = args.q
        if args.mix_rate is not None:
            comb["mix_rate"] = args.mix_rate
        comb.setdefault("q", 6 if args.command == "dice" else 2)
    elif args.q is not None:
        cfg["q"] = args.q

    if args.preset is not None or args.seed is not None:
        if args.command in ("generate", "dice"):
            ss = _ss_section(cfg)
            if args.preset is not None:
                ss.clear()
                ss["preset"] = args.preset
                ss["seed"] = 1
            if args.seed is not None:
                ss["seed"] = args.seed
        else:
            if args.seed is not None:
                cfg["seed"] = args.seed
            if args.preset is not None:
                cfg["preset"] = args.preset
    return cfg


def _require_out(cfg: dict) -> Path:
    if not cfg.get("out"):
        raise ConfigurationError(f"{cfg['command']} needs --out")
    return Path(cfg["out"])


class _Recorder:
    """Saves entropy drawn from live sources and rewrites descriptors to replay it."""

    def __init__(self, out: Path):
        self.out = out
        self.pending = []

    def source(self, rs: dict, tag: str):
        desc = EntropySourceDescriptor.from_dict(rs)
        handle = open_source(desc, record=not desc.reproducible)
        if not desc.reproducible:
            self.pending.append((handle, rs, tag))
        return handle

    def finalize(self) -> None:
        for handle, rs, tag in self.pending:
            path = self.out.with_name(f"{self.out.name}.{tag}.bin")
            write_bitstream(path, handle.recorded(), "raw", {"recorded_from": handle.descriptor.to_dict()})
            rs.clear()
            rs.update({"kind": "file-replay", "params": {"path": str(path.resolve()), "mode": "raw"}})


def _hybrid(comb: dict, recorder: _Recorder, tag: str = "rs") -> HybridGenerator:
    desc = CombinerDescriptor.from_dict(comb)
    return HybridGenerator(desc, rs_handle=recorder.source(comb["rs"], tag))


# --- commands --------------------------------------------------------------------


def cmd_generate(cfg: dict) -> int:
    out = _require_out(cfg)
    n = int(cfg.get("bits", 0))
    if n < 0:
        raise ConfigurationError("--bits must be non-negative")
    mode = cfg.get("format", "raw")
    if mode not in ("raw", "ascii"):
        raise ConfigurationError("generate writes raw or ascii bitstreams")
    replay_cfg = copy.deepcopy(cfg)
    recorder = _Recorder(out)
    extra = {}
    if "combiner" in replay_cfg:
        gen = _hybrid(replay_cfg["combiner"], recorder)
        stream = gen.next_bits(n)
        extra["accounting"] = gen.accounting()
    elif "source" in replay_cfg:
        handle = recorder.source(replay_cfg["source"], "rs")
        stream = handle.next_bits(n)
    else:
        stream = PseudoGenerator(PrngDescriptor.from_dict(_ss_section(replay_cfg))).next_bits(n)
    recorder.finalize()
    write_bitstream(out, stream, mode, {"command": "generate", "config": replay_cfg, **extra})
    return 0


def cmd_dice(cfg: dict) -> int:
    out = _require_out(cfg)
    n = int(cfg.get("count", 0))
    if n < 0:
        raise ConfigurationError("--count must be non-negative")
    replay_cfg = copy.deepcopy(cfg)
    if "combiner" not in replay_cfg:
        raise ConfigurationError("dice needs a combiner configuration")
    recorder = _Recorder(out)
    gen = _hybrid(replay_cfg["combiner"], recorder)
    symbols = gen.next_symbols(n)
    recorder.finalize()
    text = "".join(f"{s}\n" for s in symbols.symbols.tolist())
    with atomic_output(out, "w") as fh:
        fh.write(text)
    write_json(sidecar_path(out), {
        "command": "dice",
        "config": replay_cfg,
        "q": symbols.q,
        "count": symbols.length,
        "provenance": symbols.provenance,
        "accounting": gen.accounting(),
    })
    return 0


def read_symbols(path, q: int) -> SymbolStream:
    """Load a dice output file (one decimal symbol per line)."""
    text = Path(path).read_text()
    values = [int(tok) for tok in text.split()]
    return SymbolStream(q, np.array(values, dtype=np.int64), provenance="file")


def _emit_report(cfg: dict, text_json: str, text_csv: str, meta: dict) -> None:
    fmt = cfg.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigurationError("reports are written as json or csv")
    body = text_json if fmt == "json" else text_csv
    if cfg.get("out"):
        out = Path(cfg["out"])
        with atomic_output(out, "w") as fh:
            fh.write(body)
        write_json(sidecar_path(out), meta)
    else:
        sys.stdout.write(body)


def cmd_test(cfg: dict) -> int:
    if not cfg.get("input"):
        raise ConfigurationError("test needs an input bitstream file")
    try:
        stream = read_bitstream(cfg["input"], cfg.get("input_mode"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read {cfg['input']}: {exc}") from exc
    significance = float(cfg.get("significance", bat.DEFAULT_SIGNIFICANCE))
    report = bat.run_battery(stream, cfg.get("tests"), significance)
    for r in report.results:
        p = "n/a" if r.p_value is None else f"{r.p_value:.6g}"
        verdict = {True: "PASS", False: "FAIL", None: "N/A"}[r.passed]
        print(f"{verdict:4}  {r.test_name:16} {json.dumps(r.parameters, sort_keys=True):32} p={p}", file=sys.stderr)
    _emit_report(cfg, report.to_json(), report.to_csv(), {"command": "test", "config": cfg})
    return report.exit_status


def _defect_rows(name: str, symbols: SymbolStream, lags, significance) -> list[dict]:
    bits = symbols_to_bits(symbols)
    results = [bat.run_test(symbols, {"name": "serial", "dim": 3}, significance)]
    results += [bat.run_test(bits, {"name": "autocorrelation", "lag": lag}, significance) for lag in lags]
    rows = []
    for r in results:
        row = {"generator": name, **r.to_dict()}
        rows.append(row)
    return rows


def cmd_demo_defect(cfg: dict) -> int:
    n = int(cfg.get("count", DEFECT_COUNT))
    significance = float(cfg.get("significance", bat.DEFAULT_SIGNIFICANCE))
    lags = tuple(cfg.get("lags", DEFECT_LAGS))
    q = 16
    replay_cfg = copy.deepcopy(cfg)
    out = Path(cfg["out"]) if cfg.get("out") else None
    recorder = _Recorder(out) if out else None
    randu = PrngDescriptor.from_preset("randu", DEFECT_SEEDS["randu"])
    mix = PrngDescriptor("mix64", DEFECT_SEEDS["mix64"])
    streams = []
    for name, desc in (("randu", randu), ("mix64", mix)):
        frames = PseudoGenerator(desc).next_frames(n)
        streams.append((name, SymbolStream(q, segment_index(frames, q), provenance=desc.to_dict())))
    comb = replay_cfg.setdefault("combiner", {})
    comb.update({"q": q, "ss": randu.to_dict()})
    comb.setdefault("mode", "digital-dice")
    comb.setdefault("rs", copy.deepcopy(DEMO_RS))
    if recorder:
        hybrid = _hybrid(comb, recorder)
    else:
        hybrid = HybridGenerator(CombinerDescriptor.from_dict(comb))
    streams.append(("hybrid(randu)", hybrid.next_symbols(n)))
    rows = []
    for name, symbols in streams:
        rows += _defect_rows(name, symbols, lags, significance)
    if recorder:
        recorder.finalize()
    table = {"count": n, "q": q, "significance": significance, "rows": rows}
    text_json = json.dumps(table, indent=2, sort_keys=True) + "\n"
    text_csv = "generator,test,parameters,statistic,p_value,pass\n" + "".join(
        f"{r['generator']},{r['name']},\"{json.dumps(r['parameters'], sort_keys=True).replace(chr(34), chr(34) * 2)}\","
        f"{'' if r['statistic'] is None else repr(r['statistic'])},"
        f"{'' if r['p_value'] is None else repr(r['p_value'])},"
        f"{'n/a' if r['pass'] is None else str(r['pass']).lower()}\n"
        for r in rows
    )
    _emit_report(cfg, text_json, text_csv, {"command": "demo-defect", "config": replay_cfg})
    return 0


def cmd_demo_mc(cfg: dict) -> int:
    task = McTask.from_dict(cfg.get("task", {"kind": "pi-estimate"}))
    n = int(cfg.get("count", MC_COUNT))
    replay_cfg = copy.deepcopy(cfg)
    gens_cfg = replay_cfg.setdefault("generators", copy.deepcopy(list(MC_GENERATORS)))
    if len(gens_cfg) < 2:
        raise ConfigurationError("demo-mc compares at least two generators")
    out = Path(cfg["out"]) if cfg.get("out") else None
    recorder = _Recorder(out) if out else None
    gens = []
    for k, spec in enumerate(gens_cfg):
        if "mode" in spec and recorder:
            gens.append(_hybrid(spec, recorder, tag=f"rs{k}"))
        else:
            gens.append(spec)
    table = compare_generators(task, gens, n)
    if recorder:
        recorder.finalize()
        # rows embed the replayable descriptors, so a replay emits the same table
        rows = tuple(
            replace(row, label=generator_label(spec), generator=spec) for row, spec in zip(table.rows, gens_cfg)
        )
        table = replace(table, rows=rows)
    _emit_report(cfg, table.to_json(), table.to_csv(), {"command": "demo-mc", "config": replay_cfg})
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    meta = read_json(args.sidecar)
    if "config" not in meta:
        raise ConfigurationError(f"{args.sidecar} carries no replayable config")
    cfg = copy.deepcopy(meta["config"])
    if args.out:
        cfg["out"] = args.out
    return dispatch(cfg)


_HANDLERS = {
    "generate": cmd_generate,
    "test": cmd_test,
    "dice": cmd_dice,
    "demo-defect": cmd_demo_defect,
    "demo-mc": cmd_demo_mc,
}


def dispatch(cfg: dict) -> int:
    command = cfg.get("command")
    if command not in _HANDLERS:
        raise ConfigurationError(f"unknown command {command!r}")
    return _HANDLERS[command](cfg)


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            return cmd_replay(args)
        return dispatch(resolve_config(args))
    except (RandomnessError, OSError, json.JSONDecodeError) as exc:
        print(f"hybridrng {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
