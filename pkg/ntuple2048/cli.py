"""
Command line: ``python -m ntuple2048 {train,eval,fold,inspect}``.

Machine output (CSV or JSON) goes to stdout, logs go to stderr and the log
directory. Exit codes follow :class:`ntuple2048.constants.ExitCode`.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence

import msgspec
import orjson

from ntuple2048.config import RunConfig, SearchLimit
from ntuple2048.constants import GAME_RECORD_HEADER, ExitCode, UpdateRule, get_log_dir
from ntuple2048.core.log import SpdLog
from ntuple2048.error import (
    CheckpointError,
    ConfigurationError,
    NetworkFormatError,
    UsageError,
)
from ntuple2048.game import legal_moves
from ntuple2048.learning.episode import evaluate_action
from ntuple2048.ntuple.fold import fold_redundant
from ntuple2048.ntuple.io import MAGIC as NETWORK_MAGIC
from ntuple2048.ntuple.io import load, save
from ntuple2048.ntuple.network import NTupleNetwork
from ntuple2048.ntuple.shape import get_architecture, list_architectures
from ntuple2048.schema import Board, EvalSummary
from ntuple2048.trainer.checkpoint import MAGIC as CHECKPOINT_MAGIC
from ntuple2048.trainer.checkpoint import load_checkpoint, read_checkpoint_state
from ntuple2048.trainer.engine import resume, train
from ntuple2048.trainer.evaluation import evaluate_limit

SUMMARY_HEADER = (
    "limit",
    "games",
    "mean_score",
    "ci95",
    "pct_32768",
    "pct_16384",
    "pct_8192",
    "moves_per_s",
)

# flag dest -> flat config key
_TRAIN_FLAGS = {
    "arch": "arch",
    "rule": "rule",
    "delayed": "delayed",
    "lam": "lambda",
    "alpha": "alpha",
    "beta": "beta",
    "mu": "mu",
    "tau": "tau",
    "alpha_init": "alpha_init",
    "stages": "stages",
    "weight_promotion": "weight_promotion",
    "carousel": "carousel",
    "budget": "total_actions",
    "eval_every": "eval_every",
    "eval_games_1ply": "eval_games_1ply",
    "eval_games_3ply": "eval_games_3ply",
    "workers": "workers",
    "seed": "seed",
    "out": "out_dir",
}


def _log():
    return SpdLog.get_logger("Cli", level="INFO", flush=True)


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    sys.stdout.flush()


def _emit_json(payload: Any) -> None:
    _emit(
        orjson.dumps(
            msgspec.to_builtins(payload),
            option=orjson.OPT_NON_STR_KEYS | orjson.OPT_INDENT_2,
        ).decode()
    )


def load_any(path: str | Path) -> NTupleNetwork:
    """Value network from either a network file or a training checkpoint."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
    if magic == CHECKPOINT_MAGIC:
        network, _, _ = load_checkpoint(path)
        return network
    if magic != NETWORK_MAGIC:
        raise NetworkFormatError(f"{path} is neither a network nor a checkpoint (magic {magic!r})")
    return load(path)


def _parse_board(text: str) -> Board:
    return Board.from_text(text.replace("/", " ").replace(",", " "))


def resolve_train_config(args: argparse.Namespace) -> RunConfig:
    """File values first, then flags; ``--out`` (or NTUPLE2048_OUT_DIR) is mandatory."""
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    flat: Dict[str, Any] = {}
    for dest, key in _TRAIN_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            flat[key] = value
    if flat.get("rule") == UpdateRule.AUTOSTEP.value and "lambda" not in flat:
        flat["lambda"] = 0.0
    config = config.override(**flat)
    if config.out_dir is None:
        raise UsageError("train needs --out (or NTUPLE2048_OUT_DIR)")
    return config


def cmd_train(args: argparse.Namespace) -> int:
    if args.resume:
        stored = RunConfig.from_flat(read_checkpoint_state(args.resume).config)
        if args.arch is not None and args.arch != stored.arch:
            raise CheckpointError(f"checkpoint was trained with {stored.arch}, not {args.arch}")
        # only the budget and output location may change on resume
        override = stored.override(
            total_actions=args.budget,
            eval_every=args.eval_every,
            eval_games_1ply=args.eval_games_1ply,
            eval_games_3ply=args.eval_games_3ply,
            workers=args.workers,
            out_dir=args.out,
        )
        result = resume(args.resume, override, enable_signal_handlers=True)
    else:
        config = resolve_train_config(args)
        _log().info(f"resolved config: {orjson.dumps(config.as_dict()).decode()}")
        result = train(config, enable_signal_handlers=True)
    _emit_json(
        {
            "actions": result.actions,
            "episodes": result.episodes,
            "checkpoints": len(result.curve),
            "curve": str(result.curve_path),
            "checkpoint": str(result.checkpoint_path),
        }
    )
    return ExitCode.OK.value


def _summary_row(summary: EvalSummary) -> str:
    def fmt(value, spec):
        return "" if value is None else format(value, spec)

    return ",".join(
        [
            summary.limit,
            str(summary.games),
            fmt(summary.mean_score, ".2f"),
            fmt(summary.ci95, ".2f"),
            fmt(summary.pct_32768, ".2f"),
            fmt(summary.pct_16384, ".2f"),
            fmt(summary.pct_8192, ".2f"),
            fmt(summary.moves_per_s, ".1f"),
        ]
    )


def _search_limit(args: argparse.Namespace) -> SearchLimit:
    if args.depth is not None and args.ms is not None:
        raise UsageError("--depth and --ms are mutually exclusive")
    if args.ms is not None:
        return SearchLimit.millis(args.ms, tt_bits=args.tt_bits)
    return SearchLimit.plies(args.depth if args.depth is not None else 1, tt_bits=args.tt_bits)


def cmd_eval(args: argparse.Namespace) -> int:
    if args.games < 0:
        raise UsageError(f"--games must be >= 0, got {args.games}")
    limit = _search_limit(args)
    network = load_any(args.network) if args.games else None
    if network is None:
        summary, records = EvalSummary(limit=str(limit), games=0), []
    else:
        summary, records = evaluate_limit(network, limit, args.games, args.seed, args.workers)
        _log().info(
            f"{limit}: mean {summary.mean_score:.0f} +- {summary.ci95:.0f} over {summary.games} games"
        )
    if args.format == "json":
        _emit_json({"summary": summary, "games": records})
    elif args.format == "games":
        _emit("\n".join([",".join(GAME_RECORD_HEADER)] + [r.to_csv_row() for r in records]))
    else:
        _emit(",".join(SUMMARY_HEADER) + "\n" + _summary_row(summary))
    return ExitCode.OK.value


def cmd_fold(args: argparse.Namespace) -> int:
    network = load_any(args.network)
    folded = fold_redundant(network)
    save(folded, args.out)
    _emit_json(
        {
            "input": str(args.network),
            "output": str(args.out),
            "tuples_before": network.m,
            "tuples_after": folded.m,
            "parameters_before": network.parameter_count,
            "parameters_after": folded.parameter_count,
        }
    )
    return ExitCode.OK.value


def _describe_shapes(shapes) -> List[Dict[str, Any]]:
    return [
        {"shape": s.name, "cells": list(s.locations), "redundant": s.redundant}
        for s in shapes
    ]


def cmd_inspect(args: argparse.Namespace) -> int:
    if not (args.arch or args.network or args.board):
        raise UsageError("inspect needs --arch, --network or --board")
    report: Dict[str, Any] = {}
    network = None
    if args.arch:
        arch = get_architecture(args.arch)
        report["architecture"] = {
            "name": arch.name,
            "stages": 1 << args.stages,
            "tuples": _describe_shapes(arch.shapes),
            "parameter_count": arch.parameter_count(args.stages),
        }
    if args.network:
        network = load_any(args.network)
        report["network"] = {
            "name": network.name,
            "stages": network.stages,
            "tuples": _describe_shapes(network.shapes),
            "parameter_count": network.parameter_count,
            "dtype": str(network.dtype),
            "nonzero_weights": int((network.weights != 0).sum()),
        }
    if args.board:
        board = _parse_board(args.board)
        moves = sorted(legal_moves(board), key=lambda m: m.value)
        info: Dict[str, Any] = {
            "cells": list(board.cells),
            "packed": f"0x{board.packed:016x}",
            "max_tile": board.max_tile,
            "empty": board.empty_count,
            "legal_moves": [m.name for m in moves],
        }
        if network is not None:
            info["stage"] = network.stage_of(board)
            info["value"] = network.evaluate(board)
            info["actions"] = {
                m.name: evaluate_action(board, m, network)[0] for m in moves
            }
        report["board"] = info
    _emit_json(report)
    return ExitCode.OK.value


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-dir", default=None, help="defaults to NTUPLE2048_LOG_DIR or .log")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntuple2048", description="n-tuple network training and play for 2048"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network")
    _common(p)
    p.add_argument("--config", help="flat key = value run config file")
    p.add_argument("--resume", help="continue from a checkpoint")
    p.add_argument("--arch", choices=list_architectures())
    p.add_argument("--rule", choices=[r.value for r in UpdateRule])
    p.add_argument("--delayed", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--lambda", dest="lam", type=float, help="default 0.5, 0 for autostep")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha-init", type=float)
    p.add_argument("--stages", type=int, help="g, the network has 2**g stages")
    p.add_argument("--weight-promotion", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--carousel", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--budget", type=int, help="total actions")
    p.add_argument("--eval-every", type=int)
    p.add_argument("--eval-games-1ply", type=int)
    p.add_argument("--eval-games-3ply", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="play evaluation games")
    _common(p)
    p.add_argument("--network", required=True, help="network file or checkpoint")
    p.add_argument("--depth", type=int)
    p.add_argument("--ms", type=float, help="time budget per move")
    p.add_argument("--games", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tt-bits", type=int, default=20)
    p.add_argument("--format", choices=["summary", "games", "json"], default="summary")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("fold", help="fold redundant tuples into their containers")
    _common(p)
    p.add_argument("network")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_fold)

    p = sub.add_parser("inspect", help="describe an architecture, network or board")
    _common(p)
    p.add_argument("--arch")
    p.add_argument("--stages", type=int, default=0)
    p.add_argument("--network")
    p.add_argument("--board", help='16 tile values, rows separated by "/"')
    p.set_defaults(handler=cmd_inspect)
    return parser


def _fail(code: ExitCode, message: str) -> int:
    _log().error(message)
    sys.stderr.write(f"error: {message}\n")
    return code.value


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return ExitCode.OK.value if e.code == 0 else ExitCode.USAGE.value
    SpdLog.initialize(
        level=args.log_level,
        std_level=args.log_level,
        file_dir=args.log_dir or get_log_dir(),
        production_mode=True,
    )
    SpdLog.setup_error_handling()
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except (UsageError, ConfigurationError) as e:
        return _fail(ExitCode.USAGE, e.message)
    except (NetworkFormatError, CheckpointError) as e:
        return _fail(ExitCode.FORMAT, e.message)
    except OSError as e:
        return _fail(ExitCode.IO, str(e))
