"""
motionguide/interfaces/cli/cli.py
Argument parsing and dispatch for the motionguide command line.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numeric failure.
"""

import argparse
from typing import Any, Dict, List, Optional

from loguru import logger
from rich.console import Console

from motionguide import __version__
from motionguide.core.configuration_manager import Config
from motionguide.core.enums import BlendWeighting, ExitCode, FusionMode
from motionguide.core.exceptions import MotionGuideError
from motionguide.interfaces.cli.commands import (
    PipelineConfig,
    cmd_align,
    cmd_animate,
    cmd_attn,
    cmd_make_toy_body,
    cmd_render,
    cmd_train,
)
from motionguide.utils.logging import setup_logging
from motionguide.utils.optimization import configure_torch


def _add_encoder_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--conditions", help="Condition names (comma separated) or a preset: full, skeleton_only, no_geometry, no_skeleton")
    parser.add_argument("--fusion", choices=[m.value for m in FusionMode], help="How guidance enters the denoiser")
    parser.add_argument("--no-attention", dest="use_attention", action="store_false", default=None, help="Build guidance networks without self-attention")
    parser.add_argument("--checkpoint", help="CHMPNETS checkpoint path")
    parser.add_argument("--maps-dir", help="Directory of rendered guidance maps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motionguide", description="3D-parametric guidance pipeline for human image animation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--log-level", help="Logging level (DEBUG, INFO, WARNING, ...)")
    parser.add_argument("--log-dir", help="Also write a rotating log file to this directory")
    parser.add_argument("--json", action="store_true", help="Print a JSON summary on stdout")
    parser.add_argument("--seed", type=int, help="Seed of every random stream")
    parser.add_argument("--output-dir", help="Output directory")
    parser.add_argument("--body-model", help="CHMPBODY body model (default: procedural toy body)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    toy = subparsers.add_parser("make-toy-body", help="Write the procedural body model and optional fixtures")
    toy.add_argument("--out", help="Output CHMPBODY path (default: <output-dir>/toy_body.chmp)")
    toy.add_argument("--frames", type=int, default=0, help="Also write a fixture motion with this many frames")
    toy.add_argument("--vertices", dest="num_vertices", type=int)
    toy.add_argument("--joints", dest="num_joints", type=int)
    toy.add_argument("--shape", dest="num_shape", type=int)
    toy.add_argument("--parts", dest="num_parts", type=int)
    toy.add_argument("--pose-correctives", action="store_true", default=None)
    toy.add_argument("--width", type=int, help="Image width the fixture camera frames")
    toy.add_argument("--height", type=int, help="Image height the fixture camera frames")

    align = subparsers.add_parser("align", help="Re-evaluate the motion with the reference shape")
    align.add_argument("--motion", help="Motion JSON file")
    align.add_argument("--reference-shape", help="Reference shape JSON file")
    align.add_argument("--aligned-motion", help="Output aligned motion JSON")
    align.add_argument("--reference-bbox", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"), help="Fit the camera scale to this pixel box")
    align.add_argument("--anchor-frame", type=int, help="Frame measured by the camera fit")
    align.add_argument("--no-alignment", dest="alignment_enabled", action="store_false", default=None, help="Keep the driving subject's shape")

    render = subparsers.add_parser("render", help="Render guidance maps of the aligned motion")
    render.add_argument("--aligned-motion", help="Aligned motion JSON")
    render.add_argument("--maps-dir", help="Output directory of the maps")
    render.add_argument("--width", type=int)
    render.add_argument("--height", type=int)
    render.add_argument("--workers", type=int, help="Frames rendered in parallel")
    render.add_argument("--no-culling", dest="back_face_culling", action="store_false", default=None)

    train = subparsers.add_parser("train", help="Train guidance networks and the toy denoiser")
    _add_encoder_flags(train)
    train.add_argument("--steps", dest="train_steps", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--batch-size", type=int)

    animate = subparsers.add_parser("animate", help="Sample the frame sequence in overlapping windows")
    _add_encoder_flags(animate)
    animate.add_argument("--aligned-motion", help="Aligned motion JSON (sets the frame count)")
    animate.add_argument("--window-len", type=int)
    animate.add_argument("--stride", type=int)
    animate.add_argument("--weighting", choices=[m.value for m in BlendWeighting])
    animate.add_argument("--sampling-steps", type=int)
    animate.add_argument("--self-check", action="store_true", help="Compare against an unguided run")
    animate.add_argument("--no-guidance", action="store_true", help="Sample without guidance")

    attn = subparsers.add_parser("attn", help="Export guidance self-attention saliency images")
    _add_encoder_flags(attn)
    attn.add_argument("--condition", dest="dump_conditions", action="append", help="Condition to dump (repeatable; default: all enabled)")
    attn.add_argument("--frame", dest="dump_frames", type=int, action="append", help="Frame to dump (repeatable; default: all rendered)")
    return parser


# argparse destinations that are not PipelineConfig fields
_COMMAND_ARGS = {
    "command", "config", "json", "log_dir", "out", "frames", "self_check",
    "no_guidance", "dump_conditions", "dump_frames",
}


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: value for key, value in vars(args).items() if key not in _COMMAND_ARGS}


def run_command(args: argparse.Namespace, config: PipelineConfig) -> Dict[str, Any]:
    if args.command == "make-toy-body":
        return cmd_make_toy_body(config, args.out, args.frames)
    if args.command == "align":
        return cmd_align(config)
    if args.command == "render":
        return cmd_render(config)
    if args.command == "train":
        return cmd_train(config)
    if args.command == "animate":
        return cmd_animate(config, self_check=args.self_check, no_guidance=args.no_guidance)
    if args.command == "attn":
        return cmd_attn(config, args.dump_conditions, args.dump_frames)
    raise ValueError(f"unhandled command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    """Runs one command and returns its exit code."""
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_level or "INFO", args.log_dir)
        config = PipelineConfig.from_config(Config(args.config), _overrides(args))
        if args.log_level is None and config.log_level != "INFO":
            setup_logging(config.log_level, args.log_dir)
        configure_torch()
        logger.info(f"motionguide {__version__}: {args.command}")
        summary = run_command(args, config)
    except MotionGuideError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return int(e.exit_code)
    except FloatingPointError as e:
        logger.exception(f"Floating-point failure: {e}")
        return int(ExitCode.NUMERIC_FAILURE)

    if args.json:
        Console().print_json(data={"command": args.command, **summary})
    return int(ExitCode.SUCCESS)
