"""
motionguide/interfaces/cli/commands.py
Command implementations of the pipeline driver.

Every command takes a PipelineConfig, owns the file I/O of its stage and
returns a JSON-serializable summary. Commands hold no state between calls, so
running one equals calling the library functions it wires together.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch
from loguru import logger
from PIL import Image
from rich.console import Console
from rich.table import Table

from motionguide.alignment.motion_io import (
    load_aligned,
    load_motion,
    load_reference_shape,
    save_motion,
)
from motionguide.alignment.shape_alignment import (
    AlignedSequence,
    MotionFrame,
    MotionSequence,
    PixelRect,
    align_sequence,
    fit_camera_scale,
    projected_bbox,
)
from motionguide.body.body_model import BodyModel, PoseParams, ShapeParams, evaluate_body
from motionguide.body.model_io import load_body_model, save_body_model
from motionguide.body.toy_body import make_toy_body
from motionguide.core.configuration_manager import Config
from motionguide.core.enums import BlendWeighting, FusionMode
from motionguide.core.exceptions import (
    ConfigurationError,
    InvalidArgumentError,
    MissingInputError,
    NumericError,
    StorageError,
)
from motionguide.core.rng import make_rng, seeded_torch, torch_normal
from motionguide.diffusion.denoiser import ToyDenoiser
from motionguide.diffusion.sampler import sample
from motionguide.diffusion.schedule import make_schedule
from motionguide.diffusion.training import SyntheticDataset, synthetic_latents, train
from motionguide.guidance.attention_dump import dump_attention
from motionguide.guidance.checkpoint import load_checkpoint, save_checkpoint
from motionguide.guidance.conditions import CONDITION_NAMES, build_bundle, resolve_conditions, select_items
from motionguide.guidance.encoder import GuidanceEncoder
from motionguide.render.camera import Camera, look_at_camera
from motionguide.render.map_io import (
    export_maps,
    frame_stem,
    load_maps,
    maps_present,
    read_meta,
    rendered_frames,
    write_array,
)
from motionguide.render.rasterizer import GuidanceMaps, rasterize_mesh
from motionguide.render.skeleton import render_skeleton
from motionguide.temporal.temporal_agg import aggregate, plan_windows
from motionguide.utils.optimization import count_parameters

LOCK_NAME = ".motionguide.lock"
# rng streams: 0..99 fixtures and training, frame k samples its noise from NOISE_STREAM + k
FIXTURE_STREAM = 10
NOISE_STREAM = 1000

# stderr console; stdout is reserved for the --json summary
diagnostics = Console(stderr=True)


@dataclass
class PipelineConfig:
    """Flattened, validated settings of one pipeline run."""

    output_dir: Path = Path("output")
    body_model: Optional[Path] = None
    motion: Optional[Path] = None
    reference_shape: Optional[Path] = None
    aligned_motion: Optional[Path] = None
    maps_dir: Optional[Path] = None
    checkpoint: Optional[Path] = None

    num_vertices: int = 100
    num_joints: int = 5
    num_shape: int = 10
    num_parts: int = 5
    pose_correctives: bool = False

    alignment_enabled: bool = True
    reference_bbox: Optional[Tuple[float, float, float, float]] = None
    anchor_frame: int = 0

    width: int = 256
    height: int = 256
    back_face_culling: bool = True
    bone_width: float = 3.0
    joint_radius: float = 4.0
    workers: int = 1

    conditions: Tuple[str, ...] = CONDITION_NAMES
    conv_channels: Tuple[int, ...] = (16, 32)
    conv_strides: Tuple[int, ...] = (1, 2)
    use_attention: bool = True
    fusion: str = FusionMode.ADD.value

    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    sampling_steps: int = 10
    latent_channels: int = 4
    latent_size: int = 8
    hidden_channels: int = 32
    embed_dim: int = 16

    lr: float = 0.05
    train_steps: int = 500
    batch_size: int = 4

    window_len: int = 24
    stride: int = 12
    weighting: str = BlendWeighting.TRIANGULAR.value

    seed: int = 0
    log_level: str = "INFO"

    @classmethod
    def from_config(cls, config: Config, overrides: Optional[Mapping[str, Any]] = None) -> "PipelineConfig":
        """Builds the run settings from a Config; non-None ``overrides`` win."""
        paths = config.section("paths")
        toy = config.section("toy_body")
        alignment = config.section("alignment")
        render = config.section("render")
        encoder = config.section("encoder")
        diffusion = config.section("diffusion")
        training = config.section("training")
        temporal = config.section("temporal")
        values: Dict[str, Any] = {
            "output_dir": paths["output_dir"],
            "body_model": paths["body_model"],
            "motion": paths["motion"],
            "reference_shape": paths["reference_shape"],
            "aligned_motion": paths["aligned_motion"],
            "maps_dir": paths["maps_dir"],
            "checkpoint": paths["checkpoint"],
            "num_vertices": toy["num_vertices"],
            "num_joints": toy["num_joints"],
            "num_shape": toy["num_shape"],
            "num_parts": toy["num_parts"],
            "pose_correctives": toy["pose_correctives"],
            "alignment_enabled": alignment["enabled"],
            "reference_bbox": alignment["reference_bbox"],
            "anchor_frame": alignment["anchor_frame"],
            "width": render["width"],
            "height": render["height"],
            "back_face_culling": render["back_face_culling"],
            "bone_width": render["bone_width"],
            "joint_radius": render["joint_radius"],
            "workers": render["workers"],
            "conditions": encoder["conditions"],
            "conv_channels": encoder["conv_channels"],
            "conv_strides": encoder["conv_strides"],
            "use_attention": encoder["use_attention"],
            "fusion": encoder["fusion"],
            "T": diffusion["T"],
            "beta_start": diffusion["beta_start"],
            "beta_end": diffusion["beta_end"],
            "sampling_steps": diffusion["sampling_steps"],
            "latent_channels": diffusion["latent_channels"],
            "latent_size": diffusion["latent_size"],
            "hidden_channels": diffusion["hidden_channels"],
            "embed_dim": diffusion["embed_dim"],
            "lr": training["lr"],
            "train_steps": training["steps"],
            "batch_size": training["batch_size"],
            "window_len": temporal["window_len"],
            "stride": temporal["stride"],
            "weighting": temporal["weighting"],
            "seed": config.get("seed"),
            "log_level": config.section("system")["log_level"],
        }
        known = {f.name for f in fields(cls)}
        for key, value in (overrides or {}).items():
            if key not in known:
                raise ConfigurationError(f"unknown setting '{key}'")
            if value is not None:
                values[key] = value
        try:
            run = cls(**values)
        except TypeError as e:
            raise ConfigurationError(f"invalid settings: {e}") from e
        run.normalize()
        run.validate()
        return run

    def normalize(self) -> None:
        for name in ("output_dir", "body_model", "motion", "reference_shape", "aligned_motion", "maps_dir", "checkpoint"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value))
        if self.aligned_motion is None:
            self.aligned_motion = self.output_dir / "aligned_motion.json"
        if self.maps_dir is None:
            self.maps_dir = self.output_dir / "maps"
        self.conditions = resolve_conditions(self.conditions)
        self.conv_channels = tuple(int(c) for c in self.conv_channels)
        self.conv_strides = tuple(int(s) for s in self.conv_strides)
        if self.reference_bbox is not None:
            self.reference_bbox = tuple(float(x) for x in self.reference_bbox)

    def validate(self) -> None:
        positive = {
            "width": self.width,
            "height": self.height,
            "workers": self.workers,
            "T": self.T,
            "sampling_steps": self.sampling_steps,
            "latent_channels": self.latent_channels,
            "latent_size": self.latent_size,
            "hidden_channels": self.hidden_channels,
            "embed_dim": self.embed_dim,
            "train_steps": self.train_steps,
            "batch_size": self.batch_size,
            "window_len": self.window_len,
            "stride": self.stride,
        }
        for name, value in positive.items():
            if int(value) < 1:
                raise ConfigurationError(f"'{name}' must be positive, got {value}")
        if self.seed < 0:
            raise ConfigurationError(f"'seed' must be nonnegative, got {self.seed}")
        if self.lr < 0:
            raise ConfigurationError(f"'lr' must be nonnegative, got {self.lr}")
        if self.reference_bbox is not None and len(self.reference_bbox) != 4:
            raise ConfigurationError("'reference_bbox' must be [x0, y0, x1, y1]")
        try:
            FusionMode(self.fusion)
            BlendWeighting(self.weighting)
        except ValueError as e:
            raise ConfigurationError(str(e)) from e

    def to_dict(self) -> Dict[str, Any]:
        return {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(self).items()}


@contextmanager
def output_lock(output_dir: Path) -> Iterator[Path]:
    """Exclusive ownership of ``output_dir`` for the duration of a command."""
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"Output directory {output_dir} is not writable: {e}") from e
    lock_path = output_dir / LOCK_NAME
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as e:
        raise StorageError(
            f"{output_dir} is locked by another run (remove {lock_path} if it is stale)"
        ) from e
    except OSError as e:
        raise StorageError(f"Cannot create lock {lock_path}: {e}") from e
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield lock_path
    finally:
        try:
            lock_path.unlink()
        except FileNotFoundError:
            pass


def load_model(config: PipelineConfig) -> BodyModel:
    """Body model from ``config.body_model`` or the procedural toy body."""
    if config.body_model is not None:
        model = load_body_model(config.body_model)
    else:
        model = make_toy_body(
            num_vertices=config.num_vertices,
            num_joints=config.num_joints,
            num_shape=config.num_shape,
            num_parts=config.num_parts,
            pose_correctives=config.pose_correctives,
            seed=config.seed,
        )
    logger.info(
        f"Body model: V={model.num_vertices} K={model.num_joints} S={model.num_shape} "
        f"L={model.num_parts} F={len(model.faces)} pose_correctives={model.pose_dirs is not None}"
    )
    return model


def fixture_camera(model: BodyModel, width: int, height: int) -> Camera:
    """Camera framing the rest-pose body in the middle of the image."""
    center_y = float(model.template_vertices[:, 1].mean())
    return look_at_camera(distance=2.5, width=width, height=height, f=2.0 * height, height_offset=center_y)


def fixture_motion(model: BodyModel, frames: int, width: int, height: int, seed: int) -> MotionSequence:
    """Random small poses with a fixed framing camera and a random source shape."""
    rng = make_rng(seed, stream=FIXTURE_STREAM)
    camera = fixture_camera(model, width, height)
    source_shape = ShapeParams(0.5 * rng.standard_normal(model.num_shape))
    motion_frames = []
    for _ in range(frames):
        theta = 0.25 * rng.standard_normal((model.num_joints, 3))
        theta[0] = 0.0
        motion_frames.append(MotionFrame(pose=PoseParams(theta), camera=camera))
    return MotionSequence(frames=motion_frames, source_shape=source_shape)


def cmd_make_toy_body(config: PipelineConfig, out_path: Optional[Path] = None, frames: int = 0) -> Dict[str, Any]:
    """
    Writes the procedural body as CHMPBODY, plus a fixture motion and
    reference shape when ``frames`` > 0.
    """
    out_path = Path(out_path) if out_path is not None else config.output_dir / "toy_body.chmp"
    model = make_toy_body(
        num_vertices=config.num_vertices,
        num_joints=config.num_joints,
        num_shape=config.num_shape,
        num_parts=config.num_parts,
        pose_correctives=config.pose_correctives,
        seed=config.seed,
    )
    summary: Dict[str, Any] = {"body_model": str(save_body_model(model, out_path))}
    if frames > 0:
        motion = fixture_motion(model, frames, config.width, config.height, config.seed)
        motion_path = out_path.parent / "motion.json"
        save_motion(motion, motion_path)
        reference = ShapeParams(0.5 * make_rng(config.seed, stream=FIXTURE_STREAM + 1).standard_normal(model.num_shape))
        shape_path = out_path.parent / "reference_shape.json"
        try:
            shape_path.write_text(json.dumps({"beta": reference.beta.tolist()}, indent=2), encoding="utf-8")
        except OSError as e:
            raise StorageError(f"Cannot write {shape_path}: {e}") from e
        summary.update({"motion": str(motion_path), "reference_shape": str(shape_path), "frames": frames})
    return summary


def _bbox_table(model: BodyModel, aligned: AlignedSequence) -> Tuple[Table, List[Optional[List[float]]]]:
    table = Table(title="Projected body bounding boxes")
    for column in ("frame", "x0", "y0", "x1", "y1", "height"):
        table.add_column(column, justify="right")
    boxes = []
    for i, frame in enumerate(aligned.frames):
        bbox = projected_bbox(evaluate_body(model, aligned.shape, frame.pose), frame.camera)
        if bbox is None:
            table.add_row(str(i), "-", "-", "-", "-", "not visible")
            boxes.append(None)
            continue
        table.add_row(str(i), *(f"{x:.1f}" for x in bbox.to_list()), f"{bbox.height:.1f}")
        boxes.append(bbox.to_list())
    return table, boxes


def cmd_align(config: PipelineConfig) -> Dict[str, Any]:
    """Aligned motion file: driving poses re-evaluated with the reference shape."""
    if config.motion is None:
        raise MissingInputError("no motion file given (paths.motion / --motion)")
    model = load_model(config)
    motion = load_motion(config.motion)
    if config.alignment_enabled:
        if config.reference_shape is None:
            raise MissingInputError("no reference shape file given (paths.reference_shape / --reference-shape)")
        aligned = align_sequence(load_reference_shape(config.reference_shape), motion, model)
    else:
        logger.warning("Shape alignment disabled; keeping the driving subject's shape")
        aligned = align_sequence(motion.source_shape, motion, model)
    if config.reference_bbox is not None:
        aligned = fit_camera_scale(PixelRect(*config.reference_bbox), aligned, model, config.anchor_frame)

    with output_lock(config.output_dir):
        save_motion(aligned, config.aligned_motion)
    table, boxes = _bbox_table(model, aligned)
    diagnostics.print(table)
    return {
        "aligned_motion": str(config.aligned_motion),
        "frames": len(aligned),
        "alignment": config.alignment_enabled,
        "bboxes": boxes,
    }


def render_frame(model: BodyModel, shape: ShapeParams, frame: MotionFrame, config: PipelineConfig) -> GuidanceMaps:
    """All four guidance layers of one aligned frame."""
    issues = frame.camera.problems()
    if issues:
        logger.warning(f"Degenerate camera ({', '.join(issues)}); frame rendered as background")
        return GuidanceMaps.blank(config.width, config.height)
    mesh = evaluate_body(model, shape, frame.pose)
    maps = rasterize_mesh(mesh, frame.camera, config.width, config.height, config.back_face_culling)
    maps.skeleton = render_skeleton(
        mesh.joints,
        model.bones,
        frame.camera,
        config.width,
        config.height,
        bone_width=config.bone_width,
        joint_radius=config.joint_radius,
    )
    return maps


def cmd_render(config: PipelineConfig) -> Dict[str, Any]:
    """Per-frame guidance maps of the aligned motion, written to ``maps_dir``."""
    if not config.aligned_motion.exists():
        raise MissingInputError(f"aligned motion file not found: {config.aligned_motion} (run align first)")
    model = load_model(config)
    aligned = load_aligned(config.aligned_motion)

    def render_one(index: int) -> Dict[str, Path]:
        maps = render_frame(model, aligned.shape, aligned.frames[index], config)
        written = export_maps(maps, config.maps_dir, index, model.num_parts)
        logger.info(f"Rendered frame {index}: {int(maps.foreground.sum())} foreground pixels")
        return written

    with output_lock(config.output_dir):
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(render_one, range(len(aligned))))
    return {
        "maps_dir": str(config.maps_dir),
        "frames": len(results),
        "size": [config.width, config.height],
        "num_parts": model.num_parts,
    }


def build_networks(config: PipelineConfig) -> Tuple[GuidanceEncoder, ToyDenoiser]:
    """Freshly initialized guidance encoder and denoiser for ``config.seed``."""
    with seeded_torch(config.seed):
        encoder = GuidanceEncoder(
            conditions=config.conditions,
            out_channels=config.latent_channels,
            conv_channels=config.conv_channels,
            conv_strides=config.conv_strides,
            use_attention=config.use_attention,
        )
        denoiser = ToyDenoiser(
            latent_channels=config.latent_channels,
            hidden_channels=config.hidden_channels,
            embed_dim=config.embed_dim,
            fusion=config.fusion,
            guidance_channels=config.latent_channels,
        )
    logger.info(
        f"Networks: conditions={list(config.conditions)} fusion={config.fusion} "
        f"attention={config.use_attention} parameters={count_parameters([encoder, denoiser])}"
    )
    return encoder, denoiser


def networks(config: PipelineConfig) -> Tuple[GuidanceEncoder, ToyDenoiser, bool]:
    """Networks restored from the checkpoint when one exists; the flag tells whether it did."""
    encoder, denoiser = build_networks(config)
    checkpoint = config.checkpoint
    if checkpoint is not None and checkpoint.exists():
        load_checkpoint({"guidance": encoder, "denoiser": denoiser}, checkpoint)
        return encoder, denoiser, True
    if checkpoint is not None:
        logger.warning(f"Checkpoint {checkpoint} does not exist; using freshly initialized networks")
    return encoder, denoiser, False


def guidance_size(config: PipelineConfig, encoder: GuidanceEncoder) -> int:
    return config.latent_size * encoder.downsample


def load_rendered(config: PipelineConfig, frames: Optional[Sequence[int]] = None) -> Tuple[List[GuidanceMaps], int]:
    """Maps of ``frames`` (default: every rendered frame) and their part count."""
    if frames is None:
        frames = rendered_frames(config.maps_dir)
    if not frames:
        raise MissingInputError(f"no rendered guidance maps in {config.maps_dir} (run render first)")
    missing = [i for i in frames if not maps_present(config.maps_dir, i)]
    if missing:
        raise MissingInputError(f"guidance maps missing for frames {missing} in {config.maps_dir}")
    num_parts = int(read_meta(config.maps_dir, frames[0])["num_parts"])
    return [load_maps(config.maps_dir, i) for i in frames], num_parts


def cmd_train(config: PipelineConfig) -> Dict[str, Any]:
    """Trains encoder and denoiser on rendered maps with synthetic latent targets."""
    encoder, denoiser, resumed = networks(config)
    maps, num_parts = load_rendered(config)
    bundle = build_bundle(maps, num_parts, config.conditions, guidance_size(config, encoder))
    latents = synthetic_latents(bundle, config.latent_channels, config.latent_size)
    dataset = SyntheticDataset(latents=latents, guidance=bundle)
    sched = make_schedule(config.T, config.beta_start, config.beta_end)
    report = train(
        denoiser,
        encoder,
        dataset,
        sched,
        steps=config.train_steps,
        batch_size=config.batch_size,
        lr=config.lr,
        seed=config.seed,
    )
    checkpoint = config.checkpoint or config.output_dir / "checkpoint.chmp"
    with output_lock(config.output_dir):
        save_checkpoint({"guidance": encoder, "denoiser": denoiser}, checkpoint)
    summary = report.to_dict()
    summary.update({"checkpoint": str(checkpoint), "samples": len(dataset), "resumed": resumed})
    return summary


def animation_frames(config: PipelineConfig) -> List[int]:
    """Frame indices to animate, checked against the rendered maps."""
    if config.aligned_motion.exists():
        count = len(load_aligned(config.aligned_motion))
    else:
        rendered = rendered_frames(config.maps_dir)
        if not rendered:
            raise MissingInputError(f"no rendered guidance maps in {config.maps_dir} (run render first)")
        count = rendered[-1] + 1
    missing = [i for i in range(count) if not maps_present(config.maps_dir, i)]
    if missing:
        raise MissingInputError(f"guidance maps missing for frames {missing} in {config.maps_dir}")
    return list(range(count))


def synthesize(
    config: PipelineConfig,
    denoiser: ToyDenoiser,
    guidance: Optional[torch.Tensor],
    num_frames: int,
) -> torch.Tensor:
    """Windowed sampling and aggregation of ``num_frames`` latents."""
    sched = make_schedule(config.T, config.beta_start, config.beta_end)
    plan = plan_windows(num_frames, config.window_len, config.stride)
    shape = (config.latent_channels, config.latent_size, config.latent_size)
    noise = torch.stack([torch_normal(make_rng(config.seed, NOISE_STREAM + f), shape) for f in range(num_frames)])
    outputs = []
    for start, end in plan.windows:
        y = guidance[start:end] if guidance is not None else None
        outputs.append(sample(denoiser, y, sched, config.sampling_steps, noise[start:end]))
    return aggregate(plan, outputs, config.weighting)


def latent_image(latent: torch.Tensor) -> np.ndarray:
    """First three latent channels mapped from [-1, 1] to 8-bit RGB (gray for one channel)."""
    channels = latent[:3].numpy()
    if channels.shape[0] < 3:
        channels = np.repeat(channels[:1], 3, axis=0)
    return np.round(np.clip((channels + 1.0) / 2.0, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)


def cmd_animate(config: PipelineConfig, self_check: bool = False, no_guidance: bool = False) -> Dict[str, Any]:
    """
    Samples every frame in overlapping windows with per-frame guidance,
    blends the windows and exports the latents.

    ``self_check`` also samples without guidance and reports whether both runs
    agree; with freshly initialized networks a disagreement is a NumericError.
    """
    frames = animation_frames(config)
    plan = plan_windows(len(frames), config.window_len, config.stride)
    logger.info(f"Temporal windows: {plan.to_list()}")
    encoder, denoiser, trained = networks(config)

    guidance = None
    if not no_guidance:
        maps, num_parts = load_rendered(config, frames)
        bundle = build_bundle(maps, num_parts, config.conditions, guidance_size(config, encoder))
        with torch.no_grad():
            guidance = torch.cat([encoder(select_items(bundle, slice(i, i + 1))) for i in frames])
    latents = synthesize(config, denoiser, guidance, len(frames))

    summary: Dict[str, Any] = {"frames": len(frames), "windows": plan.to_list(), "guidance": not no_guidance}
    if self_check:
        unguided = latents if no_guidance else synthesize(config, denoiser, None, len(frames))
        identical = bool(torch.equal(latents, unguided))
        summary["self_check"] = {"identical_to_unguided": identical, "trained_networks": trained}
        if not identical and not trained:
            raise NumericError("fresh guidance networks changed the sampled latents")
        logger.info(f"Self-check: guided and unguided outputs identical = {identical}")

    out_dir = config.output_dir / "animation"
    with output_lock(config.output_dir):
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            for i, latent in zip(frames, latents):
                Image.fromarray(latent_image(latent)).save(out_dir / f"{frame_stem(i)}_latent.png")
        except OSError as e:
            raise StorageError(f"Cannot write animation frames to {out_dir}: {e}") from e
        latents_path = write_array(out_dir / "latents.chmp", latents.numpy())
    summary.update({"output": str(out_dir), "latents": str(latents_path)})
    return summary


def cmd_attn(
    config: PipelineConfig, conditions: Optional[Sequence[str]] = None, frames: Optional[Sequence[int]] = None
) -> Dict[str, Any]:
    """One attention saliency PNG per requested condition and frame."""
    requested = resolve_conditions(conditions) if conditions else config.conditions
    disabled = [name for name in requested if name not in config.conditions]
    if disabled:
        raise InvalidArgumentError(
            f"condition(s) {disabled} are not enabled in the encoder; enabled: {list(config.conditions)}"
        )
    if not config.use_attention:
        raise InvalidArgumentError("guidance networks are built without self-attention")
    encoder, _, _ = networks(config)
    frame_list = list(frames) if frames else rendered_frames(config.maps_dir)
    maps, num_parts = load_rendered(config, frame_list)
    bundle = build_bundle(maps, num_parts, requested, guidance_size(config, encoder))

    out_dir = config.output_dir / "attention"
    written = []
    with output_lock(config.output_dir):
        for name in requested:
            for row, index in enumerate(frame_list):
                path = out_dir / f"{frame_stem(index)}_{name}_attn.png"
                dump_attention(encoder.nets[name], bundle[name][row : row + 1], path)
                written.append(str(path))
    logger.info(f"Wrote {len(written)} attention images to {out_dir}")
    return {"output": str(out_dir), "images": written}
