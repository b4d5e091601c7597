"""Command-line entry point: synth | trajgen | align | reframe | run | eval.

Every subcommand prints a one-line JSON summary to stdout and writes its
artifacts under --out.  Exit codes: 0 success, 1 usage error, 2 data error.
Outputs are deterministic for a fixed --seed; report files exclude wall-clock
timings so reruns are byte-identical (timings appear in the stdout summary).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import alignment, formats, metrics, rehab, synthscene
from .errors import CamReframeError, InvalidSpec
from .geometry import Pose, rotation_about_axis
from .reframe import IdentityCodec, PoolingCodec, downsample_mask, lift_frames, render_cloud
from .scheduler import OracleDenoiser, ToyDenoiser, make_schedule, select_timesteps
from .trajectory import (
    MotionKind,
    Trajectory,
    TrajectoryFrame,
    basic_trajectory,
    parse_realestate,
)


@dataclass
class PipelineConfig:
    """JSON-loadable pipeline settings; unknown keys are rejected."""

    bundle: str = ""
    trajectory: str = ""
    out: str = "out"
    sample_steps: int = 25
    warp_step: int = 8
    noise_offset: int = 3
    guidance: float = 7.5
    mode: str = "time-aware"
    seed: int = 0
    splat_radius: float = 1.0
    target_scale: float = 1.0
    train_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    codec: str = "identity"
    codec_factor: int = 4
    denoiser: str = "oracle"
    align_steps: int = 300
    align_window: int = 3


def load_pipeline_config(path) -> PipelineConfig:
    doc = formats.read_json(path)
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise InvalidSpec(f"unknown config keys: {', '.join(unknown)}")
    return PipelineConfig(**doc)


def default_source_trajectory(frame_count: int) -> Trajectory:
    """Gentle built-in sweep: 1 deg/frame about a tilted axis plus a slow drift."""
    frames = tuple(
        TrajectoryFrame(
            j,
            Pose(
                rotation_about_axis([0.2, 1.0, 0.1], np.deg2rad(1.0 * j)),
                np.array([0.03 * j, -0.015 * j, 0.01 * j]),
            ),
        )
        for j in range(frame_count)
    )
    return Trajectory(frames, "default-sweep")


def load_trajectory(path, width: float = 1.0, height: float = 1.0) -> Trajectory:
    """RealEstate10K text (.txt) or the JSON pose-list format written by eval/align."""
    path = Path(path)
    if path.suffix == ".json":
        doc = formats.read_json(path)
        frames = []
        for j, m in enumerate(doc["poses"]):
            m = np.asarray(m, dtype=np.float64)
            ts = doc.get("timestamps", list(range(len(doc["poses"]))))[j]
            frames.append(TrajectoryFrame(int(ts), Pose(m[:, :3], m[:, 3])))
        return Trajectory(tuple(frames), doc.get("source_id", ""))
    return parse_realestate(path.read_text(encoding="utf-8"), width, height)


def trajectory_json(t: Trajectory) -> dict:
    return {
        "source_id": t.source_id,
        "timestamps": [f.timestamp for f in t.frames],
        "poses": [f.pose.matrix34().tolist() for f in t.frames],
    }


def save_bundle(out_dir, bundle: synthscene.GroundTruthBundle, meta: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_tensor(out / "frames.lrtf", bundle.frames.astype(np.float32))
    formats.write_tensor(out / "depth.lrtf", bundle.depth.astype(np.float32))
    formats.write_tensor(out / "pointmaps.lrtf", bundle.pointmaps.astype(np.float32))
    formats.write_tensor(out / "validity.lrtf", bundle.validity.astype(np.float32))
    k = bundle.intrinsics
    (out / "poses.txt").write_text(
        formats.serialize_realestate(bundle.source_poses, float(k.width), float(k.height)),
        encoding="utf-8",
    )
    formats.write_json(out / "meta.json", meta)
    formats.write_ppm(out / "frame0.ppm", bundle.frames[0])


def load_bundle(bundle_dir) -> synthscene.GroundTruthBundle:
    d = Path(bundle_dir)
    meta = formats.read_json(d / "meta.json")
    w, h = meta["resolution"]
    k = synthscene.default_intrinsics(int(w), int(h))
    poses = parse_realestate((d / "poses.txt").read_text(encoding="utf-8"), float(w), float(h))
    return synthscene.GroundTruthBundle(
        frames=formats.read_tensor(d / "frames.lrtf").astype(np.float64),
        depth=formats.read_tensor(d / "depth.lrtf").astype(np.float64),
        pointmaps=formats.read_tensor(d / "pointmaps.lrtf").astype(np.float64),
        validity=formats.read_tensor(d / "validity.lrtf").astype(np.float64),
        source_poses=poses,
        intrinsics=k,
    )


def save_observations(obs_dir, observations) -> None:
    out = Path(obs_dir)
    out.mkdir(parents=True, exist_ok=True)
    edges = []
    for i, ob in enumerate(observations):
        edges.append({"ref": ob.ref_frame, "src": ob.src_frame})
        formats.write_tensor(out / f"edge{i:04d}_qref.lrtf", ob.pointmap_ref.astype(np.float32))
        formats.write_tensor(out / f"edge{i:04d}_qsrc.lrtf", ob.pointmap_src.astype(np.float32))
        formats.write_tensor(out / f"edge{i:04d}_cref.lrtf", ob.confidence_ref.astype(np.float32))
        formats.write_tensor(out / f"edge{i:04d}_csrc.lrtf", ob.confidence_src.astype(np.float32))
    formats.write_json(out / "edges.json", {"edges": edges})


def load_observations(obs_dir) -> list:
    d = Path(obs_dir)
    doc = formats.read_json(d / "edges.json")
    out = []
    for i, e in enumerate(doc["edges"]):
        out.append(
            alignment.EdgeObservation(
                ref_frame=int(e["ref"]),
                src_frame=int(e["src"]),
                pointmap_ref=formats.read_tensor(d / f"edge{i:04d}_qref.lrtf").astype(np.float64),
                pointmap_src=formats.read_tensor(d / f"edge{i:04d}_qsrc.lrtf").astype(np.float64),
                confidence_ref=formats.read_tensor(d / f"edge{i:04d}_cref.lrtf").astype(np.float64),
                confidence_src=formats.read_tensor(d / f"edge{i:04d}_csrc.lrtf").astype(np.float64),
            )
        )
    return out


def _make_codec(name: str, factor: int):
    if name == "identity":
        return IdentityCodec()
    if name == "pool":
        return PoolingCodec(factor)
    raise InvalidSpec(f"unknown codec {name!r}")


def _make_denoiser(name: str, target, sched):
    if name == "oracle":
        return OracleDenoiser(target, sched)
    if name == "toy":
        return ToyDenoiser(target, sched)
    raise InvalidSpec(f"unknown denoiser {name!r}")


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise InvalidSpec(f"resolution must look like 64x48, got {text!r}") from None


def _emit(summary: dict) -> None:
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")


def cmd_synth(args) -> int:
    w, h = _parse_resolution(args.resolution)
    scene = synthscene.make_scene(args.kind, args.frames, (w, h), args.seed)
    k = synthscene.default_intrinsics(w, h)
    if args.poses:
        poses = load_trajectory(args.poses, float(w), float(h))
    else:
        poses = default_source_trajectory(args.frames)
    bundle = synthscene.make_bundle(scene, poses, k)
    meta = {"kind": args.kind, "frames": args.frames, "resolution": [w, h], "seed": args.seed}
    save_bundle(args.out, bundle, meta)
    _emit({"command": "synth", "out": str(args.out), **meta})
    return 0


def cmd_trajgen(args) -> int:
    kind = MotionKind(args.kind)
    traj = basic_trajectory(kind, args.magnitude, args.frames, args.orbit_radius)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(formats.serialize_realestate(traj, 1.0, 1.0), encoding="utf-8")
    _emit({"command": "trajgen", "kind": args.kind, "frames": args.frames, "out": str(out)})
    return 0


def cmd_align(args) -> int:
    t0 = time.perf_counter()
    if args.obs:
        observations = load_observations(args.obs)
    else:
        bundle = load_bundle(args.bundle)
        frame_count = len(bundle.source_poses)
        edges = alignment.build_graph(frame_count, args.window)
        scene_meta = formats.read_json(Path(args.bundle) / "meta.json")
        scene = synthscene.make_scene(
            scene_meta["kind"], scene_meta["frames"], tuple(scene_meta["resolution"]), scene_meta["seed"]
        )
        observations = synthscene.emit_edge_observations(
            scene, bundle.source_poses, edges, bundle.intrinsics, args.noise_sigma, args.seed
        )
    cfg = alignment.AlignmentConfig(steps=args.steps, seed=args.seed)
    state = alignment.optimize_alignment(observations, config=cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.save_obs:
        save_observations(out / "obs", observations)
    formats.write_tensor(out / "pointmaps.lrtf", state.global_pointmaps.astype(np.float32))
    formats.write_tensor(out / "log_scales.lrtf", state.log_scales.astype(np.float32))
    summary = {
        "final_loss": state.final_loss,
        "initial_loss": state.initial_loss,
        "edges": [list(e) for e in state.edges],
        "poses": [p.matrix34().tolist() for p in state.frame_poses],
    }
    formats.write_json(out / "summary.json", summary)
    _emit(
        {
            "command": "align",
            "out": str(out),
            "edges": len(state.edges),
            "initial_loss": state.initial_loss,
            "final_loss": state.final_loss,
            "elapsed_s": time.perf_counter() - t0,
        }
    )
    return 0


def cmd_reframe(args) -> int:
    bundle = load_bundle(args.bundle)
    k = bundle.intrinsics
    control = load_trajectory(args.trajectory, float(k.width), float(k.height))
    target = rehab.compute_target_poses(control, bundle.source_poses, args.target_scale)
    cloud = lift_frames(bundle.frames, bundle.pointmaps, bundle.validity)
    video, mask = render_cloud(cloud, target.poses(), k, args.mode, args.splat_radius)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_tensor(out / "warped.lrtf", video.astype(np.float32))
    formats.write_tensor(out / "mask.lrtf", mask.astype(np.float32))
    for j in range(video.shape[0]):
        formats.write_ppm(out / f"warped{j:03d}.ppm", video[j])
        formats.write_pgm(out / f"mask{j:03d}.pgm", mask[j])
    coverage = float(mask.mean())
    _emit({"command": "reframe", "out": str(out), "coverage": coverage, "mode": args.mode})
    return 0


def cmd_run(args) -> int:
    config = load_pipeline_config(args.config) if args.config else PipelineConfig()
    for name in (
        "bundle", "trajectory", "out", "sample_steps", "warp_step", "noise_offset",
        "guidance", "mode", "seed", "splat_radius", "target_scale", "codec", "denoiser",
    ):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if not config.bundle or not config.trajectory:
        raise InvalidSpec("run needs a bundle and a trajectory (config or flags)")

    bundle = load_bundle(config.bundle)
    k = bundle.intrinsics
    control = load_trajectory(config.trajectory, float(k.width), float(k.height))
    sched = make_schedule(config.train_steps, "linear", config.beta_start, config.beta_end)
    steps = select_timesteps(config.train_steps, config.sample_steps)
    codec = _make_codec(config.codec, config.codec_factor)
    target_latent = codec.encode(bundle.frames)
    denoiser = _make_denoiser(config.denoiser, target_latent, sched)
    run_cfg = rehab.RunConfig(
        sample_steps=config.sample_steps,
        warp_step=config.warp_step,
        noise_offset=config.noise_offset,
        guidance=config.guidance,
        mode=config.mode,
        seed=config.seed,
        splat_radius=config.splat_radius,
        target_scale=config.target_scale,
    )
    video, latent, mask, report = rehab.run_pipeline(
        config.seed,
        denoiser,
        codec,
        sched,
        steps,
        run_cfg,
        bundle.pointmaps,
        bundle.validity,
        bundle.source_poses,
        control,
        k,
    )
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_tensor(out / "video.lrtf", video.astype(np.float32))
    formats.write_tensor(out / "latent.lrtf", latent.astype(np.float32))
    formats.write_tensor(out / "mask.lrtf", mask.astype(np.float32))
    for j in range(video.shape[0]):
        formats.write_ppm(out / f"frame{j:03d}.ppm", video[j])
        formats.write_pgm(out / f"mask{j:03d}.pgm", mask[j])
    timings = report.pop("timings")
    formats.write_json(out / "report.json", report)
    _emit(
        {
            "command": "run",
            "out": str(out),
            "mask_coverage": report["mask_coverage"],
            "mode": report["mode"],
            "warp_step": report["warp_step"],
            "noise_offset": report["noise_offset"],
            "seed": config.seed,
            "timings": timings,
        }
    )
    return 0


def cmd_eval(args) -> int:
    est = load_trajectory(args.est)
    gt = load_trajectory(args.gt)
    report = metrics.pose_error_report(est, gt)
    summary = {
        "command": "eval",
        "rot_error": report.rot_error,
        "trans_error": report.trans_error,
        "frames": len(est),
    }
    if args.out:
        formats.write_json(
            args.out,
            {
                "rot_error": report.rot_error,
                "trans_error": report.trans_error,
                "per_frame_rot": list(report.per_frame_rot),
                "per_frame_trans": list(report.per_frame_trans),
            },
        )
        summary["out"] = str(args.out)
    _emit(summary)
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="camreframe", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", parents=[], help="render a synthetic ground-truth bundle")
    sp.add_argument("--kind", choices=["static", "dynamic"], default="static")
    sp.add_argument("--frames", type=int, default=16)
    sp.add_argument("--resolution", default="64x48")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--poses", default=None, help="source trajectory file (default: built-in sweep)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    tp = sub.add_parser("trajgen", help="generate a basic motion trajectory")
    tp.add_argument("--kind", choices=[m.value for m in MotionKind], required=True)
    tp.add_argument("--magnitude", type=float, default=0.5)
    tp.add_argument("--frames", type=int, default=16)
    tp.add_argument("--orbit-radius", type=float, default=None)
    tp.add_argument("--out", required=True)
    tp.set_defaults(func=cmd_trajgen)

    ap = sub.add_parser("align", help="global point-map alignment")
    ap.add_argument("--bundle", default=None, help="bundle dir (observations generated on the fly)")
    ap.add_argument("--obs", default=None, help="observation dir written by --save-obs")
    ap.add_argument("--window", type=int, default=3)
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--noise-sigma", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--save-obs", action="store_true")
    ap.add_argument("--out", required=True)
    ap.set_defaults(func=cmd_align)

    rp = sub.add_parser("reframe", help="lift and re-render ground truth at target poses")
    rp.add_argument("--bundle", required=True)
    rp.add_argument("--trajectory", required=True)
    rp.add_argument("--mode", choices=["time-aware", "time-static"], default="time-aware")
    rp.add_argument("--splat-radius", type=float, default=1.0)
    rp.add_argument("--target-scale", type=float, default=1.0)
    rp.add_argument("--out", required=True)
    rp.set_defaults(func=cmd_reframe)

    up = sub.add_parser("run", help="full camera-controlled denoising pipeline")
    up.add_argument("--config", default=None)
    up.add_argument("--bundle", default=None)
    up.add_argument("--trajectory", default=None)
    up.add_argument("--out", default=None)
    up.add_argument("--sample-steps", type=int, default=None, dest="sample_steps")
    up.add_argument("--warp-step", type=int, default=None, dest="warp_step", choices=[0, 8, 16])
    up.add_argument("--noise-offset", type=int, default=None, dest="noise_offset", choices=[0, 3, 5])
    up.add_argument("--guidance", type=float, default=None)
    up.add_argument("--mode", choices=["time-aware", "time-static"], default=None)
    up.add_argument("--seed", type=int, default=None)
    up.add_argument("--splat-radius", type=float, default=None, dest="splat_radius")
    up.add_argument("--target-scale", type=float, default=None, dest="target_scale")
    up.add_argument("--codec", choices=["identity", "pool"], default=None)
    up.add_argument("--denoiser", choices=["oracle", "toy"], default=None)
    up.set_defaults(func=cmd_run)

    ep = sub.add_parser("eval", help="pose error metrics between two trajectories")
    ep.add_argument("--est", required=True)
    ep.add_argument("--gt", required=True)
    ep.add_argument("--out", default=None)
    ep.set_defaults(func=cmd_eval)
    return p


def _apply_thread_cap() -> None:
    raw = os.environ.get("REFRAME_THREADS", "")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        raise InvalidSpec(f"REFRAME_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise InvalidSpec("REFRAME_THREADS must be >= 0 (0 = auto)")
    if n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(n))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_thread_cap()
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (CamReframeError, OSError, KeyError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
