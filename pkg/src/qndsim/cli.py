"""Command-line driver: run a batch and write CSV traces plus a JSON manifest."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidArgumentError
from .metrics import MetricsSample
from .trajectory import BatchResult, ProtocolConfig, TrajectoryTrace, run_batch

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

TRACE_COLUMNS = ("photon_index", "detector") + MetricsSample.FIELDS
AVERAGE_COLUMNS = ("photon_index",) + MetricsSample.FIELDS

# flag -> ProtocolConfig field
FLAG_FIELDS = {
    "protocol": "protocol",
    "atoms": "atoms_per_sample_1",
    "atoms2": "atoms_per_sample_2",
    "chi_tau": "chi_tau",
    "photons": "photons_phase1",
    "photons2": "photons_phase2",
    "theta": "rotation_angle",
    "trajectories": "trajectories",
    "seed": "seed",
    "stride": "record_stride",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qndsim", description="Simulate two atomic samples entangled by photon-counting QND measurements.")
    p.add_argument("--config", type=Path, help="JSON file with ProtocolConfig fields; flags override it")
    p.add_argument("--protocol", choices=["a", "b", "c"])
    p.add_argument("--atoms", type=int, help="atoms per sample (sample 1, and sample 2 unless --atoms2)")
    p.add_argument("--atoms2", type=int, help="atoms in sample 2")
    p.add_argument("--chi-tau", type=float, help="phase per photon per atom in |1> (radians)")
    p.add_argument("--photons", type=int, help="detected photons (phase 1 for protocol b)")
    p.add_argument("--photons2", type=int, help="photons after the rotation (protocol b)")
    p.add_argument("--theta", type=float, help="rotation angle in radians")
    p.add_argument("--trajectories", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--stride", type=int, help="record metrics every STRIDE clicks")
    p.add_argument("--out", type=Path, default=Path("runs"), help="output root directory")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def parse_config(argv=None) -> tuple[ProtocolConfig, Path]:
    """Build a config from an optional JSON file overlaid with command-line flags.

    Raises UsageError naming the offending field.
    """
    args = build_parser().parse_args(argv)
    values: dict = {}
    if args.config is not None:
        try:
            loaded = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config: cannot read {args.config}: {exc}") from None
        values.update(loaded.get("config", loaded))
    for flag, name in FLAG_FIELDS.items():
        val = getattr(args, flag)
        if val is not None:
            values[name] = val
    try:
        config = ProtocolConfig.from_dict(values)
    except (InvalidArgumentError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    return config, args.out


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isnan(x):
        return ""
    return f"{x:.15g}"


@contextlib.contextmanager
def _atomic_writer(path: Path):
    """Open a temp file next to ``path``; rename over it only on success."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException as exc:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        if isinstance(exc, OSError):
            raise OSError(f"cannot write {path}: {exc}") from exc
        raise


def write_trace_csv(trace: TrajectoryTrace, path) -> None:
    with _atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for k, d, row in zip(trace.photon_index, trace.detector, trace.metrics):
            w.writerow([_fmt(k), "+" if d > 0 else "-"] + [_fmt(float(x)) for x in row])


def write_average_csv(batch: BatchResult, path) -> None:
    with _atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AVERAGE_COLUMNS)
        for k, row in zip(batch.photon_index, batch.mean_metrics):
            w.writerow([_fmt(k)] + [_fmt(float(x)) for x in row])


def _json_float(x: float):
    return None if math.isnan(x) else x


def build_manifest(batch: BatchResult, files: dict, started: str, finished: str) -> dict:
    lo, hi = batch.capture_ci
    return {
        "artifact_version": __version__,
        "config": batch.config.to_dict(),
        "started": started,
        "finished": finished,
        "files": files,
        "trajectories_written": len(batch.traces),
        "capture_count": batch.capture_count,
        "capture_fraction": _json_float(batch.capture_fraction),
        "capture_ci95": [_json_float(lo), _json_float(hi)],
        "final_mean_entropy_bits": float(np.mean([t.final_metrics.entropy_bits for t in batch.traces])),
    }


def write_batch_summary(batch: BatchResult, path, manifest_path=None, started: str = "", finished: str = "",
                        files: dict | None = None) -> dict:
    """Write the averaged-curve CSV at ``path`` and the manifest next to it."""
    path = Path(path)
    manifest_path = Path(manifest_path) if manifest_path else path.with_name("manifest.json")
    write_average_csv(batch, path)
    files = dict(files or {})
    files["average"] = path.name
    manifest = build_manifest(batch, files, started, finished)
    with _atomic_writer(manifest_path) as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def run_dir_name(config: ProtocolConfig) -> str:
    return f"protocol_{config.protocol.value}_seed_{config.seed}"


def execute(config: ProtocolConfig, out_root: Path) -> tuple[BatchResult, dict, Path]:
    started = datetime.now(timezone.utc).isoformat()
    batch = run_batch(config)
    finished = datetime.now(timezone.utc).isoformat()
    run_dir = Path(out_root) / run_dir_name(config)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {run_dir}: {exc}") from exc
    width = max(4, len(str(config.trajectories - 1)))
    traj_files = []
    for trace in batch.traces:
        name = f"trajectory_{trace.trajectory_id:0{width}d}.csv"
        write_trace_csv(trace, run_dir / name)
        traj_files.append(name)
    manifest = write_batch_summary(
        batch, run_dir / "average.csv", run_dir / "manifest.json",
        started=started, finished=finished, files={"trajectories": traj_files},
    )
    return batch, manifest, run_dir


def summary_text(batch: BatchResult, run_dir: Path) -> str:
    cfg = batch.config
    ent = np.array([t.final_metrics.entropy_bits for t in batch.traces])
    lines = [
        f"protocol {cfg.protocol.value}: N1={cfg.atoms_per_sample_1} N2={cfg.atoms_2} chi_tau={cfg.chi_tau} "
        f"photons={cfg.total_photons} angle={cfg.angle:.6g} trajectories={cfg.trajectories} seed={cfg.seed}",
        f"final entropy: mean {ent.mean():.4f} bits, min {ent.min():.4f}, max {ent.max():.4f} "
        f"(log2(N1+1) = {math.log2(min(cfg.atoms_per_sample_1, cfg.atoms_2) + 1):.4f})",
    ]
    if not math.isnan(batch.capture_fraction):
        lo, hi = batch.capture_ci
        lines.append(f"captured by psi0: {batch.capture_count}/{len(batch.traces)} = {batch.capture_fraction:.4f} "
                     f"(95% CI {lo:.4f}-{hi:.4f})")
    lines.append(f"output: {run_dir}")
    return "\n".join(lines)


def main(argv=None) -> int:
    try:
        config, out_root = parse_config(argv)
    except UsageError as exc:
        print(f"qndsim: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        batch, _, run_dir = execute(config, out_root)
    except Exception as exc:
        print(f"qndsim: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(summary_text(batch, run_dir))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
