from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import csv
import json
import logging

import numpy as np

from catenoid_lab.core.exceptions import StorageError
from catenoid_lab.core.geometry import background_coeffs
from catenoid_lab.models.models import (
    BackgroundCoeffs,
    BackgroundKind,
    RadialGrid,
    RadialState,
    TerminationReason,
    Trajectory,
)
from catenoid_lab.schemas.schemas import DiagnosticsRecord, Manifest

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = "v1"
CHECKPOINT_MAGIC = f"# catenoid-lab checkpoint {CHECKPOINT_VERSION}"
FLOAT_FORMAT = "%.17g"


def format_float(value: float) -> str:
    return FLOAT_FORMAT % value


# Run directory repository
class RunRepository:
    """
    Create and read the artifacts of one run directory.
    """

    def __init__(self, run_dir):
        self.run_dir = Path(run_dir)

    def _path(self, name: str) -> Path:
        return self.run_dir / name

    def _open(self, name: str, mode: str):
        path = self._path(name)
        try:
            if "w" in mode:
                path.parent.mkdir(parents=True, exist_ok=True)
            return open(path, mode, newline="" if name.endswith(".csv") else None)
        except OSError as e:
            raise StorageError(f"Cannot open {path}: {e}")

    def exists(self, name: str) -> bool:
        return self._path(name).exists()

    # JSON artifacts
    def write_json(self, name: str, payload) -> Path:
        try:
            with self._open(name, "w") as handle:
                json.dump(payload, handle, indent=2, sort_keys=True, default=str)
        except OSError as e:
            raise StorageError(f"Failed to write {name}: {e}")
        return self._path(name)

    def read_json(self, name: str) -> dict:
        try:
            with self._open(name, "r") as handle:
                return json.load(handle)
        except json.JSONDecodeError as e:
            raise StorageError(f"Malformed JSON in {self._path(name)}: {e}")

    def write_manifest(self, manifest: Manifest) -> Path:
        return self.write_json("manifest.json", manifest.model_dump(mode="json"))

    def write_error(self, record: dict) -> Path:
        return self.write_json("error.json", record)

    # CSV artifacts
    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        """
        Floats at 17 significant digits; other cells as str.
        """
        try:
            with self._open(name, "w") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([format_float(v) if isinstance(v, float) else str(v) for v in row])
        except OSError as e:
            raise StorageError(f"Failed to write {name}: {e}")
        return self._path(name)

    def read_csv(self, name: str) -> List[Dict[str, str]]:
        with self._open(name, "r") as handle:
            return list(csv.DictReader(handle))

    def write_diagnostics(self, records: Sequence[DiagnosticsRecord], name: str = "diagnostics.csv") -> Path:
        if not records:
            return self.write_csv(name, ["t"], [])
        return self.write_csv(
            name,
            records[0].csv_header(),
            ([float(v) for v in record.csv_values()] for record in records),
        )

    # Checkpoints
    def write_checkpoint(self, state: RadialState, background: BackgroundKind, index: int) -> Path:
        name = f"checkpoints/snapshot_{index:05d}.txt"
        grid = state.grid
        lines = [
            CHECKPOINT_MAGIC,
            f"# t = {format_float(state.t)}",
            f"# r_min = {format_float(grid.r_min)}",
            f"# r_max = {format_float(grid.r_max)}",
            f"# n = {grid.n}",
            f"# background = {BackgroundKind(background).value}",
        ]
        lines.extend(f"{format_float(e)} {format_float(v)}" for e, v in zip(state.eps, state.eps_t))
        try:
            with self._open(name, "w") as handle:
                handle.write("\n".join(lines) + "\n")
        except OSError as e:
            raise StorageError(f"Failed to write checkpoint {name}: {e}")
        return self._path(name)

    def read_checkpoint(self, path) -> Tuple[RadialState, BackgroundKind]:
        path = Path(path)
        try:
            text = path.read_text().splitlines()
        except OSError as e:
            raise StorageError(f"Cannot read checkpoint {path}: {e}")
        if not text or text[0].strip() != CHECKPOINT_MAGIC:
            raise StorageError(f"Unsupported checkpoint header in {path}: {text[0] if text else '<empty>'}")

        header: Dict[str, str] = {}
        body = []
        for line in text[1:]:
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                header[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)

        try:
            grid = RadialGrid(r_min=float(header["r_min"]), r_max=float(header["r_max"]), n=int(header["n"]))
            values = np.loadtxt(body, ndmin=2)
            state = RadialState(t=float(header["t"]), eps=values[:, 0], eps_t=values[:, 1], grid=grid)
            background = BackgroundKind(header["background"])
        except (KeyError, ValueError, IndexError) as e:
            raise StorageError(f"Corrupt checkpoint {path}: {e}")
        return state, background

    def checkpoint_paths(self) -> List[Path]:
        return sorted(self._path("checkpoints").glob("snapshot_*.txt"))

    def load_snapshots(self) -> Tuple[List[RadialState], BackgroundKind]:
        paths = self.checkpoint_paths()
        if not paths:
            raise StorageError(f"No checkpoints found in {self.run_dir}")
        loaded = [self.read_checkpoint(path) for path in paths]
        kinds = {kind for _, kind in loaded}
        if len(kinds) != 1:
            raise StorageError(f"Checkpoints in {self.run_dir} mix backgrounds: {sorted(k.value for k in kinds)}")
        return [state for state, _ in loaded], kinds.pop()

    def load_trajectory(self) -> Tuple[Trajectory, BackgroundCoeffs]:
        """
        Rebuild a stored radial run; records are the diagnostics.csv rows.
        """
        snapshots, kind = self.load_snapshots()
        records: List[Optional[dict]] = self.read_csv("diagnostics.csv") if self.exists("diagnostics.csv") else []
        if len(records) != len(snapshots):
            records = [None] * len(snapshots)

        termination = TerminationReason.COMPLETED
        if self.exists("manifest.json"):
            tag = self.read_json("manifest.json").get("termination")
            if tag:
                termination = TerminationReason(tag)

        bg = background_coeffs(snapshots[0].grid, kind)
        logger.info(f"Loaded {len(snapshots)} snapshots from {self.run_dir}")
        return Trajectory(snapshots=snapshots, records=records, termination=termination, background=kind), bg
