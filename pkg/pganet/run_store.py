"""Run directory bookkeeping: effective config, artifact records and a manifest."""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd

from utils.export import export_dataframe

from .config import RunConfig

logger = logging.getLogger(__name__)


@dataclass
class ArtifactRecord:
    """Metadata for one file written into a run directory."""
    name: str
    timestamp: str
    md5: str
    rows: Optional[int]
    summary: str


class ArtifactNotFoundError(Exception):
    """Raised when a requested artifact was never committed."""
    pass


class RunStore:
    """
    One run directory ``<out_dir>/<command>-<timestamp>/``.

    The effective configuration is written as ``config.txt`` on creation and
    every committed artifact is recorded with its hash for the manifest.
    """

    def __init__(self, out_dir: Union[str, Path], command: str, config: RunConfig):
        stamp = pd.Timestamp.now().strftime("%Y%m%d-%H%M%S-%f")
        self.command = command
        self.config = config
        self.run_dir = Path(out_dir) / f"{command}-{stamp}"
        self.run_dir.mkdir(parents=True, exist_ok=False)
        self.created_at = pd.Timestamp.now().isoformat()
        self.artifacts: Dict[str, ArtifactRecord] = {}
        self.tables: Dict[str, pd.DataFrame] = {}

        self.commit_text("config.txt", config.to_text(), summary="effective configuration")
        logger.info("Created run directory %s", self.run_dir)

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def commit_frame(
        self,
        name: str,
        df: pd.DataFrame,
        summary: str = "",
        float_format: str = "%.10g"
    ) -> Path:
        """
        Write a table as CSV and record it.

        Args:
            name: File name inside the run directory (e.g. 'bench_graphgen.csv')
            df: Result table
            summary: Human-readable description
            float_format: printf-style format for floats
        """
        content = export_dataframe(df, self.path(name), float_format=float_format)
        self._record(name, content, len(df), summary)
        return self.path(name)

    def commit_text(self, name: str, text: str, summary: str = "") -> Path:
        content = text.encode("utf-8")
        self.path(name).write_bytes(content)
        self._record(name, content, None, summary)
        return self.path(name)

    def commit_file(self, name: str, summary: str = "") -> Path:
        """Record a file some other writer already placed in the run directory."""
        target = self.path(name)
        if not target.exists():
            raise ArtifactNotFoundError(f"Artifact {name} was not written to {self.run_dir}")
        self._record(name, target.read_bytes(), None, summary)
        return target

    def load_frame(self, name: str) -> pd.DataFrame:
        """
        Read a committed table back.

        Raises:
            ArtifactNotFoundError: If no artifact of that name was committed
        """
        if name not in self.artifacts or not self.path(name).exists():
            raise ArtifactNotFoundError(f"Artifact {name} not found in {self.run_dir}")
        return pd.read_csv(self.path(name))

    def history(self) -> List[ArtifactRecord]:
        return list(self.artifacts.values())

    def export_manifest(self) -> Path:
        """
        Write ``manifest.json``: command, creation time, config and artifact records.
        """
        manifest = {
            "command": self.command,
            "created_at": self.created_at,
            "config": self.config.to_dict(),
            "artifacts": [asdict(record) for record in self.artifacts.values()]
        }
        target = self.path("manifest.json")
        with open(target, "w") as f:
            json.dump(manifest, f, indent=2, default=str)
        return target

    def _record(self, name: str, content: bytes, rows: Optional[int], summary: str) -> None:
        self.artifacts[name] = ArtifactRecord(
            name=name,
            timestamp=pd.Timestamp.now().isoformat(),
            md5=self._compute_hash(content),
            rows=rows,
            summary=summary
        )
        logger.info("Committed %s (%s)", name, summary or "no summary")

    def _compute_hash(self, content: bytes) -> str:
        """Compute hash for integrity verification."""
        return hashlib.md5(content).hexdigest()
