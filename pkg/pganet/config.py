"""Run configuration: flat ``key = value`` files with typed defaults and overrides."""

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .grid_graph import NeighborMode

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for unknown keys and unparsable or out-of-range values."""
    pass


@dataclass
class RunConfig:
    """
    Every setting a command reads.

    Optimizer defaults are sized for the toy run (about 1200 steps): lr 3e-3,
    a 100-step warm-up and batches holding every identity. The full-scale
    recipe is lr = 3e-4, warmup_iters = 500.
    """
    height: int = 16
    width: int = 8
    in_channels: int = 3
    embed_dim: int = 16
    reduced_dim: int = 0
    depth: int = 2
    neighbor_mode: str = "four"
    self_loops: bool = False
    literal_softmax: bool = False
    value_projection: bool = False

    num_ids: int = 8
    per_id: int = 20
    occlusion_prob: float = 0.0
    max_shift: int = 2
    camera_noise: List[float] = field(default_factory=lambda: [0.2, 0.8])

    beta: float = 5e-4
    margin: float = 0.3
    smoothing: float = 0.1
    lr: float = 3e-3
    weight_decay: float = 5e-4
    warmup_iters: int = 100
    batch_p: int = 8
    batch_k: int = 2
    epochs: int = 200

    seed: int = 0
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    metric: str = "euclidean"

    bench_sizes: List[int] = field(default_factory=lambda: [128, 512, 2048, 8192])
    bench_modes: List[str] = field(default_factory=lambda: ["four", "eight", "two_channel"])
    bench_repeats: int = 3

    sweep_layers: List[int] = field(default_factory=lambda: [0, 1, 2, 3])
    sweep_neighbors: List[str] = field(
        default_factory=lambda: ["four", "eight", "two_channel", "fully_connected"]
    )

    verify_seeds: int = 10
    verify_corrupt_grid: str = ""

    out_dir: str = "runs"

    def __post_init__(self):
        self.validate()

    @property
    def effective_reduced_dim(self) -> Optional[int]:
        """None lets the layer pick max(1, features // 2)."""
        return self.reduced_dim or None

    @property
    def corrupt_grid(self) -> Optional[Tuple[int, int]]:
        if not self.verify_corrupt_grid:
            return None
        h, w = self.verify_corrupt_grid.lower().split("x")
        return int(h), int(w)

    def validate(self) -> None:
        positive = ["height", "width", "in_channels", "embed_dim", "num_ids", "per_id",
                    "batch_p", "batch_k", "bench_repeats", "verify_seeds"]
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        non_negative = ["reduced_dim", "depth", "max_shift", "beta", "margin",
                        "weight_decay", "warmup_iters", "epochs"]
        for name in non_negative:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")

        if self.num_ids < 2:
            raise ConfigError(f"num_ids must be >= 2, got {self.num_ids}")
        if self.per_id < 4:
            raise ConfigError(f"per_id must be >= 4, got {self.per_id}")
        if self.batch_p > self.num_ids or self.batch_p < 2 or self.batch_k < 2:
            raise ConfigError(
                f"batch_p must be in [2, num_ids={self.num_ids}] and batch_k >= 2, "
                f"got {self.batch_p} and {self.batch_k}"
            )
        if not 0.0 <= self.smoothing < 1.0:
            raise ConfigError(f"smoothing must be in [0, 1), got {self.smoothing}")
        if not 0.0 <= self.occlusion_prob <= 1.0:
            raise ConfigError(f"occlusion_prob must be in [0, 1], got {self.occlusion_prob}")
        if len(self.camera_noise) != 2 or any(s < 0 for s in self.camera_noise):
            raise ConfigError(f"camera_noise must be two non-negative values, got {self.camera_noise}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.bench_repeats < 3:
            raise ConfigError(f"bench_repeats must be >= 3, got {self.bench_repeats}")
        if self.metric not in ("euclidean", "cosine"):
            raise ConfigError(f"Unknown metric: {self.metric}")
        if not self.seeds:
            raise ConfigError("seeds must name at least one seed")
        if any(n < 1 for n in self.bench_sizes) or any(d < 0 for d in self.sweep_layers):
            raise ConfigError("bench_sizes must be >= 1 and sweep_layers >= 0")

        try:
            self.neighbor_mode = NeighborMode.parse(self.neighbor_mode).value
            self.bench_modes = [NeighborMode.parse(m).value for m in self.bench_modes]
            self.sweep_neighbors = [NeighborMode.parse(m).value for m in self.sweep_neighbors]
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if NeighborMode.FULLY_CONNECTED.value in self.bench_modes:
            raise ConfigError("fully_connected has no generator/oracle pair to benchmark")

        if self.verify_corrupt_grid:
            try:
                h, w = self.corrupt_grid
            except ValueError as e:
                raise ConfigError(f"verify_corrupt_grid must look like HxW, got {self.verify_corrupt_grid!r}") from e
            if h < 1 or w < 1:
                raise ConfigError(f"verify_corrupt_grid extents must be >= 1, got {self.verify_corrupt_grid}")

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self) -> str:
        """Render in the file format; ``load_run_config`` reads it back to an equal config."""
        lines = ["# effective run configuration"]
        for name, value in self.to_dict().items():
            lines.append(f"{name} = {_format_value(value)}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(str(v) for v in value)
    return str(value)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key: str, text: str) -> Any:
    if key not in _FIELD_TYPES:
        raise ConfigError(f"Unknown configuration key: {key}")
    kind = _FIELD_TYPES[key]
    text = text.strip()
    try:
        if kind in (bool, "bool"):
            return _parse_bool(text)
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
        if kind in (str, "str"):
            return text
        items = [item.strip() for item in text.split(",") if item.strip()]
        if "int" in str(kind):
            return [int(item) for item in items]
        if "float" in str(kind):
            return [float(item) for item in items]
        return items
    except ValueError as e:
        raise ConfigError(f"Invalid value for {key}: {text!r} ({e})") from e


def parse_assignments(lines: Sequence[str], source: str = "<overrides>") -> Dict[str, Any]:
    """
    Parse ``key = value`` lines; ``#`` starts a comment and blank lines are skipped.

    Raises:
        ConfigError: Malformed line, unknown key or unparsable value
    """
    values = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key = value, got {raw.strip()!r}")
        key, text = line.split("=", 1)
        key = key.strip()
        values[key] = _convert(key, text)
    return values


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Build a RunConfig from defaults, then the file at ``path``, then ``overrides``.

    Override values may be strings (from ``--set key=value``) or already typed.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Configuration file not found: {path}")
        values.update(parse_assignments(path.read_text().splitlines(), source=str(path)))
        logger.debug("Loaded %d keys from %s", len(values), path)

    for key, value in (overrides or {}).items():
        values[key] = _convert(key, value) if isinstance(value, str) else value
        if key not in _FIELD_TYPES:
            raise ConfigError(f"Unknown configuration key: {key}")

    try:
        return replace(RunConfig(), **values)
    except TypeError as e:
        raise ConfigError(str(e)) from e
