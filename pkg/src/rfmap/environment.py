"""Environment data model, synthetic generation, and canonical JSON on-disk form.

Each environment is one JSON document holding the frame size, the building
polygons, and the 5 base-station / 30 user-equipment positions that form the
150 UE-BS pairs everything downstream consumes.
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import GRID_SIZE, Polygon, points_in_polygon

BS_COUNT = 5
UE_COUNT = 30

_PLACEMENT_TRIES = 1000


class GenerationError(RuntimeError):
    """Placement failed after bounded retries (frame too crowded)."""


class EnvironmentFormatError(ValueError):
    """Malformed environment document; the message names the offending field."""


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic rectangular-city generator."""

    building_count_range: tuple[int, int] = (4, 14)
    footprint_size_range: tuple[float, float] = (8.0, 60.0)
    side_length_range: tuple[float, float] = (120.0, 400.0)
    seed: int = 0
    vertex_jitter: float = 0.0  # fraction of footprint size, 0 = pure rectangles

    def __post_init__(self) -> None:
        lo, hi = self.building_count_range
        if not (0 <= lo <= hi):
            raise ValueError("building_count_range must be a non-empty interval >= 0")
        for name in ("footprint_size_range", "side_length_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{name} must be a non-empty positive interval")
        if not 0 <= self.vertex_jitter < 0.5:
            raise ValueError("vertex_jitter must be in [0, 0.5)")


@dataclass(eq=False)
class Environment:
    """One urban scene: frame, building footprints, BS and UE positions."""

    id: str
    side_length: float
    buildings: list[Polygon]
    bs: np.ndarray  # (5, 2)
    ue: np.ndarray  # (30, 2)

    def __post_init__(self) -> None:
        self.bs = np.asarray(self.bs, dtype=float)
        self.ue = np.asarray(self.ue, dtype=float)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.id == other.id
            and self.side_length == other.side_length
            and self.buildings == other.buildings
            and np.array_equal(self.bs, other.bs)
            and np.array_equal(self.ue, other.ue)
        )

    @property
    def meters_per_pixel(self) -> float:
        return self.side_length / GRID_SIZE

    def pairs(self) -> list[tuple[int, int]]:
        """All (ue_index, bs_index) pairs in deterministic order."""
        return [(i, j) for i in range(len(self.ue)) for j in range(len(self.bs))]


def _inside_any_building(point: np.ndarray, buildings: list[Polygon]) -> bool:
    x = np.array([point[0]])
    y = np.array([point[1]])
    for poly in buildings:
        v = poly.vertices
        if not (v[:, 0].min() <= point[0] <= v[:, 0].max() and v[:, 1].min() <= point[1] <= v[:, 1].max()):
            continue
        if points_in_polygon(x, y, poly)[0]:
            return True
    return False


def generate_environment(cfg: GeneratorConfig, env_id: str | None = None) -> Environment:
    """Deterministically generate a synthetic environment from the config seed.

    Buildings are axis-aligned rectangles (optionally jittered per vertex)
    placed fully inside the frame; overlap is allowed.  BS/UE positions are
    rejection-sampled until they fall outside every building.
    """
    rng = np.random.default_rng(cfg.seed)
    side = float(rng.uniform(*cfg.side_length_range))
    n_buildings = int(rng.integers(cfg.building_count_range[0], cfg.building_count_range[1] + 1))

    buildings: list[Polygon] = []
    for _ in range(n_buildings):
        for attempt in range(_PLACEMENT_TRIES):
            w = float(rng.uniform(*cfg.footprint_size_range))
            h = float(rng.uniform(*cfg.footprint_size_range))
            if w >= side or h >= side:
                continue
            cx = float(rng.uniform(w / 2, side - w / 2))
            cy = float(rng.uniform(h / 2, side - h / 2))
            corners = np.array(
                [
                    [cx - w / 2, cy - h / 2],
                    [cx + w / 2, cy - h / 2],
                    [cx + w / 2, cy + h / 2],
                    [cx - w / 2, cy + h / 2],
                ]
            )
            if cfg.vertex_jitter > 0:
                corners = corners + rng.uniform(
                    -cfg.vertex_jitter, cfg.vertex_jitter, size=(4, 2)
                ) * min(w, h)
                corners = np.clip(corners, 0.0, side)
            poly = Polygon(corners)
            if poly.is_simple():
                buildings.append(poly)
                break
        else:
            raise GenerationError("could not place a building inside the frame")

    def sample_points(count: int) -> np.ndarray:
        points = []
        for _ in range(count):
            for attempt in range(_PLACEMENT_TRIES):
                p = rng.uniform(0.0, side, size=2)
                if not _inside_any_building(p, buildings):
                    points.append(p)
                    break
            else:
                raise GenerationError("could not place a BS/UE point outside buildings")
        return np.array(points)

    bs = sample_points(BS_COUNT)
    ue = sample_points(UE_COUNT)
    if env_id is None:
        env_id = f"env-{cfg.seed & 0xFFFFFFFFFFFFFFFF:016x}"
    return Environment(id=env_id, side_length=side, buildings=buildings, bs=bs, ue=ue)


def validate_environment(env: Environment) -> None:
    """Raise ValueError when any environment invariant is violated."""
    if not env.side_length > 0:
        raise ValueError("side_length must be positive")
    if env.bs.shape != (BS_COUNT, 2):
        raise ValueError(f"expected {BS_COUNT} base stations, got {env.bs.shape}")
    if env.ue.shape != (UE_COUNT, 2):
        raise ValueError(f"expected {UE_COUNT} user equipments, got {env.ue.shape}")
    for name, pts in (("bs", env.bs), ("ue", env.ue)):
        if not np.all((pts >= 0) & (pts <= env.side_length)):
            raise ValueError(f"{name} points must lie inside the frame")
    for poly in env.buildings:
        if not poly.is_simple():
            raise ValueError("building polygon is self-intersecting")
    from .geometry import point_strictly_inside

    for name, pts in (("bs", env.bs), ("ue", env.ue)):
        for p in pts:
            for poly in env.buildings:
                if point_strictly_inside(p, poly):
                    raise ValueError(f"{name} point {p} lies strictly inside a building")


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def environment_to_dict(env: Environment) -> dict:
    return {
        "id": env.id,
        "side_length": env.side_length,
        "buildings": [poly.vertices.tolist() for poly in env.buildings],
        "bs": env.bs.tolist(),
        "ue": env.ue.tolist(),
    }


def environment_from_dict(doc: dict) -> Environment:
    if not isinstance(doc, dict):
        raise EnvironmentFormatError("document root must be an object")
    for key in ("id", "side_length", "buildings", "bs", "ue"):
        if key not in doc:
            raise EnvironmentFormatError(f"missing required field '{key}'")
    try:
        side = float(doc["side_length"])
    except (TypeError, ValueError) as exc:
        raise EnvironmentFormatError("field 'side_length' is not a number") from exc
    try:
        buildings = [Polygon(np.array(v, dtype=float)) for v in doc["buildings"]]
    except Exception as exc:
        raise EnvironmentFormatError(f"field 'buildings' is invalid: {exc}") from exc
    for key, count in (("bs", BS_COUNT), ("ue", UE_COUNT)):
        arr = np.asarray(doc[key], dtype=float)
        if arr.shape != (count, 2):
            raise EnvironmentFormatError(
                f"field '{key}' must be a list of {count} [x, y] points, got shape {arr.shape}"
            )
    return Environment(
        id=str(doc["id"]),
        side_length=side,
        buildings=buildings,
        bs=np.asarray(doc["bs"], dtype=float),
        ue=np.asarray(doc["ue"], dtype=float),
    )


def dumps_canonical(doc: dict) -> str:
    """Canonical JSON emission: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def serialize(env: Environment) -> str:
    return dumps_canonical(environment_to_dict(env))


def deserialize(text: str) -> Environment:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EnvironmentFormatError(f"invalid JSON: {exc}") from exc
    return environment_from_dict(doc)


def save_environment(env: Environment, path: Path | str) -> None:
    Path(path).write_text(serialize(env))


def load_environment(path: Path | str) -> Environment:
    return deserialize(Path(path).read_text())


# ---------------------------------------------------------------------------
# External dataset ingestion
# ---------------------------------------------------------------------------


class DatasetAdapter(abc.ABC):
    """Extension point for ingesting externally produced layout datasets.

    Third-party datasets ship their own directory layouts and coordinate
    conventions, so ingestion is an adapter interface rather than a committed
    parser.  Implementations map one dataset directory to :class:`Environment`
    objects plus whatever raw per-pair observations the dataset provides;
    downstream stages only ever see the adapter's output.
    """

    @abc.abstractmethod
    def environment_ids(self, root: Path) -> list[str]:
        """List the environment identifiers available under ``root``."""

    @abc.abstractmethod
    def load(self, root: Path, env_id: str) -> tuple[Environment, dict]:
        """Load one environment and its raw observation payload."""


class ExternalLayoutAdapter(DatasetAdapter):
    """Reference stub: subclass and implement both methods for a real dataset.

    Typical subclass work: locate the per-environment geometry file, convert
    footprints into frame coordinates (meters, origin at the lower-left
    corner), select the 5 BS / 30 UE subset, and return simulator outputs
    (angles in radians, delays in seconds, per-band losses in dB) in the
    payload dict keyed by (ue_index, bs_index).
    """

    def environment_ids(self, root: Path) -> list[str]:
        raise NotImplementedError(
            "ExternalLayoutAdapter is a stub; subclass it for your dataset layout"
        )

    def load(self, root: Path, env_id: str) -> tuple[Environment, dict]:
        raise NotImplementedError(
            "ExternalLayoutAdapter is a stub; subclass it for your dataset layout"
        )
