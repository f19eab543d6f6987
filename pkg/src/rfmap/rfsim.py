"""Synthetic RF observations per UE-BS pair: paths, losses, labels, features.

Path candidates are the direct segment plus single-bounce specular
reflections off building wall segments found with the image method (mirror
the BS across the wall line, intersect the UE-to-mirror segment with the
wall).  A candidate survives only when both legs stay out of every building
interior; the five shortest survivors, sorted by time of arrival, form the
path-level observation for the pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import Environment
from .geometry import BinaryMap, Polygon, rasterize, segment_blocked, segment_pixels

SPEED_OF_LIGHT = 299792458.0  # m/s

#: Carrier bands (GHz) for aggregated path-loss observations.
BANDS_GHZ: tuple[float, ...] = (2.6, 6.0, 28.0, 60.0, 100.0)

MAX_PATHS = 5
R1_DIM = 19  # 5 paths x (aoa, aod, toa) + 4 coordinates
R2_DIM = 9  # 5 band losses + 4 coordinates

#: Losses past this cap (including infinity for unreachable pairs) are pinned
#: to the cap before standardization.
LOSS_CAP_DB = 160.0
R2_MEAN_DB = 102.0
R2_STD_DB = 22.0

FSPL_CONSTANT_DB = -147.55

LOS = "LOS"
NLOS = "NLOS"


class PathLossError(ValueError):
    """Invalid path-loss query (e.g. co-located pair)."""


@dataclass
class PathRecord:
    """One propagation path: arrival/departure angles (rad) and delay (s)."""

    aoa: float
    aod: float
    toa: float
    kind: str  # "direct" | "reflected"

    def __post_init__(self) -> None:
        if not self.toa > 0:
            raise ValueError("toa must be positive")
        for name in ("aoa", "aod"):
            if not -math.pi <= getattr(self, name) <= math.pi:
                raise ValueError(f"{name} must be in [-pi, pi]")
        if self.kind not in ("direct", "reflected"):
            raise ValueError("kind must be 'direct' or 'reflected'")


@dataclass
class PathLossTable:
    """Per-band path loss in positive dB (math.inf for unreachable pairs)."""

    loss_db: dict[float, float]

    def __post_init__(self) -> None:
        if set(self.loss_db) != set(BANDS_GHZ):
            raise ValueError(f"loss table must cover exactly the bands {BANDS_GHZ}")
        for band, loss in self.loss_db.items():
            if not (loss >= 0 or math.isinf(loss)):
                raise ValueError(f"loss for {band} GHz must be >= 0 or inf, got {loss}")


@dataclass
class RadioFeature:
    """Normalized per-pair feature vector at granularity 'r1' (19) or 'r2' (9)."""

    granularity: str
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        expected = {"r1": R1_DIM, "r2": R2_DIM}.get(self.granularity)
        if expected is None:
            raise ValueError("granularity must be 'r1' or 'r2'")
        if self.values.shape != (expected,):
            raise ValueError(f"'{self.granularity}' vector must have length {expected}")


@dataclass(frozen=True)
class NoiseProfile:
    """Carrier-dependent Gaussian angle-noise magnitudes (degrees)."""

    carrier_ghz: float
    sigma_aod_deg: float
    sigma_aoa_deg: float

    _ALLOWED = {28.0: (8.5, 10.5), 73.0: (5.5, 8.5)}

    def __post_init__(self) -> None:
        expected = self._ALLOWED.get(self.carrier_ghz)
        if expected is None:
            raise ValueError("carrier must be 28 or 73 GHz")
        got = (self.sigma_aod_deg, self.sigma_aoa_deg)
        # (0, 0) is permitted as an explicit no-noise override for tests.
        if got != expected and got != (0.0, 0.0):
            raise ValueError(
                f"sigma for {self.carrier_ghz} GHz must be aod={expected[0]}, aoa={expected[1]}"
            )


NOISE_28GHZ = NoiseProfile(28.0, 8.5, 10.5)
NOISE_73GHZ = NoiseProfile(73.0, 5.5, 8.5)


def fspl_db(distance_m: float, frequency_hz: float) -> float:
    """Free-space path loss: 20 log10(d) + 20 log10(f) - 147.55 dB."""
    if distance_m <= 0:
        raise PathLossError("distance must be positive")
    return 20.0 * math.log10(distance_m) + 20.0 * math.log10(frequency_hz) + FSPL_CONSTANT_DB


# ---------------------------------------------------------------------------
# Path tracing
# ---------------------------------------------------------------------------


@dataclass
class _Candidate:
    length: float
    first_point: np.ndarray  # first point the departing ray heads toward
    arrival_point: np.ndarray  # point the BS sees the incoming ray from
    kind: str
    blocked: bool


def _walls(buildings: list[Polygon]) -> tuple[np.ndarray, np.ndarray]:
    if not buildings:
        return np.zeros((0, 2)), np.zeros((0, 2))
    p0 = np.concatenate([poly.vertices for poly in buildings])
    p1 = np.concatenate([np.roll(poly.vertices, -1, axis=0) for poly in buildings])
    return p0, p1


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """z component of the cross product for stacked 2-D vectors."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _reflection_geometry(
    ue: np.ndarray, bs: np.ndarray, buildings: list[Polygon]
) -> list[tuple[float, np.ndarray]]:
    """Image-method reflection points (one bounce), ignoring occlusion.

    Returns (path_length, reflection_point) for every wall where UE and BS
    lie strictly on the same side and the UE-to-mirror segment crosses the
    open wall segment.
    """
    p0, p1 = _walls(buildings)
    if len(p0) == 0:
        return []
    e = p1 - p0
    # Side of the wall line for both endpoints; reflections need both strictly
    # on the same side, otherwise the mirror construction is aphysical.
    s_ue = _cross2(e, ue - p0)
    s_bs = _cross2(e, bs - p0)
    eps = 1e-9 * max(1.0, float(np.abs(p0).max())) ** 2
    same_side = (s_ue * s_bs) > eps

    ee = np.einsum("ij,ij->i", e, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        # Mirror of bs across each wall's supporting line.
        t_foot = np.einsum("ij,ij->i", bs - p0, e) / ee
        foot = p0 + t_foot[:, None] * e
        mirror = 2.0 * foot - bs
        # Intersection parameter of ue->mirror with the wall segment.
        d = mirror - ue
        denom = _cross2(d, e)
        w = p0 - ue
        t_seg = _cross2(w, e) / denom  # along ue->mirror
        t_wall = _cross2(w, d) / denom  # along the wall

    valid = (
        same_side
        & np.isfinite(t_seg)
        & np.isfinite(t_wall)
        & (t_seg > 0.0)
        & (t_seg < 1.0)
        & (t_wall > 1e-9)
        & (t_wall < 1.0 - 1e-9)
    )
    out = []
    for idx in np.nonzero(valid)[0]:
        point = p0[idx] + t_wall[idx] * e[idx]
        length = float(np.linalg.norm(mirror[idx] - ue))
        out.append((length, point))
    return out


def _candidates(ue: np.ndarray, bs: np.ndarray, buildings: list[Polygon]) -> list[_Candidate]:
    """All path candidates sorted by length, with occlusion flags resolved."""
    ue = np.asarray(ue, dtype=float)
    bs = np.asarray(bs, dtype=float)
    direct = _Candidate(
        length=float(np.linalg.norm(bs - ue)),
        first_point=bs,
        arrival_point=ue,
        kind="direct",
        blocked=segment_blocked(ue, bs, buildings),
    )
    cands = [direct]
    seen: set[tuple[float, float, float]] = set()
    for length, point in _reflection_geometry(ue, bs, buildings):
        key = (round(length, 9), round(float(point[0]), 9), round(float(point[1]), 9))
        if key in seen:
            continue
        seen.add(key)
        blocked = segment_blocked(ue, point, buildings) or segment_blocked(point, bs, buildings)
        cands.append(
            _Candidate(
                length=length,
                first_point=point,
                arrival_point=point,
                kind="reflected",
                blocked=blocked,
            )
        )
    cands.sort(key=lambda c: c.length)
    return cands


def _record(cand: _Candidate, ue: np.ndarray, bs: np.ndarray) -> PathRecord:
    dep = cand.first_point - ue
    arr = cand.arrival_point - bs
    return PathRecord(
        aoa=float(math.atan2(arr[1], arr[0])),
        aod=float(math.atan2(dep[1], dep[0])),
        toa=cand.length / SPEED_OF_LIGHT,
        kind=cand.kind,
    )


def trace_paths(
    env: Environment, ue: np.ndarray, bs: np.ndarray, max_paths: int = MAX_PATHS
) -> list[PathRecord]:
    """Up to ``max_paths`` unobstructed propagation paths, sorted by delay.

    Departure angle is measured at the UE toward the first path point,
    arrival angle at the BS toward the last path point, both from the +x
    axis.  A fully occluded pair yields an empty list.
    """
    ue = np.asarray(ue, dtype=float)
    bs = np.asarray(bs, dtype=float)
    cands = _candidates(ue, bs, env.buildings)
    if cands[0].kind == "direct" and cands[0].length == 0.0:
        raise PathLossError("UE and BS are co-located")
    open_cands = [c for c in cands if not c.blocked]
    return [_record(c, ue, bs) for c in open_cands[:max_paths]]


def path_loss(
    env: Environment,
    ue: np.ndarray,
    bs: np.ndarray,
    band_ghz: float,
    *,
    bounce_loss_db: float = 10.0,
    diffraction_penalty_db: float = 15.0,
) -> float:
    """Aggregated path loss (dB) for one pair at one carrier band.

    Line of sight: free-space loss of the direct distance.  Obstructed
    direct path: free-space loss of the shortest unobstructed reflection
    plus a per-bounce penalty; when every reflection is itself occluded the
    shortest occluded geometry is used with an extra diffraction penalty.
    No reflection geometry at all yields infinity.
    """
    freq_hz = band_ghz * 1e9
    return _loss_from_candidates(
        _candidates(np.asarray(ue, float), np.asarray(bs, float), env.buildings),
        freq_hz,
        bounce_loss_db,
        diffraction_penalty_db,
    )


def _loss_from_candidates(
    cands: list[_Candidate],
    freq_hz: float,
    bounce_loss_db: float,
    diffraction_penalty_db: float,
) -> float:
    direct = next(c for c in cands if c.kind == "direct")
    if direct.length == 0.0:
        raise PathLossError("UE and BS are co-located")
    if not direct.blocked:
        return fspl_db(direct.length, freq_hz)
    reflected = [c for c in cands if c.kind == "reflected"]
    clear = [c for c in reflected if not c.blocked]
    if clear:
        return fspl_db(clear[0].length, freq_hz) + bounce_loss_db
    if reflected:
        return fspl_db(reflected[0].length, freq_hz) + bounce_loss_db + diffraction_penalty_db
    return math.inf


def path_loss_table(
    env: Environment,
    ue: np.ndarray,
    bs: np.ndarray,
    *,
    bounce_loss_db: float = 10.0,
    diffraction_penalty_db: float = 15.0,
) -> PathLossTable:
    """Five-band loss table sharing one geometry computation."""
    cands = _candidates(np.asarray(ue, float), np.asarray(bs, float), env.buildings)
    return PathLossTable(
        {
            band: _loss_from_candidates(
                cands, band * 1e9, bounce_loss_db, diffraction_penalty_db
            )
            for band in BANDS_GHZ
        }
    )


def los_label(
    env: Environment, ue: np.ndarray, bs: np.ndarray, truth_map: BinaryMap | None = None
) -> str:
    """LOS iff the UE-BS segment crosses no foreground cell of the truth raster.

    Uses the conservative supercover traversal, so grazing a building's cell
    counts as obstruction.  Pass ``truth_map`` to amortize rasterization over
    the 150 pairs of an environment.
    """
    if truth_map is None:
        truth_map = rasterize(env.buildings, env.side_length)
    hit, _ = segment_pixels(np.asarray(ue, float), np.asarray(bs, float), truth_map)
    return NLOS if hit else LOS


# ---------------------------------------------------------------------------
# Angle noise and feature encoding
# ---------------------------------------------------------------------------


def wrap_angle(theta: float) -> float:
    """Wrap to [-pi, pi) so noisy angles stay in the stored range."""
    return float((theta + math.pi) % (2.0 * math.pi) - math.pi)


def add_angle_noise(
    records: list[PathRecord],
    profile: NoiseProfile,
    seed: int | np.random.Generator,
) -> list[PathRecord]:
    """Independent Gaussian noise on each angle (degrees -> radians), wrapped.

    Delays and path kinds are untouched.  Per record the AoA draw precedes
    the AoD draw, so results are reproducible bit for bit per seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sigma_aoa = math.radians(profile.sigma_aoa_deg)
    sigma_aod = math.radians(profile.sigma_aod_deg)
    out = []
    for rec in records:
        aoa, aod = rec.aoa, rec.aod
        if sigma_aoa > 0:
            aoa = wrap_angle(aoa + float(rng.normal(0.0, sigma_aoa)))
        if sigma_aod > 0:
            aod = wrap_angle(aod + float(rng.normal(0.0, sigma_aod)))
        out.append(PathRecord(aoa=aoa, aod=aod, toa=rec.toa, kind=rec.kind))
    return out


def encode_r1(
    records: list[PathRecord], ue: np.ndarray, bs: np.ndarray, side_length: float
) -> RadioFeature:
    """19-dim path-level vector: 5 x (aoa/pi, aod/pi, path_length/side) + coords.

    Missing paths are zero-padded; delays are converted to meters via the
    speed of light before normalizing by the frame size; UE/BS coordinates
    are normalized by the frame size.
    """
    if len(records) > MAX_PATHS:
        raise ValueError(f"at most {MAX_PATHS} records allowed; trim before encoding")
    values = np.zeros(R1_DIM)
    for k, rec in enumerate(records):
        values[3 * k] = rec.aoa / math.pi
        values[3 * k + 1] = rec.aod / math.pi
        values[3 * k + 2] = rec.toa * SPEED_OF_LIGHT / side_length
    values[15:] = np.concatenate([np.asarray(ue, float), np.asarray(bs, float)]) / side_length
    return RadioFeature("r1", values)


def encode_r2(
    table: PathLossTable, ue: np.ndarray, bs: np.ndarray, side_length: float
) -> RadioFeature:
    """9-dim loss-level vector: 5 standardized band losses + coords.

    Losses are capped at 160 dB (infinite loss pins to the cap) and
    standardized with mean 102 and standard deviation 22.
    """
    values = np.zeros(R2_DIM)
    for k, band in enumerate(BANDS_GHZ):
        loss = min(table.loss_db[band], LOSS_CAP_DB)
        values[k] = (loss - R2_MEAN_DB) / R2_STD_DB
    values[5:] = np.concatenate([np.asarray(ue, float), np.asarray(bs, float)]) / side_length
    return RadioFeature("r2", values)


# ---------------------------------------------------------------------------
# Per-environment synthesis
# ---------------------------------------------------------------------------


@dataclass
class PairObservation:
    """Everything synthesized for one UE-BS pair."""

    pair_index: int
    ue_index: int
    bs_index: int
    records: list[PathRecord]
    table: PathLossTable
    label: str
    r1: RadioFeature
    r1_noisy_28: RadioFeature
    r1_noisy_73: RadioFeature
    r2: RadioFeature


def synthesize_environment_rf(
    env: Environment,
    seed: int,
    *,
    truth_map: BinaryMap | None = None,
    bounce_loss_db: float = 10.0,
    diffraction_penalty_db: float = 15.0,
) -> list[PairObservation]:
    """Observations for all 150 pairs; one seeded stream drives the noise."""
    if truth_map is None:
        truth_map = rasterize(env.buildings, env.side_length)
    rng = np.random.default_rng(seed)
    out = []
    for pair_index, (i, j) in enumerate(env.pairs()):
        ue, bs = env.ue[i], env.bs[j]
        cands = _candidates(ue, bs, env.buildings)
        records = [_record(c, ue, bs) for c in cands if not c.blocked][:MAX_PATHS]
        table = PathLossTable(
            {
                band: _loss_from_candidates(
                    cands, band * 1e9, bounce_loss_db, diffraction_penalty_db
                )
                for band in BANDS_GHZ
            }
        )
        out.append(
            PairObservation(
                pair_index=pair_index,
                ue_index=i,
                bs_index=j,
                records=records,
                table=table,
                label=los_label(env, ue, bs, truth_map),
                r1=encode_r1(records, ue, bs, env.side_length),
                r1_noisy_28=encode_r1(
                    add_angle_noise(records, NOISE_28GHZ, rng), ue, bs, env.side_length
                ),
                r1_noisy_73=encode_r1(
                    add_angle_noise(records, NOISE_73GHZ, rng), ue, bs, env.side_length
                ),
                r2=encode_r2(table, ue, bs, env.side_length),
            )
        )
    return out
