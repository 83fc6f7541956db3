"""Sampling the road network: Poisson lines, vehicles on them, device disks.

A line is stored as (offset, angle): ``offset`` is the signed distance from
the origin to the line and ``angle`` the direction of that perpendicular
foot, so the line itself runs along (-sin angle, cos angle).  Angles live in
[0, pi); the isotropic sampler stays strictly inside while the Manhattan
variant uses exactly 0 and pi/2 for its two orientations.

Sampling windows are explicit everywhere: a snapshot is complete for lines
with |offset| <= window_radius and vehicles with |abscissa| <= half_length.
Callers own the choice of window; the estimators in :mod:`montecarlo`
document how they pick theirs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Optional, Union

import numpy as np

from .core import MissingDevices, NetworkParams, SCHEMA_VERSION

__all__ = [
    "Line", "Vehicle", "Snapshot",
    "sample_lines", "sample_manhattan_lines", "sample_vehicles_on_line",
    "snapshot_from_lines", "ordinary_snapshot", "palm_snapshot",
    "place_devices", "advance", "nearest_vehicle_distance", "snapshot_to_csv",
]


@dataclass(frozen=True)
class Line:
    """A road, as signed perpendicular offset plus foot angle in [0, pi)."""

    offset: float
    angle: float

    def __post_init__(self):
        if not (0.0 <= self.angle < math.pi):
            raise ValueError(f"line angle must lie in [0, pi), got {self.angle}")

    def point_at(self, abscissa: float) -> tuple[float, float]:
        """Planar position of the point at ``abscissa`` along the line."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        return (self.offset * c - abscissa * s, self.offset * s + abscissa * c)


@dataclass(frozen=True)
class Vehicle:
    """A vehicle on line ``line_index`` at ``abscissa``, heading ``direction``."""

    line_index: int
    abscissa: float
    direction: int  # +1 toward increasing abscissa, -1 the other way
    speed: float    # km/s, may differ per vehicle

    def __post_init__(self):
        if self.direction not in (-1, 1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")
        if self.speed < 0:
            raise ValueError(f"vehicle speed must be >= 0, got {self.speed}")


@dataclass(frozen=True)
class Snapshot:
    """One realisation of the network, array-backed for bulk math.

    Under Palm conditioning (``palm=True``) line 0 is the extra line through
    the origin (offset exactly 0, angle ``typical_line_angle``) and vehicle 0
    is the conditioned-on vehicle sitting at abscissa 0 on it.
    """

    line_offset: np.ndarray
    line_angle: np.ndarray
    veh_line: np.ndarray
    veh_abscissa: np.ndarray
    veh_direction: np.ndarray
    veh_speed: np.ndarray
    window_radius: float
    half_length: float
    palm: bool = False
    typical_line_angle: Optional[float] = None
    device_xy: Optional[np.ndarray] = None  # (n_vehicles, 2) planar points

    def __post_init__(self):
        for name in ("line_offset", "line_angle", "veh_line", "veh_abscissa",
                     "veh_direction", "veh_speed"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.line_offset.shape != self.line_angle.shape:
            raise ValueError("line arrays disagree in length")
        n = self.veh_abscissa.size
        for name in ("veh_line", "veh_direction", "veh_speed"):
            if getattr(self, name).size != n:
                raise ValueError("vehicle arrays disagree in length")
        if self.device_xy is not None:
            dev = np.asarray(self.device_xy, dtype=float)
            if dev.shape != (n, 2):
                raise ValueError(f"device_xy must have shape ({n}, 2)")
            dev.setflags(write=False)
            object.__setattr__(self, "device_xy", dev)
        if self.palm:
            if self.line_offset.size == 0 or self.line_offset[0] != 0.0:
                raise ValueError("palm snapshot must start with the through-origin line")
            if n == 0 or self.veh_line[0] != 0 or self.veh_abscissa[0] != 0.0:
                raise ValueError("palm snapshot must start with the vehicle at the origin")

    @property
    def n_lines(self) -> int:
        return self.line_offset.size

    @property
    def n_vehicles(self) -> int:
        return self.veh_abscissa.size

    @property
    def lines(self) -> list[Line]:
        return [Line(float(r), float(a))
                for r, a in zip(self.line_offset, self.line_angle)]

    @property
    def vehicles(self) -> list[Vehicle]:
        return [Vehicle(int(i), float(t), int(d), float(s))
                for i, t, d, s in zip(self.veh_line, self.veh_abscissa,
                                      self.veh_direction, self.veh_speed)]

    def vehicle_xy(self) -> np.ndarray:
        """Planar positions of all vehicles, shape (n_vehicles, 2)."""
        r = self.line_offset[self.veh_line]
        ang = self.line_angle[self.veh_line]
        c, s = np.cos(ang), np.sin(ang)
        t = self.veh_abscissa
        return np.column_stack([r * c - t * s, r * s + t * c])


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------
# Draw order is part of each sampler's contract (reproducibility): count
# first, then per-entity attributes in the listed order.

def sample_lines(lambda_l: float, radius: float,
                 rng: np.random.Generator) -> list[Line]:
    """Lines of a motion-invariant Poisson line process with |offset| <= radius.

    The count is Poisson with mean 2 * lambda_l * radius; offsets are uniform
    on [-radius, radius] and angles uniform on (0, pi), matching a process of
    intensity lambda_l / pi on the offset-angle cylinder.
    """
    n = int(rng.poisson(2.0 * lambda_l * radius))
    offsets = rng.uniform(-radius, radius, size=n)
    angles = rng.uniform(0.0, math.pi, size=n)
    return [Line(float(r), float(a)) for r, a in zip(offsets, angles)]


def sample_manhattan_lines(lambda_l: float, radius: float,
                           rng: np.random.Generator) -> list[Line]:
    """Same offsets as :func:`sample_lines` but only axis-aligned orientations.

    Angles are a fair coin over {0, pi/2}.  Meant for illustration and eyeball
    checks; the analytic results assume the isotropic sampler.
    """
    n = int(rng.poisson(2.0 * lambda_l * radius))
    offsets = rng.uniform(-radius, radius, size=n)
    angles = np.where(rng.integers(0, 2, size=n) == 1, math.pi / 2.0, 0.0)
    return [Line(float(r), float(a)) for r, a in zip(offsets, angles)]


def sample_vehicles_on_line(line_index: int, mu: float, half_length: float,
                            speed: float, rng: np.random.Generator) -> list[Vehicle]:
    """Poisson(mu) vehicles on |abscissa| <= half_length with coin directions.

    The host line's geometry does not matter here, only which index the
    vehicles should point back to.
    """
    n = int(rng.poisson(2.0 * mu * half_length))
    abscissas = rng.uniform(-half_length, half_length, size=n)
    directions = rng.choice(np.array([-1, 1]), size=n)
    return [Vehicle(line_index, float(t), int(d), speed)
            for t, d in zip(abscissas, directions)]


def _assemble(lines: list[Line], vehicles: list[Vehicle], radius: float,
              half_length: float, palm: bool,
              typical_line_angle: Optional[float]) -> Snapshot:
    return Snapshot(
        line_offset=np.array([l.offset for l in lines], dtype=float),
        line_angle=np.array([l.angle for l in lines], dtype=float),
        veh_line=np.array([v.line_index for v in vehicles], dtype=np.intp),
        veh_abscissa=np.array([v.abscissa for v in vehicles], dtype=float),
        veh_direction=np.array([v.direction for v in vehicles], dtype=np.int8),
        veh_speed=np.array([v.speed for v in vehicles], dtype=float),
        window_radius=radius,
        half_length=half_length,
        palm=palm,
        typical_line_angle=typical_line_angle,
    )


def snapshot_from_lines(lines: list[Line], params: NetworkParams, radius: float,
                        half_length: float, rng: np.random.Generator) -> Snapshot:
    """Populate an explicit set of lines with Poisson(mu) vehicles each."""
    vehicles: list[Vehicle] = []
    for i in range(len(lines)):
        vehicles.extend(sample_vehicles_on_line(i, params.mu, half_length,
                                                params.speed, rng))
    return _assemble(lines, vehicles, radius, half_length, False, None)


def ordinary_snapshot(params: NetworkParams, radius: float, half_length: float,
                      rng: np.random.Generator) -> Snapshot:
    """Stationary realisation: lines first, then vehicles line by line."""
    lines = sample_lines(params.lambda_l, radius, rng)
    return snapshot_from_lines(lines, params, radius, half_length, rng)


def palm_snapshot(params: NetworkParams, radius: float, half_length: float,
                  rng: np.random.Generator) -> Snapshot:
    """Realisation seen from a typical vehicle placed at the origin.

    Palm conditioning for this doubly-Poisson model adds an independent line
    through the origin with a uniform angle, an independent Poisson(mu)
    vehicle population on it, and the conditioned-on vehicle itself at
    abscissa 0 with a fair-coin direction; the rest of the network is an
    ordinary realisation.  Draw order: typical angle, typical direction,
    typical-line vehicles, then the ordinary part.
    """
    typical_angle = float(rng.uniform(0.0, math.pi))
    typical_dir = int(rng.choice(np.array([-1, 1])))
    lines = [Line(0.0, typical_angle)]
    vehicles = [Vehicle(0, 0.0, typical_dir, params.speed)]
    vehicles.extend(sample_vehicles_on_line(0, params.mu, half_length,
                                            params.speed, rng))
    rest = sample_lines(params.lambda_l, radius, rng)
    for j, line in enumerate(rest, start=1):
        lines.append(line)
        vehicles.extend(sample_vehicles_on_line(j, params.mu, half_length,
                                                params.speed, rng))
    return _assemble(lines, vehicles, radius, half_length, True, typical_angle)


def place_devices(snapshot: Snapshot, nu: float,
                  rng: np.random.Generator) -> Snapshot:
    """Attach one device per vehicle, uniform on its radius-nu disk.

    Radii use the sqrt transform (area-uniform), angles are uniform; draws are
    all radii first, then all angles.
    """
    n = snapshot.n_vehicles
    rho = nu * np.sqrt(rng.uniform(0.0, 1.0, size=n))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    xy = snapshot.vehicle_xy() + np.column_stack([rho * np.cos(phi),
                                                  rho * np.sin(phi)])
    return Snapshot(
        line_offset=snapshot.line_offset, line_angle=snapshot.line_angle,
        veh_line=snapshot.veh_line, veh_abscissa=snapshot.veh_abscissa,
        veh_direction=snapshot.veh_direction, veh_speed=snapshot.veh_speed,
        window_radius=snapshot.window_radius, half_length=snapshot.half_length,
        palm=snapshot.palm, typical_line_angle=snapshot.typical_line_angle,
        device_xy=xy,
    )


def advance(snapshot: Snapshot, dt: float) -> Snapshot:
    """Move every vehicle along its line by direction * speed * dt.

    Devices are dropped (they must be re-placed after motion) and the
    vehicle-complete region shrinks by the largest displacement, since
    vehicles that should have entered from beyond the window are missing.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    moved = snapshot.veh_abscissa + snapshot.veh_direction * snapshot.veh_speed * dt
    max_step = float(np.max(snapshot.veh_speed)) * dt if snapshot.n_vehicles else 0.0
    return Snapshot(
        line_offset=snapshot.line_offset, line_angle=snapshot.line_angle,
        veh_line=snapshot.veh_line, veh_abscissa=moved,
        veh_direction=snapshot.veh_direction, veh_speed=snapshot.veh_speed,
        window_radius=snapshot.window_radius,
        half_length=max(0.0, snapshot.half_length - max_step),
        palm=False, typical_line_angle=snapshot.typical_line_angle,
        device_xy=None,
    )


def nearest_vehicle_distance(snapshot: Snapshot,
                             point: tuple[float, float] = (0.0, 0.0)) -> float:
    """Distance from ``point`` to the closest vehicle; inf if there are none."""
    if snapshot.n_vehicles == 0:
        return math.inf
    d = snapshot.vehicle_xy() - np.asarray(point, dtype=float)
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", d, d))))


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------

_CSV_COLUMNS = ["schema_version", "section", "offset", "angle",
                "line_index", "abscissa", "direction", "x", "y"]


def snapshot_to_csv(snapshot: Snapshot, dest: Union[str, IO[str]]) -> None:
    """Write a snapshot as one CSV with a section column.

    Rows carry section 'line' (offset, angle), 'vehicle' (line_index,
    abscissa, direction) or 'device' (x, y); unused columns stay empty so a
    single header serves all three.
    """
    own = isinstance(dest, str)
    fh = open(dest, "w", newline="", encoding="utf-8") if own else dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_CSV_COLUMNS)
        for r, a in zip(snapshot.line_offset, snapshot.line_angle):
            w.writerow([SCHEMA_VERSION, "line", repr(float(r)), repr(float(a)),
                        "", "", "", "", ""])
        for i, t, d in zip(snapshot.veh_line, snapshot.veh_abscissa,
                           snapshot.veh_direction):
            w.writerow([SCHEMA_VERSION, "vehicle", "", "",
                        int(i), repr(float(t)), int(d), "", ""])
        if snapshot.device_xy is not None:
            for x, y in snapshot.device_xy:
                w.writerow([SCHEMA_VERSION, "device", "", "", "", "", "",
                            repr(float(x)), repr(float(y))])
    finally:
        if own:
            fh.close()
