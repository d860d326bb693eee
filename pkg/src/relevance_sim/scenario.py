"""Driving-scenario generation: object placement, vehicle kinematics, and the
onboard perception model (distance-dependent detection probability)."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

# Logistic detection-probability coefficients: P(d) = 1 / (1 + a1 * exp(-a2 * (d - a3)))
DEFAULT_DETECTION_COEFFS = (0.08, -0.08, 60.0)


class MobilityMode(Enum):
    STATIC_EPISODE = "static"
    CONSTANT_VELOCITY = "constant_velocity"


@dataclass(frozen=True)
class SceneConfig:
    width: float = 800.0
    height: float = 200.0
    object_count: int = 110
    vehicle_count: int = 2
    mobility_mode: MobilityMode = MobilityMode.STATIC_EPISODE
    vehicle_speed: float = 14.0
    slot_duration: float = 0.1
    detection_coeffs: tuple[float, float, float] = DEFAULT_DETECTION_COEFFS

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("scene dimensions must be positive")
        if self.object_count < 0:
            raise ValueError("object_count must be >= 0")
        if self.vehicle_count < 2:
            raise ValueError("need at least one transmitter and one receiver")
        if self.slot_duration <= 0:
            raise ValueError("slot_duration must be positive")
        if self.vehicle_speed < 0:
            raise ValueError("vehicle_speed must be >= 0")


@dataclass(frozen=True)
class ObjectPoint:
    id: int
    position: tuple[float, float]


@dataclass(frozen=True)
class VehicleKinematics:
    id: int
    origin: tuple[float, float]
    destination: tuple[float, float]
    position: tuple[float, float]
    speed: float
    perception_coeffs: tuple[float, float, float]


@dataclass(frozen=True)
class Scenario:
    config: SceneConfig
    objects: list[ObjectPoint]
    vehicles: list[VehicleKinematics]


def detection_probability(distance: float, coeffs: tuple[float, float, float]) -> float:
    """Probability that a sensor detects an object `distance` metres away."""
    a1, a2, a3 = coeffs
    return 1.0 / (1.0 + a1 * math.exp(-a2 * (distance - a3)))


def detection_probability_vector(
    position: tuple[float, float],
    objects: list[ObjectPoint],
    coeffs: tuple[float, float, float],
) -> np.ndarray:
    """Vectorised detection probabilities from one viewpoint to every object."""
    if not objects:
        return np.zeros(0)
    a1, a2, a3 = coeffs
    pts = np.asarray([o.position for o in objects])
    d = np.hypot(pts[:, 0] - position[0], pts[:, 1] - position[1])
    return 1.0 / (1.0 + a1 * np.exp(-a2 * (d - a3)))


def place_objects(config: SceneConfig, rng: np.random.Generator) -> list[ObjectPoint]:
    """Scatter `object_count` points i.i.d. uniform over the rectangle.

    A Poisson point process conditioned on its count is exactly this binomial
    process, so a fixed count and uniform positions are mutually consistent.
    """
    config.validate()
    xs = rng.uniform(0.0, config.width, config.object_count)
    ys = rng.uniform(0.0, config.height, config.object_count)
    return [ObjectPoint(k, (float(xs[k]), float(ys[k]))) for k in range(config.object_count)]


def spawn_vehicles(config: SceneConfig, rng: np.random.Generator) -> list[VehicleKinematics]:
    """Draw origin/destination pairs uniformly; vehicles start at their origin."""
    config.validate()
    out = []
    for vid in range(config.vehicle_count):
        while True:
            origin = (float(rng.uniform(0.0, config.width)), float(rng.uniform(0.0, config.height)))
            dest = (float(rng.uniform(0.0, config.width)), float(rng.uniform(0.0, config.height)))
            if origin != dest:  # zero-length paths have no direction
                break
        out.append(
            VehicleKinematics(
                id=vid,
                origin=origin,
                destination=dest,
                position=origin,
                speed=config.vehicle_speed,
                perception_coeffs=config.detection_coeffs,
            )
        )
    return out


def advance_mobility(scenario: Scenario, slots: int) -> Scenario:
    """Move every vehicle `slots` time steps along its origin->destination segment.

    Static episodes are the identity; constant-velocity vehicles clamp at the
    destination instead of overshooting or respawning.
    """
    if slots < 0:
        raise ValueError("slots must be >= 0")
    cfg = scenario.config
    if cfg.mobility_mode is MobilityMode.STATIC_EPISODE or slots == 0:
        return scenario
    moved = []
    for v in scenario.vehicles:
        ox, oy = v.origin
        dx, dy = v.destination[0] - ox, v.destination[1] - oy
        seg_len = math.hypot(dx, dy)
        travelled = math.hypot(v.position[0] - ox, v.position[1] - oy)
        travelled = min(seg_len, travelled + v.speed * cfg.slot_duration * slots)
        frac = travelled / seg_len
        moved.append(replace(v, position=(ox + frac * dx, oy + frac * dy)))
    return Scenario(config=cfg, objects=scenario.objects, vehicles=moved)


def sample_hits(probs: np.ndarray, rng: np.random.Generator) -> list[int]:
    """Independent Bernoulli trial per entry; returns the successful indices."""
    return (rng.random(len(probs)) < probs).nonzero()[0].tolist()


def sample_local_set(
    vehicle: VehicleKinematics,
    objects: list[ObjectPoint],
    rng: np.random.Generator,
) -> set[int]:
    """One fresh perception snapshot: independent Bernoulli trial per object.

    Snapshots do not accumulate across communication cycles; every call is a
    new attempt with the per-object detection probability.
    """
    probs = detection_probability_vector(vehicle.position, objects, vehicle.perception_coeffs)
    return {objects[i].id for i in sample_hits(probs, rng)}
