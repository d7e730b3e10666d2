"""Rigid object pose: axis-angle rotation, translation, isotropic scale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import rodrigues


@dataclass
class RigidPose:
    rotation: np.ndarray     # (3,) axis-angle
    translation: np.ndarray  # (3,) meters
    scale: float = 1.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        self.scale = float(self.scale)
        if not (np.all(np.isfinite(self.rotation)) and np.all(np.isfinite(self.translation))
                and np.isfinite(self.scale)):
            raise ValueError("pose must be finite")
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")

    @staticmethod
    def identity() -> "RigidPose":
        return RigidPose(np.zeros(3), np.zeros(3), 1.0)

    def matrix(self) -> np.ndarray:
        return rodrigues(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """p -> scale * R @ p + t (object mesh assumed centroid-centered)."""
        return self.scale * (np.atleast_2d(points) @ self.matrix().T) + self.translation

    def to_dict(self) -> dict:
        return {
            "rotation": [float(x) for x in self.rotation],
            "translation": [float(x) for x in self.translation],
            "scale": self.scale,
        }

    @staticmethod
    def from_dict(d: dict) -> "RigidPose":
        return RigidPose(np.asarray(d["rotation"], dtype=np.float64),
                         np.asarray(d["translation"], dtype=np.float64),
                         float(d.get("scale", 1.0)))
