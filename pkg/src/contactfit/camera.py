"""Pinhole camera and point projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError

_MIN_DEPTH = 1e-6


@dataclass
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("camera focals and dimensions must be positive")

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @staticmethod
    def from_dict(d: dict) -> "Camera":
        return Camera(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                      int(d["width"]), int(d["height"]))


def project_points(camera: Camera, points) -> np.ndarray:
    """Pinhole projection to pixel coordinates (u, v).

    Raises BehindCamera when any point has depth at or below the near plane.
    """
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    z = P[:, 2]
    if np.any(z <= _MIN_DEPTH):
        raise BehindCameraError("point at or behind the camera plane")
    u = camera.fx * P[:, 0] / z + camera.cx
    v = camera.fy * P[:, 1] / z + camera.cy
    out = np.stack([u, v], axis=1)
    return out if np.asarray(points).ndim > 1 else out[0]
