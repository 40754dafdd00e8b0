"""Fluid volume forces on the reference fluid slab and a small registry."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fields import SlabField3D, VerticalGrid, vertical_grid

ForceFn = Callable[[np.ndarray, np.ndarray, np.ndarray, float], tuple]


@dataclass(frozen=True)
class VolumeForce:
    """Closed-form force ``f(y1, y2, y3, t)`` on the reference slab ``y3 in [-1, 0]``.

    The force on the physical slab of thickness ``eps`` is
    ``f(x1, x2, x3 / eps, t)``, so its L2 norm there scales like ``sqrt(eps)``.
    """

    fn: ForceFn
    time_dependent: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, y1, y2, y3, t: float = 0.0):
        out = self.fn(y1, y2, y3, t)
        shape = np.broadcast_shapes(np.shape(y1), np.shape(y2), np.shape(y3))
        return tuple(np.broadcast_to(np.asarray(c, dtype=float), shape) for c in out)

    def sample(self, grid: VerticalGrid, n1: int, n2: int | None = None, t: float = 0.0) -> SlabField3D:
        """Nodal samples on a reference fluid grid, three components."""
        return SlabField3D.from_function(lambda a, b, z: list(self(a, b, z, t)), grid, n1, n2,
                                         domain="fluid", ncomp=3)

    def physical(self, x1, x2, x3, t: float, eps: float):
        return self(x1, x2, np.asarray(x3) / eps, t)

    def is_zero(self) -> bool:
        return self.name == "zero"


def zero_force() -> VolumeForce:
    return VolumeForce(lambda y1, y2, y3, t: (0.0, 0.0, 0.0), name="zero")


def constant_horizontal(c1: float = 1.0, c2: float = 0.0) -> VolumeForce:
    return VolumeForce(lambda y1, y2, y3, t: (c1, c2, 0.0), name="constant-horizontal",
                       params={"c1": c1, "c2": c2})


def single_mode(a1: float = 1.0, a2: float = 0.0, a3: float = 0.0, k1: int = 1, k2: int = 0,
                phase: str = "sin", profile: tuple[float, ...] = (1.0,),
                ramp: float = 0.0) -> VolumeForce:
    """``a * trig(2 pi (k1 y1 + k2 y2)) * profile(y3) * ramp(t)``.

    ``profile`` holds power-basis coefficients in ``y3``; ``ramp > 0`` switches
    on the smooth time factor ``1 - exp(-t / ramp)``.
    """
    if phase not in ("sin", "cos"):
        raise ValueError(f"phase must be 'sin' or 'cos', got {phase!r}")
    trig = np.sin if phase == "sin" else np.cos
    prof = np.polynomial.Polynomial(profile)

    def fn(y1, y2, y3, t):
        s = trig(2 * np.pi * (k1 * y1 + k2 * y2)) * prof(y3)
        if ramp > 0:
            s = s * (-np.expm1(-t / ramp))
        return a1 * s, a2 * s, a3 * s

    return VolumeForce(fn, time_dependent=ramp > 0, name="single-mode",
                       params={"a1": a1, "a2": a2, "a3": a3, "k1": k1, "k2": k2, "phase": phase,
                               "profile": tuple(profile), "ramp": ramp})


FORCE_REGISTRY: dict[str, Callable[..., VolumeForce]] = {
    "zero": zero_force,
    "constant-horizontal": constant_horizontal,
    "single-mode": single_mode,
}


def make_force(name: str, **params) -> VolumeForce:
    try:
        factory = FORCE_REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown force id {name!r}; known: {sorted(FORCE_REGISTRY)}") from None
    return factory(**params)


def reference_grid(m: int) -> VerticalGrid:
    """LGL grid on the reference fluid slab ``[-1, 0]``."""
    return vertical_grid(m, -1.0, 0.0)
