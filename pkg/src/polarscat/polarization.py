"""Dipole orientation algebra and polarization-projection optimisation.

Angles are radians internally; every user-facing surface (CLI, config
files, CSV output) uses decimal degrees. An ``Orientation`` is the axis
of a linearly polarized thin dipole, so an orientation and its antipode
describe the same physical polarization state.

Convention: ``theta`` is the polar angle measured from the +z axis
(``theta = 0`` is a vertical dipole) and ``phi`` is the azimuth measured
from +x in the x-y plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# A 3-component float vector (numpy array of shape (3,)).
Vec3 = np.ndarray

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Orientation:
    """Dipole axis as (polar angle from +z, azimuth from +x), radians."""

    theta: float
    phi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("orientation angles must be finite")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta!r}")
        if not 0.0 <= self.phi < TWO_PI:
            raise ValueError(f"phi must lie in [0, 2*pi), got {self.phi!r}")

    @classmethod
    def from_degrees(cls, theta_deg: float, phi_deg: float) -> "Orientation":
        return cls(math.radians(theta_deg), math.radians(phi_deg % 360.0))

    def to_degrees(self) -> tuple[float, float]:
        return math.degrees(self.theta), math.degrees(self.phi)


VERTICAL = Orientation(0.0, 0.0)


def unit_vector(o: Orientation) -> Vec3:
    """Cartesian unit vector along the dipole axis."""
    st = math.sin(o.theta)
    return np.array([st * math.cos(o.phi), st * math.sin(o.phi), math.cos(o.theta)])


def orientation_of(v: Vec3) -> Orientation:
    """Orientation of a (not necessarily unit) vector; rejects the null vector."""
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    n = math.sqrt(x * x + y * y + z * z)
    if n == 0.0:
        raise ValueError("cannot orient a zero-length vector")
    theta = math.acos(max(-1.0, min(1.0, z / n)))
    phi = math.atan2(y, x) % TWO_PI
    return Orientation(theta, phi)


def direct_projection(source_axis: Vec3, reader_axis: Vec3) -> float:
    """Polarization match of the direct link: dot product of the two axes."""
    return float(np.dot(source_axis, reader_axis))


def backscatter_projection(source_axis: Vec3, tag_axis: Vec3, reader_axis: Vec3) -> float:
    """Two-hop polarization factor of the source -> tag -> reader chain.

    The tag re-radiates the component of the incident field that lies along
    its own axis, so the chain factor is ``(s.t)(t.r)``. The expression is
    quadratic in the tag axis: flipping the tag axis leaves it unchanged.
    """
    return float(np.dot(source_axis, tag_axis) * np.dot(tag_axis, reader_axis))


def optimal_tag_orientation(reader: Orientation) -> Orientation:
    """Closed-form tag axis maximizing |backscatter_projection| under a vertical source.

    The stationary family tilts the tag by ``reader.theta/2 + k*pi/2`` inside
    the reader's azimuthal plane; the two distinct axes in that family score
    ``cos^2(theta_R/2)`` and ``sin^2(theta_R/2)``, and the better one is
    returned. Geometrically the winner bisects the angle between the source
    axis and the reader axis, which balances the power captured from the
    source against the power re-radiated toward the reader.

    The result is canonicalized to ``theta`` in [0, pi/2]; exact ties (a
    reader at ``theta = pi/2``) resolve to the smallest (theta, phi), the
    same rule the grid search applies.
    """
    s = unit_vector(VERTICAL)
    r = unit_vector(reader)

    candidates = []
    for k in (0, 1):
        theta = reader.theta / 2.0 + k * (math.pi / 2.0)
        phi = reader.phi
        if theta > math.pi / 2.0:
            theta = math.pi - theta
            phi = (phi + math.pi) % TWO_PI
        candidates.append(Orientation(theta, phi))

    best = candidates[0]
    best_score = abs(backscatter_projection(s, unit_vector(best), r))
    for cand in candidates[1:]:
        score = abs(backscatter_projection(s, unit_vector(cand), r))
        if score > best_score + 1e-15:
            best, best_score = cand, score
        elif abs(score - best_score) <= 1e-15 and (cand.theta, cand.phi) < (best.theta, best.phi):
            best = cand
    return best


def exhaustive_best_orientation(
    objective: Callable[[Orientation], float],
    theta_grid: Sequence[float],
    phi_grid: Sequence[float],
) -> tuple[Orientation, float]:
    """Grid-search oracle: maximize ``objective`` over the orientation grid.

    Grids are radians and are scanned in the given order (theta outer, phi
    inner); ties keep the first maximum, so ascending grids implement the
    smallest-(theta, phi) tie rule.
    """
    if len(theta_grid) == 0 or len(phi_grid) == 0:
        raise ValueError("orientation grids must be non-empty")
    best: Orientation | None = None
    best_value = -math.inf
    for theta in theta_grid:
        for phi in phi_grid:
            o = Orientation(float(theta), float(phi))
            value = objective(o)
            if value > best_value:
                best, best_value = o, value
    assert best is not None
    return best, best_value


def degree_grid(start_deg: float, stop_deg: float, step_deg: float) -> np.ndarray:
    """Inclusive degree range converted to radians."""
    if step_deg <= 0:
        raise ValueError("step must be positive")
    return np.deg2rad(np.arange(start_deg, stop_deg + 0.5 * step_deg, step_deg))


def agreement_map(
    source: Orientation,
    reader_theta_grid: Sequence[float] | None = None,
    reader_phi_grid: Sequence[float] | None = None,
    tag_step_deg: float = 1.0,
    return_details: bool = False,
):
    """|dot| between the closed-form and grid-search optimum tag axes.

    For each reader orientation on the (theta, phi) grid, the closed-form
    optimum is compared with an exhaustive search over tag tilts in
    [0, 90] deg and azimuths in [0, 180] deg at ``tag_step_deg`` spacing
    (the reduced domain suffices because a dipole axis and its antipode are
    the same state). Entries are in [0, 1]; 1 means the two methods agree.

    Returns the matrix indexed [i_theta, i_phi]; with ``return_details``
    also returns same-shaped object arrays of the closed-form and searched
    orientations.
    """
    if abs(math.sin(source.theta)) > 1e-9:
        raise ValueError("the closed-form optimum is defined for a vertical source")
    if reader_theta_grid is None:
        reader_theta_grid = degree_grid(0.0, 90.0, 10.0)
    if reader_phi_grid is None:
        reader_phi_grid = degree_grid(0.0, 90.0, 10.0)

    tag_thetas = degree_grid(0.0, 90.0, tag_step_deg)
    tag_phis = degree_grid(0.0, 180.0, tag_step_deg)

    s = unit_vector(source)
    sx, sy, sz = float(s[0]), float(s[1]), float(s[2])

    n_t, n_p = len(reader_theta_grid), len(reader_phi_grid)
    dots = np.empty((n_t, n_p))
    analytic = np.empty((n_t, n_p), dtype=object)
    searched = np.empty((n_t, n_p), dtype=object)

    sin, cos = math.sin, math.cos
    for i, r_theta in enumerate(reader_theta_grid):
        for j, r_phi in enumerate(reader_phi_grid):
            reader = Orientation(float(r_theta), float(r_phi))
            r = unit_vector(reader)
            rx, ry, rz = float(r[0]), float(r[1]), float(r[2])

            def objective(o: Orientation) -> float:
                st = sin(o.theta)
                tx, ty, tz = st * cos(o.phi), st * sin(o.phi), cos(o.theta)
                return abs((sx * tx + sy * ty + sz * tz) * (rx * tx + ry * ty + rz * tz))

            best_o, _ = exhaustive_best_orientation(objective, tag_thetas, tag_phis)
            opt = optimal_tag_orientation(reader)
            dots[i, j] = abs(float(np.dot(unit_vector(opt), unit_vector(best_o))))
            analytic[i, j] = opt
            searched[i, j] = best_o

    if return_details:
        return dots, analytic, searched
    return dots
