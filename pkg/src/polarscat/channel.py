"""Polarized single-bounce ray channel synthesis.

Channel coefficients are dimensionless complex field ratios. Every
propagation segment contributes a free-space amplitude ``lam / (4*pi*d)``,
a carrier phase ``exp(-1j*2*pi*d/lam)`` and the projection between the
dipole axes at its two ends. Interactions are first order: a wave bounces
off at most one scatterer (or the ground image) between two elements, so
channels add linearly over disjoint scatterer subsets.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .polarization import Orientation, orientation_of, unit_vector

SPEED_OF_LIGHT = 299792458.0

# One complex amplitude ratio; holds direct, backscattered and aggregate channels.
ChannelCoefficient = complex

_MIRROR = np.array([-1.0, -1.0, 1.0])  # ground-image axis flip (horizontal components)


class ScattererPlacementError(RuntimeError):
    """Raised when rejection sampling cannot satisfy the placement constraints."""


@dataclass
class Pose:
    """Position in meters plus the dipole axis orientation."""

    position: np.ndarray
    orientation: Orientation

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if not np.all(np.isfinite(self.position)):
            raise ValueError("position must be finite")


@dataclass
class Scatterer:
    """Thin conductive line: pose, physical length and complex scattering gain."""

    pose: Pose
    length: float
    complex_gain: complex = 1.0 + 0.0j

    def __post_init__(self) -> None:
        if not self.length > 0:
            raise ValueError("scatterer length must be positive")


@dataclass
class Scenario:
    """Full world description for one link simulation.

    ``tag_scatter_bounce`` additionally routes single scatterer/ground
    bounces into and out of the tag; by default the backscattered path is
    the pure source -> tag -> reader chain.
    """

    source: Pose
    reader: Pose
    tag: Pose
    scatterers: list[Scatterer] = field(default_factory=list)
    ground_plane: bool = False
    frequency_hz: float = 2.4e9
    tx_power_w: float = 1.0
    noise_power_w: float = 1.0
    backscatter_gain: complex = 1.0 + 0.0j
    rng_seed: int = 0
    tag_scatter_bounce: bool = False

    def __post_init__(self) -> None:
        if not self.frequency_hz > 0:
            raise ValueError("frequency must be positive")
        if not self.tx_power_w > 0:
            raise ValueError("transmit power must be positive")
        if not self.noise_power_w > 0:
            raise ValueError("noise power must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz

    def with_tag_position(self, position) -> "Scenario":
        return replace(self, tag=Pose(np.asarray(position, dtype=float), self.tag.orientation))


def derived_rng(seed: int, *indices: int) -> np.random.Generator:
    """Deterministic child stream for task ``indices`` under a parent seed.

    Children are independent of scheduling and worker count, so parallel
    sweeps that key their draws on (seed, task index) reproduce exactly.
    """
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(i) for i in indices)))


def complex_noise(rng: np.random.Generator, power: float, size=None):
    """Circularly symmetric complex Gaussian samples with E|v|^2 = power."""
    scale = math.sqrt(power / 2.0)
    draw = scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
    return complex(draw) if size is None else draw


def los_segment(a: Pose, b: Pose, wavelength: float) -> ChannelCoefficient:
    """Free-space segment between two dipoles.

    Amplitude falls as 1/distance, the phase advances with the electrical
    length, and the polarization factor is the dot product of the two
    dipole axes. Symmetric in its endpoints.
    """
    d = float(np.linalg.norm(b.position - a.position))
    if d <= 0.0:
        raise ValueError("coincident radiating elements")
    proj = float(np.dot(unit_vector(a.orientation), unit_vector(b.orientation)))
    return (wavelength / (4.0 * math.pi * d)) * cmath.exp(-2j * math.pi * d / wavelength) * proj


def ground_image(pose: Pose) -> Pose:
    """Perfect-conductor image: mirror the position in z=0, flip the horizontal axis components."""
    axis = unit_vector(pose.orientation) * _MIRROR
    return Pose(pose.position * np.array([1.0, 1.0, -1.0]), orientation_of(axis))


def direct_channel(sc: Scenario) -> ChannelCoefficient:
    """Source-to-reader channel: direct ray, one bounce per scatterer, optional ground image."""
    lam = sc.wavelength
    h = los_segment(sc.source, sc.reader, lam)
    for s in sc.scatterers:
        h += los_segment(sc.source, s.pose, lam) * s.complex_gain * los_segment(s.pose, sc.reader, lam)
    if sc.ground_plane:
        h += los_segment(ground_image(sc.source), sc.reader, lam)
    return h


def tag_channel(sc: Scenario, tag_axis: Orientation) -> ChannelCoefficient:
    """Source-to-reader channel through the tag for the given tag axis.

    The inbound and outbound legs each project onto the tag axis; with
    ``tag_scatter_bounce`` enabled, single scatterer/ground bounces feed the
    tag and relay its re-radiation as well.
    """
    lam = sc.wavelength
    tag = Pose(sc.tag.position, tag_axis)
    inbound = los_segment(sc.source, tag, lam)
    outbound = los_segment(tag, sc.reader, lam)
    if sc.tag_scatter_bounce:
        for s in sc.scatterers:
            inbound += los_segment(sc.source, s.pose, lam) * s.complex_gain * los_segment(s.pose, tag, lam)
            outbound += los_segment(tag, s.pose, lam) * s.complex_gain * los_segment(s.pose, sc.reader, lam)
        if sc.ground_plane:
            inbound += los_segment(ground_image(sc.source), tag, lam)
            outbound += los_segment(ground_image(tag), sc.reader, lam)
    return sc.backscatter_gain * inbound * outbound


def aggregate_channel(h_sr: ChannelCoefficient, h_tr: ChannelCoefficient, gamma: complex) -> ChannelCoefficient:
    """Aggregate channel seen by the reader: direct plus modulated backscatter."""
    return h_sr + gamma * h_tr


def received_sample(sc: Scenario, g: ChannelCoefficient, rng: np.random.Generator) -> complex:
    """One receiver sample: carrier-scaled aggregate channel plus complex noise."""
    return g * math.sqrt(sc.tx_power_w) + complex_noise(rng, sc.noise_power_w)


def received_samples(sc: Scenario, g, rng: np.random.Generator, n: int) -> np.ndarray:
    """Vector of receiver samples; ``g`` may be a scalar or a length-n array."""
    return np.asarray(g) * math.sqrt(sc.tx_power_w) + complex_noise(rng, sc.noise_power_w, size=n)


def snr_tx(sc: Scenario) -> float:
    """Transmit-referenced SNR: transmit power over receiver noise power."""
    return sc.tx_power_w / sc.noise_power_w


def snr_captured(sc: Scenario) -> float:
    """Receive-referenced SNR with the tag transparent: |h_sr|^2 times the transmit SNR."""
    return abs(direct_channel(sc)) ** 2 * snr_tx(sc)


def sample_scatterers(
    rng: np.random.Generator,
    n: int,
    *,
    wavelength: float,
    reader_position,
    antenna_positions,
    length: float | None = None,
    complex_gain: complex = 1.0 + 0.0j,
    min_antenna_dist: float | None = None,
    max_reader_dist: float | None = None,
    min_pairwise: float | None = None,
    max_attempts: int = 50000,
) -> list[Scatterer]:
    """Drop ``n`` scatterers uniformly in the annular shell around the reader.

    Placement rules: every scatterer keeps at least ``min_antenna_dist``
    (default one wavelength) from each antenna, sits within
    ``max_reader_dist`` (default ten wavelengths) of the reader, stays above
    the ground plane, and pairs of scatterers keep ``min_pairwise`` (default
    half a wavelength) apart. Axis orientations are uniform over the sphere.
    Rejection sampling; raises ScattererPlacementError past ``max_attempts``.
    """
    if n < 0:
        raise ValueError("scatterer count must be non-negative")
    reader_position = np.asarray(reader_position, dtype=float)
    antennas = [np.asarray(p, dtype=float) for p in antenna_positions]
    if length is None:
        length = wavelength / 2.0
    if min_antenna_dist is None:
        min_antenna_dist = wavelength
    if max_reader_dist is None:
        max_reader_dist = 10.0 * wavelength
    if min_pairwise is None:
        min_pairwise = wavelength / 2.0
    if min_antenna_dist >= max_reader_dist:
        raise ValueError("empty sampling shell: min antenna distance exceeds the reader radius")

    out: list[Scatterer] = []
    positions: list[np.ndarray] = []
    attempts = 0
    r3_lo, r3_hi = min_antenna_dist**3, max_reader_dist**3
    while len(out) < n:
        if attempts >= max_attempts:
            raise ScattererPlacementError(
                f"placed {len(out)}/{n} scatterers after {max_attempts} attempts"
            )
        attempts += 1

        radius = rng.uniform(r3_lo, r3_hi) ** (1.0 / 3.0)
        costh = rng.uniform(-1.0, 1.0)
        az = rng.uniform(0.0, 2.0 * math.pi)
        sinth = math.sqrt(max(0.0, 1.0 - costh * costh))
        pos = reader_position + radius * np.array(
            [sinth * math.cos(az), sinth * math.sin(az), costh]
        )

        axis_costh = rng.uniform(-1.0, 1.0)
        axis_az = rng.uniform(0.0, 2.0 * math.pi)

        if pos[2] <= 0.0:
            continue
        if any(np.linalg.norm(pos - a) <= min_antenna_dist for a in antennas):
            continue
        if any(np.linalg.norm(pos - q) < min_pairwise for q in positions):
            continue

        orientation = Orientation(math.acos(axis_costh), axis_az)
        out.append(Scatterer(Pose(pos, orientation), length, complex_gain))
        positions.append(pos)
    return out


def check_scatterer_constraints(sc: Scenario) -> list[str]:
    """Placement-rule violations for the scenario's scatterer set (empty list when clean)."""
    lam = sc.wavelength
    problems = []
    antennas = {
        "source": sc.source.position,
        "tag": sc.tag.position,
        "reader": sc.reader.position,
    }
    for name_a, pa in antennas.items():
        for name_b, pb in antennas.items():
            if name_a < name_b and np.linalg.norm(pa - pb) < lam / 2.0:
                problems.append(f"{name_a} and {name_b} closer than half a wavelength")
    for i, s in enumerate(sc.scatterers):
        p = s.pose.position
        for name, a in antennas.items():
            if np.linalg.norm(p - a) <= lam:
                problems.append(f"scatterer {i} within one wavelength of the {name}")
        if np.linalg.norm(p - sc.reader.position) >= 10.0 * lam:
            problems.append(f"scatterer {i} beyond ten wavelengths of the reader")
        for j in range(i + 1, len(sc.scatterers)):
            q = sc.scatterers[j].pose.position
            if np.linalg.norm(p - q) < lam / 2.0:
                problems.append(f"scatterers {i} and {j} closer than half a wavelength")
    return problems
