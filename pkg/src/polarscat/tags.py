"""Tag models (polarization pattern sets) and bit-to-symbol coding schemes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .polarization import Orientation

TAG_KINDS = ("nr", "4pr", "ipr", "measured")

# Fixed single orientations for the non-reconfigurable tag, (theta_deg, phi_deg):
# "best" bisects a vertical source and a cross-polarized horizontal reader,
# "worst" is orthogonal to the source so the tag captures nothing on the direct ray.
NR_PRESETS = {
    "best": (45.0, 90.0),
    "worst": (90.0, 90.0),
}

# Quarter-turn fan of dipole tilts inside the azimuth-90 plane.
_FOUR_PR_THETAS_DEG = (0.0, 45.0, 90.0, 135.0)
_FOUR_PR_PHI_DEG = 90.0

IPR_POINTS_PER_AXIS = 9  # 9 x 9 = 81 patterns

PCS_PAIR_NAMES = ("2:1", "3:1", "4:1", "3:2", "4:2", "4:3")


@dataclass(frozen=True)
class TagModel:
    """Tag kind, its selectable patterns, and the two modulation factors.

    ``patterns`` holds Orientations for dipole tags and opaque state-id
    strings for measured tags.
    """

    kind: str
    patterns: tuple
    gamma_on: complex = 1.0 + 0.0j
    gamma_off: complex = 0.0 + 0.0j


@dataclass(frozen=True)
class SymbolPlan:
    """Per-symbol schedule: which pattern the tag selects and which modulation factor it applies.

    For the on/off scheme the plan is the message repeated once per pattern
    (block repetition, blocks in pattern order). For the polarization-coding
    scheme the plan is one block whose pattern alternates with the bits.
    """

    scheme: str
    bits: tuple[int, ...]
    pattern_index: tuple[int, ...]
    gamma: tuple[complex, ...]
    n_blocks: int = 1
    pcs_states: tuple[int, int] | None = None  # (pattern for bit 1, pattern for bit 0)

    def __len__(self) -> int:
        return len(self.pattern_index)


def ipr_grid(points_per_axis: int = IPR_POINTS_PER_AXIS) -> tuple[Orientation, ...]:
    """Uniform (theta, phi) grid over [0, 180] x [0, 180] degrees, theta-major."""
    deg = np.linspace(0.0, 180.0, points_per_axis)
    return tuple(Orientation.from_degrees(t, p) for t in deg for p in deg)


def four_pr_patterns() -> tuple[Orientation, ...]:
    return tuple(Orientation.from_degrees(t, _FOUR_PR_PHI_DEG) for t in _FOUR_PR_THETAS_DEG)


def build_tag(
    kind: str,
    *,
    orientation: Orientation | None = None,
    nr_preset: str = "best",
    states: Sequence[str] | None = None,
    gamma_on: complex = 1.0 + 0.0j,
    gamma_off: complex = 0.0 + 0.0j,
) -> TagModel:
    """Construct one of the supported tag models.

    ``nr`` takes an explicit ``orientation`` or one of the NR_PRESETS names;
    ``4pr`` and ``ipr`` have fixed pattern sets (the 81-point grid contains
    every 4pr pattern, so richer sets dominate poorer ones exactly);
    ``measured`` wraps external state identifiers.
    """
    kind = kind.lower()
    if kind == "nr":
        if orientation is None:
            if nr_preset not in NR_PRESETS:
                raise ValueError(f"unknown nr preset {nr_preset!r}, expected one of {sorted(NR_PRESETS)}")
            orientation = Orientation.from_degrees(*NR_PRESETS[nr_preset])
        patterns: tuple = (orientation,)
    elif kind == "4pr":
        patterns = four_pr_patterns()
    elif kind == "ipr":
        patterns = ipr_grid()
    elif kind == "measured":
        if states is None or len(states) < 2:
            raise ValueError("measured tags need at least two state identifiers")
        patterns = tuple(str(s) for s in states)
    else:
        raise ValueError(f"unknown tag kind {kind!r}, expected one of {TAG_KINDS}")
    return TagModel(kind=kind, patterns=patterns, gamma_on=gamma_on, gamma_off=gamma_off)


def _clean_bits(bits) -> tuple[int, ...]:
    out = tuple(int(b) for b in bits)
    if not out:
        raise ValueError("bit sequence must be non-empty")
    if any(b not in (0, 1) for b in out):
        raise ValueError("bits must be 0 or 1")
    return out


def encode_bts(bits, tag: TagModel) -> SymbolPlan:
    """On/off keying: backscatter for 1, transparent for 0, repeated per pattern."""
    message = _clean_bits(bits)
    pattern_index = []
    gamma = []
    for p in range(len(tag.patterns)):
        for b in message:
            pattern_index.append(p)
            gamma.append(tag.gamma_on if b else tag.gamma_off)
    return SymbolPlan(
        scheme="bts",
        bits=message,
        pattern_index=tuple(pattern_index),
        gamma=tuple(gamma),
        n_blocks=len(tag.patterns),
    )


def encode_pcs(bits, state_pair: tuple[int, int], gamma_on: complex = 1.0 + 0.0j) -> SymbolPlan:
    """Polarization coding: always backscattering, one pattern per bit value.

    ``state_pair`` is (pattern index for bit 1, pattern index for bit 0);
    identical states are rejected since the reader could never tell the
    bits apart.
    """
    message = _clean_bits(bits)
    idx_one, idx_zero = int(state_pair[0]), int(state_pair[1])
    if idx_one == idx_zero:
        raise ValueError("the two coding states must be distinct")
    pattern_index = tuple(idx_one if b else idx_zero for b in message)
    return SymbolPlan(
        scheme="pcs",
        bits=message,
        pattern_index=pattern_index,
        gamma=(gamma_on,) * len(message),
        n_blocks=1,
        pcs_states=(idx_one, idx_zero),
    )


def pcs_pair_states(name: str) -> tuple[str, str]:
    """Split a pair name like '4:2' into (state id for bit 1, state id for bit 0)."""
    parts = name.split(":")
    if len(parts) != 2 or not all(parts):
        raise ValueError(f"malformed pair name {name!r}, expected 'a:b'")
    one, zero = parts[0].strip(), parts[1].strip()
    if one == zero:
        raise ValueError(f"pair {name!r} uses the same state for both bits")
    return one, zero
