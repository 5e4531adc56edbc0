"""Spatial and statistical studies built on the channel and detector layers.

Everything here is deterministic given (scenario, seed): Monte Carlo work
units derive their random streams from (seed, task indices), so results do
not depend on evaluation order or worker count.

Vectorization note: with tag-side bounces expressed per position as a pair
of complex 3-vectors (a, b), the backscattered channel for tag axis t is
kappa * (a.t)(b.t). The helpers below build those chain vectors for a whole
grid of tag positions at once; they are checked against the scalar
channel-synthesis routines in the test suite.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import erfc

from . import channel as chan
from .channel import Scenario, derived_rng
from .polarization import Orientation, unit_vector
from .tags import TagModel

DEFAULT_MAP_STEP = 0.005  # meters; fine enough for desk-scale runs, 1 mm via config
DEFAULT_BER_TARGET = 1e-2
ANNULUS_WAVELENGTHS = (0.5, 3.0)  # coverage shell around the reader

MEASURED_HEADER = ("state_id", "rx_antenna_id", "re", "im")
DIRECT_STATE_ID = "DIRECT"


# ---------------------------------------------------------------------------
# result containers


@dataclass(frozen=True)
class MapGrid:
    """Regular x-y grid of candidate tag positions at a fixed height."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    step: float
    z: float

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.x_range[1] < self.x_range[0] or self.y_range[1] < self.y_range[0]:
            raise ValueError("grid ranges must be non-degenerate")

    @property
    def xs(self) -> np.ndarray:
        return np.arange(self.x_range[0], self.x_range[1] + 0.5 * self.step, self.step)

    @property
    def ys(self) -> np.ndarray:
        return np.arange(self.y_range[0], self.y_range[1] + 0.5 * self.step, self.step)

    def positions(self) -> np.ndarray:
        """All cell centers as an (n_cells, 3) array, x fastest, matching matrix index [iy, ix]."""
        xs, ys = self.xs, self.ys
        gx, gy = np.meshgrid(xs, ys)
        out = np.empty((gx.size, 3))
        out[:, 0] = gx.ravel()
        out[:, 1] = gy.ravel()
        out[:, 2] = self.z
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.ys), len(self.xs)


@dataclass
class BerMap:
    """Per-cell minimum error rate with the achieving pattern (the orientation overlay)."""

    grid: MapGrid
    ber: np.ndarray
    best_pattern: np.ndarray
    patterns: tuple

    def best_orientation(self, iy: int, ix: int) -> Orientation:
        return self.patterns[int(self.best_pattern[iy, ix])]

    def orientation_degrees(self) -> tuple[np.ndarray, np.ndarray]:
        """Best-orientation angles as (theta_deg, phi_deg) matrices."""
        theta = np.empty(self.best_pattern.shape)
        phi = np.empty(self.best_pattern.shape)
        for idx, pattern in enumerate(self.patterns):
            sel = self.best_pattern == idx
            t_deg, p_deg = pattern.to_degrees()
            theta[sel] = t_deg
            phi[sel] = p_deg
        return theta, phi


@dataclass
class OutageCurve:
    """Fraction of coverage-shell positions whose best-pattern error rate misses the target."""

    snr_db: np.ndarray
    outage: np.ndarray
    axis: str = "tx"  # which SNR the x axis refers to: "tx" or "captured"


@dataclass
class MeasuredChannelSet:
    """Externally measured per-state channels, one entry per (state, receive antenna).

    ``states[(state_id, antenna_id)]`` holds the backscattered component and
    ``direct[antenna_id]`` the tag-independent direct channel of that antenna.
    """

    states: dict[tuple[str, str], complex]
    direct: dict[str, complex]

    def __post_init__(self) -> None:
        ids = self.state_ids()
        if len(ids) < 2:
            raise ValueError("a measured channel set needs at least two states")
        for (_, antenna) in self.states:
            if antenna not in self.direct:
                raise ValueError(f"missing direct entry for antenna {antenna!r}")

    def state_ids(self) -> list[str]:
        return sorted({s for s, _ in self.states})

    def antenna_ids(self) -> list[str]:
        return sorted(self.direct)

    def aggregate(self, state_id: str, antenna_id: str) -> complex:
        key = (state_id, antenna_id)
        if key not in self.states:
            raise KeyError(f"state {state_id!r} not measured on antenna {antenna_id!r}")
        return self.direct[antenna_id] + self.states[key]


# ---------------------------------------------------------------------------
# vectorized channel synthesis over position grids


def _segment_scalars(origin: np.ndarray, positions: np.ndarray, wavelength: float) -> np.ndarray:
    """Scalar (projection-free) segment coefficients from one point to many."""
    d = np.linalg.norm(positions - origin, axis=1)
    if np.any(d <= 0.0):
        raise ValueError("grid position coincides with a radiating element")
    return (wavelength / (4.0 * math.pi * d)) * np.exp(-2j * math.pi * d / wavelength)


def _chain_components(sc: Scenario, positions: np.ndarray):
    """Inbound/outbound chain vectors a, b with h_tr(t) = kappa * (a.t)(b.t), shape (n, 3)."""
    lam = sc.wavelength
    s_axis = unit_vector(sc.source.orientation)
    r_axis = unit_vector(sc.reader.orientation)

    a = _segment_scalars(sc.source.position, positions, lam)[:, None] * s_axis
    b = _segment_scalars(sc.reader.position, positions, lam)[:, None] * r_axis

    if sc.tag_scatter_bounce:
        for s in sc.scatterers:
            c_axis = unit_vector(s.pose.orientation)
            to_sc = chan.los_segment(sc.source, s.pose, lam)
            a += (to_sc * s.complex_gain * _segment_scalars(s.pose.position, positions, lam))[:, None] * c_axis
            from_sc = chan.los_segment(s.pose, sc.reader, lam)
            b += (from_sc * s.complex_gain * _segment_scalars(s.pose.position, positions, lam))[:, None] * c_axis
        if sc.ground_plane:
            mirror = np.array([-1.0, -1.0, 1.0])
            img_src = chan.ground_image(sc.source)
            a += _segment_scalars(img_src.position, positions, lam)[:, None] * unit_vector(img_src.orientation)
            # tag -> ground -> reader: mirroring the tag is the same as projecting
            # the mirrored reader axis from the mirrored tag position
            img_positions = positions * np.array([1.0, 1.0, -1.0])
            d = np.linalg.norm(sc.reader.position - img_positions, axis=1)
            b += ((lam / (4.0 * math.pi * d)) * np.exp(-2j * math.pi * d / lam))[:, None] * (r_axis * mirror)
    return a, b


def tag_channels_on_grid(sc: Scenario, positions: np.ndarray, patterns: Sequence[Orientation]) -> np.ndarray:
    """Backscattered channel per (pattern, position), shape (n_patterns, n_positions)."""
    a, b = _chain_components(sc, positions)
    out = np.empty((len(patterns), positions.shape[0]), dtype=complex)
    for i, pattern in enumerate(patterns):
        t = unit_vector(pattern)
        out[i] = sc.backscatter_gain * (a @ t) * (b @ t)
    return out


# ---------------------------------------------------------------------------
# detector evaluation helpers


def _ed_ber_matrix(h_sr: complex, h_tr: np.ndarray, tag: TagModel, tx_power: float, noise_power: float) -> np.ndarray:
    """Closed-form energy-detector error rate per (pattern, position)."""
    root = math.sqrt(tx_power)
    a_on = np.abs(h_sr + tag.gamma_on * h_tr) * root
    a_off = np.abs(h_sr + tag.gamma_off * h_tr) * root
    contrast = np.abs(a_on - a_off)
    return 0.5 * erfc(contrast / (2.0 * math.sqrt(noise_power)))


def _lse_ber_analytic(g0: np.ndarray, g1: np.ndarray, tx_power: float, noise_power: float) -> np.ndarray:
    """Closed-form nearest-channel error rate for exactly known state channels."""
    sep = np.abs(g1 - g0) * math.sqrt(tx_power)
    return 0.5 * erfc(sep / (2.0 * math.sqrt(noise_power)))


def _lse_mc_ber(
    g0: np.ndarray,
    g1: np.ndarray,
    tx_power: float,
    noise_power: float,
    rng: np.random.Generator,
    n_bits: int,
    n_train: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo pilot-trained nearest-channel detection, vectorized over positions.

    Pilot means are drawn from their exact sampling distribution (a mean of
    n_train complex-Gaussian pilots is itself Gaussian), which matches the
    per-link runner statistically at a fraction of the draws. Returns
    (error rate, estimated state separation) per position.
    """
    n = g0.shape[0]
    root = math.sqrt(tx_power)
    est_std = math.sqrt(noise_power / (2.0 * n_train * tx_power))
    g0_hat = g0 + est_std * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    g1_hat = g1 + est_std * (rng.standard_normal(n) + 1j * rng.standard_normal(n))

    bits = rng.integers(0, 2, size=(n, n_bits), dtype=np.uint8)
    g_true = np.where(bits.astype(bool), g1[:, None], g0[:, None])
    y = g_true * root + chan.complex_noise(rng, noise_power, size=(n, n_bits))
    d0 = np.abs(y - g0_hat[:, None] * root) ** 2
    d1 = np.abs(y - g1_hat[:, None] * root) ** 2
    detected = (d1 < d0).astype(np.uint8)
    ber = np.mean(detected != bits, axis=1)
    return ber, np.abs(g1_hat - g0_hat)


def _scenario_at_snr(scenario: Scenario, snr_tx_db: float) -> Scenario:
    """Rescale the transmit power so the transmit-referenced SNR hits the requested value."""
    tx = scenario.noise_power_w * 10.0 ** (snr_tx_db / 10.0)
    return replace(scenario, tx_power_w=tx)


def _chunk_ranges(n: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def _run_chunks(worker: Callable[[int, int, int], None], ranges, threads: int) -> None:
    if threads <= 1 or len(ranges) <= 1:
        for idx, (lo, hi) in enumerate(ranges):
            worker(idx, lo, hi)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, idx, lo, hi) for idx, (lo, hi) in enumerate(ranges)]
        for f in futures:
            f.result()


# ---------------------------------------------------------------------------
# studies


def evaluate_positions(
    scenario: Scenario,
    tag: TagModel,
    detector_kind: str,
    positions: np.ndarray,
    snr_tx_db: float,
    *,
    seed: int | None = None,
    n_bits: int = 400,
    n_train: int = 64,
    lse_analytic: bool = False,
    threads: int = 1,
    chunk: int = 4096,
) -> tuple[np.ndarray, np.ndarray]:
    """Best-pattern error rate and achieving pattern index for each tag position.

    The energy detector uses its closed form on the exact state amplitudes.
    The least-squares detector runs pilot-trained Monte Carlo per pattern
    and commits, per position, to the pattern with the largest estimated
    state separation (set ``lse_analytic`` for its closed form instead).
    """
    if detector_kind not in ("ed", "lse"):
        raise ValueError(f"unknown detector {detector_kind!r}")
    sc = _scenario_at_snr(scenario, snr_tx_db)
    if seed is None:
        seed = sc.rng_seed

    h_sr = chan.direct_channel(sc)
    h_tr = tag_channels_on_grid(sc, positions, tag.patterns)

    if detector_kind == "ed":
        ber_matrix = _ed_ber_matrix(h_sr, h_tr, tag, sc.tx_power_w, sc.noise_power_w)
        best = np.argmin(ber_matrix, axis=0)
        return ber_matrix[best, np.arange(positions.shape[0])], best

    g0 = h_sr + tag.gamma_off * h_tr
    g1 = h_sr + tag.gamma_on * h_tr
    if lse_analytic:
        ber_matrix = _lse_ber_analytic(g0, g1, sc.tx_power_w, sc.noise_power_w)
        best = np.argmin(ber_matrix, axis=0)
        return ber_matrix[best, np.arange(positions.shape[0])], best

    n = positions.shape[0]
    ber = np.empty(n)
    best = np.empty(n, dtype=int)
    ranges = _chunk_ranges(n, chunk)

    def worker(chunk_idx: int, lo: int, hi: int) -> None:
        width = hi - lo
        ber_p = np.empty((len(tag.patterns), width))
        sep_p = np.empty((len(tag.patterns), width))
        for p in range(len(tag.patterns)):
            rng = derived_rng(seed, 1, p, chunk_idx)
            ber_p[p], sep_p[p] = _lse_mc_ber(
                g0[p, lo:hi], g1[p, lo:hi], sc.tx_power_w, sc.noise_power_w, rng, n_bits, n_train
            )
        pick = np.argmax(sep_p, axis=0)
        cols = np.arange(width)
        ber[lo:hi] = ber_p[pick, cols]
        best[lo:hi] = pick

    _run_chunks(worker, ranges, threads)
    return ber, best


def ber_map(
    scenario: Scenario,
    tag: TagModel,
    detector_kind: str,
    grid: MapGrid,
    snr_tx_db: float,
    **kwargs,
) -> BerMap:
    """Spatial map of the best-pattern error rate over candidate tag positions."""
    positions = grid.positions()
    ber, best = evaluate_positions(scenario, tag, detector_kind, positions, snr_tx_db, **kwargs)
    shape = grid.shape
    return BerMap(
        grid=grid,
        ber=ber.reshape(shape),
        best_pattern=best.reshape(shape),
        patterns=tag.patterns,
    )


def coverage_positions(
    scenario: Scenario,
    step: float = DEFAULT_MAP_STEP,
    annulus: tuple[float, float] = ANNULUS_WAVELENGTHS,
    z: float | None = None,
) -> np.ndarray:
    """Grid cells whose center sits inside the coverage shell around the reader."""
    lam = scenario.wavelength
    inner, outer = annulus[0] * lam, annulus[1] * lam
    if z is None:
        z = float(scenario.reader.position[2])
    cx, cy = float(scenario.reader.position[0]), float(scenario.reader.position[1])
    half = outer + step
    xs = np.arange(cx - half, cx + half + 0.5 * step, step)
    ys = np.arange(cy - half, cy + half + 0.5 * step, step)
    gx, gy = np.meshgrid(xs, ys)
    pos = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])
    dist = np.linalg.norm(pos - scenario.reader.position, axis=1)
    keep = (dist > inner) & (dist < outer)
    if not np.any(keep):
        raise ValueError("coverage shell contains no grid positions; reduce the step")
    return pos[keep]


def outage_curve(
    scenario: Scenario,
    tag: TagModel,
    detector_kind: str,
    snr_tx_db_axis,
    *,
    ber_target: float = DEFAULT_BER_TARGET,
    step: float = DEFAULT_MAP_STEP,
    annulus: tuple[float, float] = ANNULUS_WAVELENGTHS,
    axis: str = "tx",
    **kwargs,
) -> OutageCurve:
    """Outage (fraction of shell positions with error rate above the target) per SNR point.

    With ``axis="captured"`` the input axis is interpreted as the
    receive-referenced SNR of the transparent state and converted through
    the scenario's direct channel gain.
    """
    snr_axis = np.asarray(snr_tx_db_axis, dtype=float)
    if snr_axis.size == 0:
        raise ValueError("SNR axis must be non-empty")
    if axis == "captured":
        gain_db = 10.0 * math.log10(abs(chan.direct_channel(scenario)) ** 2)
        tx_axis = snr_axis - gain_db
    elif axis == "tx":
        tx_axis = snr_axis
    else:
        raise ValueError(f"unknown SNR axis kind {axis!r}")

    positions = coverage_positions(scenario, step=step, annulus=annulus)
    outage = np.empty(snr_axis.size)
    for i, snr_db in enumerate(tx_axis):
        ber, _ = evaluate_positions(scenario, tag, detector_kind, positions, float(snr_db), **kwargs)
        outage[i] = float(np.mean(ber > ber_target))
    return OutageCurve(snr_db=snr_axis, outage=outage, axis=axis)


def captured_snr_curve(scenario: Scenario, snr_tx_db_axis) -> np.ndarray:
    """Receive-referenced SNR (dB) of the transparent state along a transmit-SNR axis.

    Independent of the tag pattern by construction; the offset is the
    direct-channel power gain, so the curve has unit dB/dB slope.
    """
    snr_axis = np.asarray(snr_tx_db_axis, dtype=float)
    power_gain = abs(chan.direct_channel(scenario)) ** 2
    with np.errstate(divide="ignore"):
        gain_db = 10.0 * np.log10(power_gain)
    return snr_axis + gain_db


def amplitude_maps(scenario: Scenario, tag: TagModel, grid: MapGrid) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless received amplitude per cell for the backscattering and transparent states.

    Multi-pattern tags report the pattern with the largest contrast per cell.
    """
    positions = grid.positions()
    h_sr = chan.direct_channel(scenario)
    h_tr = tag_channels_on_grid(scenario, positions, tag.patterns)
    root = math.sqrt(scenario.tx_power_w)
    a_on = np.abs(h_sr + tag.gamma_on * h_tr) * root
    a_off = np.abs(h_sr + tag.gamma_off * h_tr) * root
    best = np.argmax(np.abs(a_on - a_off), axis=0)
    cols = np.arange(positions.shape[0])
    shape = grid.shape
    return a_on[best, cols].reshape(shape), a_off[best, cols].reshape(shape)


# ---------------------------------------------------------------------------
# polarization-coding sweeps over measured or synthetic channels


def _pcs_pair_channels(channels: MeasuredChannelSet, pair: tuple[str, str]) -> tuple[complex, complex, complex, str]:
    """Resolve (g1, g0, h_direct, antenna) for a state pair, picking the antenna
    with the largest state separation (selection, not combining)."""
    state1, state0 = pair
    for state in (state1, state0):
        if state not in channels.state_ids():
            raise KeyError(f"state {state!r} missing from the measured channel set")
    best = None
    for antenna in channels.antenna_ids():
        if (state1, antenna) not in channels.states or (state0, antenna) not in channels.states:
            continue
        g1 = channels.aggregate(state1, antenna)
        g0 = channels.aggregate(state0, antenna)
        sep = abs(g1 - g0)
        if best is None or sep > best[0]:
            best = (sep, g1, g0, channels.direct[antenna], antenna)
    if best is None:
        raise KeyError(f"states {state1!r}/{state0!r} share no receive antenna")
    _, g1, g0, h_direct, antenna = best
    return g1, g0, h_direct, antenna


def pcs_pair_ber(
    channels: MeasuredChannelSet,
    pair: tuple[str, str],
    snr_captured_db_axis,
    n_bits: int,
    rng: np.random.Generator,
    *,
    n_train: int = 64,
) -> np.ndarray:
    """Monte Carlo least-squares error rate of one state pair along a captured-SNR axis."""
    snr_axis = np.asarray(snr_captured_db_axis, dtype=float)
    g1, g0, h_direct, _ = _pcs_pair_channels(channels, pair)
    direct_gain = abs(h_direct) ** 2
    if direct_gain <= 0:
        raise ValueError("direct channel is zero; the captured SNR is undefined")
    out = np.empty(snr_axis.size)
    for i, snr_db in enumerate(snr_axis):
        tx_power = 10.0 ** (snr_db / 10.0) / direct_gain  # noise power normalized to 1
        ber, _ = _lse_mc_ber(
            np.array([g0]), np.array([g1]), tx_power, 1.0, rng, n_bits, n_train
        )
        out[i] = float(ber[0])
    return out


def pcs_sweep(
    channels: MeasuredChannelSet | Callable[[int], MeasuredChannelSet],
    pairs: Iterable[str],
    snr_captured_db_axis,
    n_bits: int,
    *,
    seed: int = 0,
    n_train: int = 64,
    n_realizations: int = 1,
) -> dict[str, np.ndarray]:
    """Error-rate curves for each state pair, keyed by the pair name ('bit1:bit0').

    ``channels`` is either one measured set or a generator callable mapping a
    realization index to a set; generated realizations are averaged.
    """
    from .tags import pcs_pair_states

    snr_axis = np.asarray(snr_captured_db_axis, dtype=float)
    pair_list = list(pairs)
    resolved = [pcs_pair_states(name) for name in pair_list]

    realization_sets: list[MeasuredChannelSet]
    if callable(channels):
        realization_sets = [channels(r) for r in range(n_realizations)]
    else:
        realization_sets = [channels]

    curves: dict[str, np.ndarray] = {}
    for k, (name, pair) in enumerate(zip(pair_list, resolved)):
        acc = np.zeros(snr_axis.size)
        for r, channel_set in enumerate(realization_sets):
            rng = derived_rng(seed, 2, k, r)
            acc += pcs_pair_ber(channel_set, pair, snr_axis, n_bits, rng, n_train=n_train)
        curves[name] = acc / len(realization_sets)
    return curves


def correlated_pcs_channels(
    seed: int,
    rho: float,
    *,
    n_states: int = 4,
    sigma: float = 1.0,
    direct_gain: complex = 1.0 + 0.0j,
    antenna_id: str = "1",
) -> Callable[[int], MeasuredChannelSet]:
    """Generator of synthetic per-state channels with a tunable correlation knob.

    Each state's backscatter term is sigma*(rho*u + sqrt(1-rho^2)*w_k) with
    one shared draw u and independent per-state draws w_k, all unit-variance
    complex Gaussian, so the state power is constant while the pairwise
    correlation grows with rho. Draw order is fixed, so two generators with
    the same seed but different rho share identical u and w_k.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    mix_shared = rho
    mix_own = math.sqrt(1.0 - rho * rho)

    def generate(realization: int) -> MeasuredChannelSet:
        rng = derived_rng(seed, 3, realization)
        u = chan.complex_noise(rng, 1.0)
        states = {}
        for k in range(n_states):
            w = chan.complex_noise(rng, 1.0)
            states[(str(k + 1), antenna_id)] = sigma * (mix_shared * u + mix_own * w)
        return MeasuredChannelSet(states=states, direct={antenna_id: direct_gain})

    return generate


# ---------------------------------------------------------------------------
# file formats


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_measured_channels(channels: MeasuredChannelSet, path: str) -> None:
    """Write the per-state channel table; floats keep full round-trip precision."""
    lines = [",".join(MEASURED_HEADER)]
    for antenna in channels.antenna_ids():
        h = channels.direct[antenna]
        lines.append(f"{DIRECT_STATE_ID},{antenna},{h.real!r},{h.imag!r}")
    for (state, antenna) in sorted(channels.states):
        h = channels.states[(state, antenna)]
        lines.append(f"{state},{antenna},{h.real!r},{h.imag!r}")
    _atomic_write(path, "\n".join(lines) + "\n")


def load_measured_channels(path: str) -> MeasuredChannelSet:
    """Parse a per-state channel table, reporting the line number of any defect."""
    states: dict[tuple[str, str], complex] = {}
    direct: dict[str, complex] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != MEASURED_HEADER:
            raise ValueError(f"{path}: line 1: header must be {','.join(MEASURED_HEADER)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ValueError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            state, antenna = row[0].strip(), row[1].strip()
            if not state or not antenna:
                raise ValueError(f"{path}: line {lineno}: empty state or antenna id")
            try:
                value = complex(float(row[2]), float(row[3]))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric channel value") from None
            if state == DIRECT_STATE_ID:
                if antenna in direct:
                    raise ValueError(f"{path}: line {lineno}: duplicate direct entry for antenna {antenna!r}")
                direct[antenna] = value
            else:
                if (state, antenna) in states:
                    raise ValueError(f"{path}: line {lineno}: duplicate entry for ({state!r}, {antenna!r})")
                states[(state, antenna)] = value
    try:
        return MeasuredChannelSet(states=states, direct=direct)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_matrix_csv(path: str, matrix: np.ndarray) -> None:
    rows = [",".join(repr(float(v)) for v in row) for row in np.atleast_2d(matrix)]
    _atomic_write(path, "\n".join(rows) + "\n")


def write_curve_csv(path: str, x, y, header: tuple[str, str] = ("snr_db", "value")) -> None:
    lines = [",".join(header)]
    for a, b in zip(np.asarray(x), np.asarray(y)):
        lines.append(f"{float(a)!r},{float(b)!r}")
    _atomic_write(path, "\n".join(lines) + "\n")


def write_carpet_csv(path: str, bermap: BerMap) -> None:
    """Long-format best-orientation overlay: one row per cell."""
    xs, ys = bermap.grid.xs, bermap.grid.ys
    lines = ["x_m,y_m,theta_deg,phi_deg,pattern"]
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            o = bermap.best_orientation(iy, ix)
            t_deg, p_deg = o.to_degrees()
            lines.append(
                f"{float(x)!r},{float(y)!r},{t_deg!r},{p_deg!r},{int(bermap.best_pattern[iy, ix])}"
            )
    _atomic_write(path, "\n".join(lines) + "\n")
