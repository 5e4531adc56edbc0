"""Link-level simulator for polarization-reconfigurable ambient backscatter tags."""

__version__ = "0.1.0"

from .channel import (
    ChannelCoefficient,
    Pose,
    Scatterer,
    Scenario,
    aggregate_channel,
    direct_channel,
    los_segment,
    received_sample,
    sample_scatterers,
    snr_captured,
    snr_tx,
    tag_channel,
)
from .detectors import (
    ChannelEstimates,
    DetectionResult,
    ed_ber_analytic,
    ed_detect,
    lse_detect,
    lse_estimate,
    run_link,
    signal_contrast,
)
from .experiments import (
    BerMap,
    MapGrid,
    MeasuredChannelSet,
    OutageCurve,
    amplitude_maps,
    ber_map,
    captured_snr_curve,
    load_measured_channels,
    outage_curve,
    pcs_sweep,
)
from .polarization import (
    Orientation,
    Vec3,
    agreement_map,
    backscatter_projection,
    direct_projection,
    exhaustive_best_orientation,
    optimal_tag_orientation,
    unit_vector,
)
from .tags import SymbolPlan, TagModel, build_tag, encode_bts, encode_pcs

__all__ = [
    "__version__",
    "BerMap",
    "ChannelCoefficient",
    "ChannelEstimates",
    "DetectionResult",
    "MapGrid",
    "MeasuredChannelSet",
    "Orientation",
    "OutageCurve",
    "Pose",
    "Scatterer",
    "Scenario",
    "SymbolPlan",
    "TagModel",
    "Vec3",
    "aggregate_channel",
    "agreement_map",
    "amplitude_maps",
    "backscatter_projection",
    "ber_map",
    "build_tag",
    "captured_snr_curve",
    "direct_channel",
    "direct_projection",
    "ed_ber_analytic",
    "ed_detect",
    "encode_bts",
    "encode_pcs",
    "exhaustive_best_orientation",
    "load_measured_channels",
    "los_segment",
    "lse_detect",
    "lse_estimate",
    "optimal_tag_orientation",
    "outage_curve",
    "pcs_sweep",
    "received_sample",
    "run_link",
    "sample_scatterers",
    "signal_contrast",
    "snr_captured",
    "snr_tx",
    "tag_channel",
    "unit_vector",
]
