"""Indirect, direct and grid-hopping estimators for multistatic FMCW radar."""

from .direct import direct_estimate, direct_locate, direct_velocity, location_decision, location_decisions
from .hopping import fast_time_spectra, hop_decisions, hop_estimate, hop_locate, hop_location_decision, hop_velocity
from .indirect import (
    RangeDopplerMap,
    extract_peak,
    indirect_estimate,
    multilaterate_location,
    multilaterate_velocity,
    range_doppler_map,
)
from .interp import (
    HopTable,
    InterpScheme,
    StaleHopTableError,
    coeffs_for,
    fft_range_grid,
    precompute_hop_table,
    read_hop_table,
    write_hop_table,
)
from .model import (
    DegenerateGeometryError,
    Estimate,
    Grid,
    SceneGeometry,
    SensedParams,
    Target,
    WaveformConfig,
    build_location_grid,
    build_velocity_grid,
    doppler_atom,
    geometry_hash,
    range_atom,
    range_sensing,
    speed_sensing,
)
from .synth import NOISELESS, AliasingError, Frame, NoiseSpec, add_noise, synthesize_frame

__version__ = "0.1.0"
