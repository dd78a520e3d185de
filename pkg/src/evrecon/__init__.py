"""Intensity image reconstruction from event-camera streams.

Events are integrated as multiplicative log-intensity quanta and each
packet is turned into a frame by minimising total variation on the time
surface of recent events plus a Kullback-Leibler fidelity, with a
primal-dual algorithm whose proximal maps are closed form. A built-in
scene simulator provides ground truth for quantitative testing.
"""

from .events import (
    Event,
    EventParseError,
    SensorGeometry,
    StreamOrderError,
    events_from_text,
    format_event_line,
    parse_event_line,
    read_stream,
    write_events,
)
from .pgm import frame_path, read_pgm, to_gray, write_pgm, write_pgm_autoscale
from .pipeline import (
    ManifoldConfig,
    PacketPolicy,
    ReconstructionState,
    StreamStats,
    Thresholds,
    apply_event,
    init_state,
    process_packet,
    run_stream,
)
from .simulate import GroundTruthVideo, generate_events, psnr_aligned, render_scene
from .solve import (
    SolveResult,
    SolverConfig,
    energy,
    primal_dual_solve,
    prox_data,
    prox_dual,
    rof_manifold_solve,
)
from .surface import (
    MetricField,
    TimeSurface,
    compute_metric,
    denoise_timestamps,
    div_xy,
    flat_metric,
    grad_x,
    grad_y,
    normalize_timestamps,
    operator_norm_bound,
    surface_gradient,
    surface_gradient_adjoint,
    update_timestamp_map,
)

__version__ = "0.1.0"
