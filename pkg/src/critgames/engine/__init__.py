"""Engine probing: UCI transports, the probe session, and a scripted mock."""

from .session import (
    CRITICAL_RATE_HEADER,
    DEFAULT_OPTIONS,
    CriticalRateRecord,
    EngineSession,
    EvalRecord,
    HistogramReport,
    Position,
    ProbeConfig,
    ProbeOutputs,
    critical_rate_csv,
    run_probe,
)
from .transport import (
    EngineTimeout,
    LiveTransport,
    ReplayMismatch,
    ReplayTransport,
    load_transcript,
    save_transcript,
)

__all__ = [
    "CRITICAL_RATE_HEADER",
    "DEFAULT_OPTIONS",
    "CriticalRateRecord",
    "EngineSession",
    "EngineTimeout",
    "EvalRecord",
    "HistogramReport",
    "LiveTransport",
    "Position",
    "ProbeConfig",
    "ProbeOutputs",
    "ReplayMismatch",
    "ReplayTransport",
    "critical_rate_csv",
    "load_transcript",
    "run_probe",
    "save_transcript",
]
