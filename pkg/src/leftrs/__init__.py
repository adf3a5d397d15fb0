"""Fault-tolerant multiprocessor resource sharing: LEFT-RS simulator, WCRT analyses, task generator, sweeps."""

from .analysis_baselines import OverheadModel, analyze, msrpft_access, msrpft_overhead, response_time_baseline
from .analysis_leftrs import AnalysisResult, response_time
from .model import ResourceSpec, SystemSpec, TaskSpec, make_system, validate
from .sim import FaultSchedule, ReleasePattern, Segment, SimTrace, Simulator, simulate, worst_case_probe
from .taskgen import GenConfig, generate

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult", "FaultSchedule", "GenConfig", "OverheadModel", "ReleasePattern", "ResourceSpec",
    "Segment", "SimTrace", "Simulator", "SystemSpec", "TaskSpec", "analyze", "generate", "make_system",
    "msrpft_access", "msrpft_overhead", "response_time", "response_time_baseline", "simulate",
    "validate", "worst_case_probe",
]
