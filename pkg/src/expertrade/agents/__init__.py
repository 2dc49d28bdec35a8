from .backends import CompletionBackend, RemoteBackend, ScriptedBackend
from .parsing import (
    AlignmentVotes,
    DirectionPrediction,
    RiskAssessment,
    format_alignment,
    format_direction,
    format_risk,
    format_summary,
    parse_alignment,
    parse_bracket_summary,
    parse_direction,
    parse_risk,
)
from .pipeline import (
    DayAnalysis,
    ExperienceLog,
    PipelineSettings,
    apply_refinement,
    run_alignment,
    run_day,
)
from .prompts import AgentRole, TEMPLATES, render_prompt

__all__ = [
    "AgentRole", "AlignmentVotes", "CompletionBackend", "DayAnalysis", "DirectionPrediction",
    "ExperienceLog", "PipelineSettings", "RemoteBackend", "RiskAssessment", "ScriptedBackend",
    "TEMPLATES", "apply_refinement", "format_alignment", "format_direction", "format_risk",
    "format_summary", "parse_alignment", "parse_bracket_summary", "parse_direction",
    "parse_risk", "render_prompt", "run_alignment", "run_day",
]
