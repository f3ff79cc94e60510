"""Python bindings for the nativeai simulator and orchestrator."""

from ._core import (
    CASE_STUDY_QUERY,
    SCHEMES,
    Error,
    KnowledgeStore,
    channels_csv,
    compare,
    estimate_aoa,
    orchestrate,
    parse_config,
    run_cli,
    run_scheme,
    scenario_text,
    steering_vector,
)

__all__ = [
    "CASE_STUDY_QUERY",
    "SCHEMES",
    "Error",
    "KnowledgeStore",
    "channels_csv",
    "compare",
    "estimate_aoa",
    "orchestrate",
    "parse_config",
    "run_cli",
    "run_scheme",
    "scenario_text",
    "steering_vector",
]
