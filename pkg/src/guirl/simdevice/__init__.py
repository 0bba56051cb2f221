"""Deterministic simulated GUI device with privileged goal verification and fault injection."""

from .apps import AppGraph, AppRegistry, default_registry
from .device import ProbeResult, SimDevice, StepResult, inject, reset, step
from .oracle import (
    UNREACHABLE,
    oracle_distance,
    shortest_path,
    task_oracle,
    transition_actions,
    verify_outcome,
)
from .suite import TaskSuite, load_suite
from .types import (
    ACTION_TEMPLATES,
    SCREEN_DIMS,
    WIDGET_KINDS,
    NOOP,
    Action,
    Back,
    Done,
    EnvFaulted,
    EpisodeTerminated,
    FaultPlan,
    GoalPredicate,
    InvalidAction,
    Observation,
    ScreenState,
    SimDeviceError,
    Swipe,
    Tap,
    TaskSpec,
    TypeText,
    UnknownApp,
    Widget,
    action_from_dict,
    action_template,
    action_to_dict,
    anchor_hash,
    canonical_serialize,
    instruction_tokens,
    quoted_tokens,
    tokenize,
)
