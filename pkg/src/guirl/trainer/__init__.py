"""Rollouts, the toy linear-softmax policy and the policy-gradient loop."""

from ..trajectory import RolloutGroup, StepRecord, Trajectory
from .loop import (
    EmptySuite,
    NonFiniteGradient,
    RunReport,
    ShapeMismatch,
    TrainConfig,
    evaluate_policy,
    policy_gradient,
    schedule,
    train,
    update,
)
from .policy import (
    FEATURE_VERSION,
    Decision,
    FeatureMap,
    LinearSoftmaxPolicy,
    OracleGreedyPolicy,
    PolicyParams,
    RandomPolicy,
    RemotePolicy,
    act,
    action_probs,
    enumerate_candidates,
    grad_logprob,
    parse_action_reply,
)
from .rollout import GroupResult, RewardConfig, collect_group, run_episode, score_trajectory
