"""Command-line entry point, run configuration, and the wire-protocol client and mocks."""

from .config import BenchgenConfig, ConfigError, EvalConfig, RunConfig, freeze, load_config, parse_config
from .endpoint import EndpointClient, EndpointError, EndpointSpec, image_message, text_message
from .mockserver import MockServer, echo_answers, locate_target
