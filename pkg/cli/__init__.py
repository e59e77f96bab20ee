from cli.run_config import RunConfig, TrainRunConfig, RegisterConfig, SegmentConfig, EvaluateConfig, GradcheckConfig
from cli.main import COMMANDS, EXIT_CODES, build_parser, exit_code, main

__all__ = [
    "RunConfig",
    "TrainRunConfig",
    "RegisterConfig",
    "SegmentConfig",
    "EvaluateConfig",
    "GradcheckConfig",

    "COMMANDS",
    "EXIT_CODES",
    "build_parser",
    "exit_code",
    "main",
]
