from models.utilities.padding import PaddingPlan
from models.utilities.registration_method import RegistrationMethod
from models.utilities.config_parsing import parse_config, load_config, apply_overrides

__all__ = [
    "PaddingPlan",

    "RegistrationMethod",

    "parse_config",
    "load_config",
    "apply_overrides",
]
