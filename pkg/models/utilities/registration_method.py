from __future__ import annotations

import re
from enum import StrEnum


class RegistrationMethod(StrEnum):
    """
    The registration arms that evaluation compares. ``ablation`` is the network trained without the level-set term.
    """
    NETWORK = "network"
    DIRECT = "direct"
    ABLATION = "ablation"

    @property
    def uses_network(self) -> bool:
        return self is not RegistrationMethod.DIRECT

    @staticmethod
    def infer_method(tag: str) -> RegistrationMethod:
        """
        Read the method from a CLI value or an output directory name such as ``network-best``, ``direct_200``
        or ``unet-no-levelset``. Ablation markers take precedence over network ones.

        :param tag: The method value or tagged name
        :return: The method
        """
        tokens = re.split(r"[^a-z0-9]+", tag.lower())
        words = set(tokens) | {first + second for first, second in zip(tokens, tokens[1:])}
        for method in (RegistrationMethod.ABLATION, RegistrationMethod.DIRECT, RegistrationMethod.NETWORK):
            if words & _ALIASES[method]:
                return method

        raise ValueError(f"Registration method could not be inferred from tag: {tag}")


_ALIASES = {
    RegistrationMethod.NETWORK: {"network", "net", "unet", "amortized"},
    RegistrationMethod.DIRECT: {"direct", "baseline", "pairwise"},
    RegistrationMethod.ABLATION: {"ablation", "nolevelset", "nols"},
}
