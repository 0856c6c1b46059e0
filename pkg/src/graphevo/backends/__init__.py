from .base import OperatorBackend, OperatorRequest, build_prompt, pair_seed, pairing_order, solution_seed
from .chat import ChatBackend, ChatEndpointConfig
from .classical import ClassicalBackend
from .faulty import FaultScript, FaultyBackend
from .prompts import Prompt, RepairPrompt, render_repair

__all__ = [
    "ChatBackend",
    "ChatEndpointConfig",
    "ClassicalBackend",
    "FaultScript",
    "FaultyBackend",
    "OperatorBackend",
    "OperatorRequest",
    "Prompt",
    "RepairPrompt",
    "build_prompt",
    "pair_seed",
    "pairing_order",
    "render_repair",
    "solution_seed",
]
