from .registry import ModelRegistry, ModelRegistryEntry
from .service import ChatResult, chat_completion, compare
from .app import create_app

__all__ = [
    "ModelRegistry",
    "ModelRegistryEntry",
    "ChatResult",
    "chat_completion",
    "compare",
    "create_app",
]
