from . import corpus, importance, protocol, runner

COMMAND_GROUPS = (corpus, importance, protocol, runner)

__all__ = ["COMMAND_GROUPS"]
