from .synth_tool import PersonSynthTool, build_parser, run

__all__ = [
    "PersonSynthTool",
    "build_parser",
    "run",
]
