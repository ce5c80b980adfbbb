"""Annotation-driven AoS/SoA layout conversion for a small C-like language.

Pipeline: parse -> analyze -> plan -> rewrite -> emit, plus a bytecode
interpreter used to check that rewritten programs behave identically to
their originals, and a small particle-kernel corpus for benchmarks.
"""

from .emit import EmitConfig, diff_report, emit
from .errors import (
    AliasError,
    BoundsError,
    Diagnostic,
    IllegalCallError,
    InternalError,
    MiniRuntimeError,
    MissingSizeError,
    ParseError,
    SemanticError,
    SoaLensError,
    ToolchainError,
    TypeCheckError,
    UnknownFieldError,
    UnknownTargetError,
)
from .layout import RecordLayout, build_layouts, element_footprint, view_footprint
from .parser import parse, parse_file
from .semantics import Analysis, ConversionSpec, analyze
from .transform import (
    RewritePlan,
    TransformResult,
    apply,
    plan_all,
    strip,
    transform_unit,
)

__version__ = "0.1.0"

__all__ = [
    "Analysis",
    "AliasError",
    "BoundsError",
    "ConversionSpec",
    "Diagnostic",
    "EmitConfig",
    "IllegalCallError",
    "InternalError",
    "MiniRuntimeError",
    "MissingSizeError",
    "ParseError",
    "RecordLayout",
    "RewritePlan",
    "SemanticError",
    "SoaLensError",
    "ToolchainError",
    "TransformResult",
    "TypeCheckError",
    "UnknownFieldError",
    "UnknownTargetError",
    "analyze",
    "apply",
    "build_layouts",
    "diff_report",
    "element_footprint",
    "emit",
    "parse",
    "parse_file",
    "plan_all",
    "strip",
    "transform_unit",
    "view_footprint",
    "__version__",
]
