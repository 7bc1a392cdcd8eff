"""Benchmark registry, run configuration, pipeline steps and the CLI."""

from .config import RunConfig
from .registry import REGISTRY, BenchmarkDef, get_benchmark, reference_glimit

__all__ = ["REGISTRY", "BenchmarkDef", "RunConfig", "get_benchmark", "reference_glimit"]
