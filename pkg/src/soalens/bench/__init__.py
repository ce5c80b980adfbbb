"""Kernel corpus, equivalence sweeps, and timing reports."""

from .corpus import (KernelCase, build_corpus, corpus_dir, kernel_case,
                     particle_layout, widen_views)
from .harness import (MODES, VERIFY_MODES, VERIFY_SIZES, BenchCell,
                      BenchReport, VerifyRow, VerifyTable, bench_all,
                      bench_native, verify_all)

__all__ = [
    "MODES",
    "VERIFY_MODES",
    "VERIFY_SIZES",
    "BenchCell",
    "BenchReport",
    "KernelCase",
    "VerifyRow",
    "VerifyTable",
    "bench_all",
    "bench_native",
    "build_corpus",
    "corpus_dir",
    "kernel_case",
    "particle_layout",
    "verify_all",
    "widen_views",
]
