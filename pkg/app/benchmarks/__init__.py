from .builder import BENCHMARKS, BenchmarkSpec, build_benchmark, list_benchmarks
