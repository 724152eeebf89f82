from .bench import BenchmarkSet, BenchReport, benchmark_from_pairs, evaluate_rm, macro_accuracy, overall_accuracy
from .probe import LengthBiasReport, length_bias_probe, pad_response
