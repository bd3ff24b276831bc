"""Experiment harnesses, file formats and benchmarks behind the command line."""
