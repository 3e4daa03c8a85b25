"""Experiment harness: data generation, runs, CSV output and the CLI."""

from .data import DataSet, ExperimentConfig, generate_linear_data, generate_sigmoid_data
from .experiment import ExperimentResult, run_experiment
from .io import emit_csv, read_dataset, read_trace_csv, write_dataset
