"""Synthetic dissected-aorta phantoms with analytic ground truth."""
from afx.phantom.generate import PhantomTruth, compute_truth, generate
from afx.phantom.spec import BranchSpec, FlapSpec, PhantomSpec, TearSpec, Trajectory
from afx.phantom.suite import sample_suite

__all__ = [
    "BranchSpec", "FlapSpec", "PhantomSpec", "PhantomTruth", "TearSpec", "Trajectory",
    "compute_truth", "generate", "sample_suite",
]
