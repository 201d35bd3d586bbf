"""Central-place foraging simulator, NEAT controller evolution and input-ablation analysis."""

__version__ = "0.1.0"
