"""Consensus-routed test-time adaptation on modular arithmetic chains."""

try:
    from ._disctt import Policy, generate_dataset, run_from_config, solve
except ImportError:  # extension on sys.path rather than inside the package
    from _disctt import Policy, generate_dataset, run_from_config, solve

__all__ = ["Policy", "generate_dataset", "run_from_config", "solve"]
