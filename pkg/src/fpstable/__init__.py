"""Sound round-off error analysis and unstable-test detection for small numerical programs."""

__version__ = "0.1.0"
