"""Single machine infinite bus generator models, linearization, controller synthesis and simulation."""

__version__ = "0.1.0"
