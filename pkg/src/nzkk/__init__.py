"""Memory-kernel extraction and causal-structure audits for finite
open-quantum-system dynamics."""

__version__ = "0.1.0"
