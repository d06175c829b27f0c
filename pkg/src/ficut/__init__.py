"""Forward invariant cuts for safety proofs of hybrid programs."""

__version__ = "0.1.0"
