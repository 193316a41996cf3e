"""srkit: certified computations around the stable rank of C*-algebras."""

__version__ = "0.1.0"
