"""Snowflake-domain analysis: prefractal geometry, boundary energy, Lipschitz
extensions and a coupled bulk/boundary parabolic solver."""

__version__ = "0.1.0"
