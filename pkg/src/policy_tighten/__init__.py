"""policy-tighten: log-driven tightening of Cedar permit rules."""

__version__ = "0.1.0"
