"""rfc2code: compile RFC-style protocol prose into packet-handling programs."""

__version__ = "0.1.0"
