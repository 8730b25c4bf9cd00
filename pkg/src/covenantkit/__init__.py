"""Bitcoin covenant toolkit: constructs deleted-key, recovered-key, and
CHECKTEMPLATEVERIFY covenants, simulates the multi-party enforcement
protocol, composes covenant graphs, and validates everything against a
built-in simulated consensus validator."""

__version__ = "0.1.0"
