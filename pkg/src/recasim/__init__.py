"""Trace-driven simulator for a reconfigurable, workload-aware SSD cache."""

from recasim.trace import IoRequest, Trace, parse_trace, write_trace, unique_page_count

__version__ = "0.1.0"

__all__ = ["IoRequest", "Trace", "parse_trace", "write_trace", "unique_page_count"]
