"""Pi-calculus configurations, their presheaf traces and behaviours, and
fair testing across the resulting transition systems."""

from . import behaviours, pi_syntax, presheaf, testing, traces

__all__ = ["pi_syntax", "presheaf", "traces", "behaviours", "testing"]
__version__ = "0.1.0"
