"""Anderson localization at strong disorder: exact walk counts, critical
disorder thresholds, and fractional-moment verification on finite boxes."""

__version__ = "0.1.0"

from . import anderson, critical, moments, saw  # noqa: F401
