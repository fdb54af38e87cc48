"""Duty-cycled WSN MAC simulator (H-MAC / S-MAC) with closed-form models."""

__version__ = "0.1.0"
