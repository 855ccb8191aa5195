"""Pricing and calibration of CDX swaptions under a Levy-driven OU short rate and intensity."""
__version__ = "0.1.0"
