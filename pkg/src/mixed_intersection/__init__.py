"""Signalized intersection simulator for mixed CAV/HDV traffic"""

__version__ = "0.1.0"
