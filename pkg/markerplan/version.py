__version__ = "0.1.0"
"""
Package version, written in the header of plans, reports and datasets.
"""
