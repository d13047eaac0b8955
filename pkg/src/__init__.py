"""
TabTokens Source Package

GuitarPro 5 tablature to event-token conversion and back, with corpus tools.
"""

__version__ = "1.0.0"
__author__ = "TabTokens Team"
__description__ = "GuitarPro 5 and event-token codec for symbolic music corpora"
