"""
MicroSegNet pipeline - Modular Monolithic Architecture
"""

__version__ = "1.0.0"
