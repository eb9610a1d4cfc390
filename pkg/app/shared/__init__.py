"""
Shared helpers used across modules: image I/O, plotting, seeding, run manifest
"""
