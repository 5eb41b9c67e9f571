"""
Test package for argument structure prediction.
"""
