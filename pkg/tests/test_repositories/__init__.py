"""
Repository Tests Package

This package contains unit tests for all repository classes.
"""