# Optimization utilities
