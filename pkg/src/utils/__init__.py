"""Utility functions and helpers.""" 