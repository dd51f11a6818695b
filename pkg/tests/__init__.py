"""
Tests for data analysis package.
"""

# Test configuration can go here
