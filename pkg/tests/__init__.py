"""
Test modules for person-synth.
"""
