"""
Utility modules for the person-synth application.
"""
