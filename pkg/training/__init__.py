"""
Losses, the alternating training loop and checkpoints.
"""
