"""
Generator and discriminator networks.
"""
