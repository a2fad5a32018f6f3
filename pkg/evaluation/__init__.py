"""
Image-quality metrics over pluggable classifier backends.
"""
