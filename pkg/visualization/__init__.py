"""
Visualization modules for inspecting body partitions.
"""
