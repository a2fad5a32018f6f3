"""
Pose geometry, mask partitioning and per-part affine transforms.
"""
