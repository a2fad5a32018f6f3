"""
Dataset layout, loading, preprocessing and the synthetic stick-figure generator.
"""
