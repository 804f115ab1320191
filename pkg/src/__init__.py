"""
Circular causal effects: IPW estimation of average direction and length
treatment effects on angular outcomes
"""

__version__ = "1.0.0"
