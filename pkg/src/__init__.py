"""Tree Inference Lab - hierarchical generative models, deep reconstruction and baselines"""

__version__ = "1.0.0"
__author__ = "Tree Inference Lab Team"
