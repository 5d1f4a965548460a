"""Sliding-window k-clustering with augmented Meyerson sketches."""

from .augmented import AugSketch, SketchInvalid, union
from .config import ProblemConfig
from .metric import (DistanceMeter, Euclidean, Metric, Point, WeightedInstance, clustering_cost,
                     distance, nearest_center, weighted_cost)
from .solver import Solution, estimated_cost, solve, weighted_seed
from .window import BoundedStreamClusterer, LambdaPairState, WindowClusterer, lambda_grid

__all__ = [
    "AugSketch", "BoundedStreamClusterer", "DistanceMeter", "Euclidean", "LambdaPairState",
    "Metric", "Point", "ProblemConfig", "SketchInvalid", "Solution", "WeightedInstance",
    "WindowClusterer", "clustering_cost", "distance", "estimated_cost", "lambda_grid",
    "nearest_center", "solve", "union", "weighted_cost", "weighted_seed",
]

__version__ = "0.1.0"
