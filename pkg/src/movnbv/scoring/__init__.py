from .ellipsoids import Ellipsoid, EllipsoidSummary, cluster, cluster_count, mvee, summarize, summarize_points
from .projection import SilhouetteRegion, depth_weights, project, score, score_poses, silhouettes

__all__ = [
    "Ellipsoid",
    "EllipsoidSummary",
    "SilhouetteRegion",
    "cluster",
    "cluster_count",
    "depth_weights",
    "mvee",
    "project",
    "score",
    "score_poses",
    "silhouettes",
    "summarize",
    "summarize_points",
]
