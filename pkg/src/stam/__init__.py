"""Spatio-temporal affordance maps for a two-robot follow task.

Learn where a task is afforded from demonstrations (GMM/GMR over relative
poses), fuse the resulting likelihood field with a navigation costmap, and
drive a follower robot through goal selection and grid path planning inside
a deterministic 2D simulator.
"""

__version__ = "0.1.0"
