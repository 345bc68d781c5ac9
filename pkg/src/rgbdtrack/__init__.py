"""RGBD single-object tracking with depth-based occlusion handling."""
