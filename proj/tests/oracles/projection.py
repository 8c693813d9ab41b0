"""Projection of a world point through an explicit 4x4 homogeneous chain."""
import numpy as np

K = np.array([[100.0, 0.0, 50.0, 0.0],
              [0.0, 120.0, 40.0, 0.0],
              [0.0, 0.0, 1.0, 0.0]])
c, s = np.cos(np.pi / 2), np.sin(np.pi / 2)
T = np.array([[c, -s, 0.0, 0.5],
              [s, c, 0.0, -0.25],
              [0.0, 0.0, 1.0, 3.0],
              [0.0, 0.0, 0.0, 1.0]])
X = np.array([1.0, 2.0, 4.0, 1.0])
p = K @ T @ X
print(repr(p[0] / p[2]), repr(p[1] / p[2]))
