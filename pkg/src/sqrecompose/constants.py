"""
Provided constants for use within the sqrecompose system.
"""

import torch

# pylint: disable=W0105
"""
All differentiable computation runs in double precision.
"""
DTYPE = torch.float64

"""
Shape-exponent bounds applied by the constrained reparameterization.
"""
EPS_MIN = 0.1
EPS_MAX = 1.9

"""
Smallest allowed per-axis scale as a fraction of the scene bounding radius.
"""
ALPHA_MIN_FRACTION = 1e-3

"""
Scale, as a fraction of the scene bounding radius, below which the softplus of the per-axis scale bends away from the
identity. Above it one unit of raw scale is one scene unit.
"""
ALPHA_SOFTNESS_FRACTION = 0.05

"""
Lower clamp of |x_i / alpha_i| before fractional exponentiation.
"""
RATIO_FLOOR = 1e-9

"""
Silhouette values below one 8-bit quantization level count as background.
"""
MASK_EPS = 1.0 / 255.0

"""
Relative padding applied to the bounding-sphere interval of every camera ray.
"""
RAY_PAD = 0.05

"""
Number of raw (unconstrained) parameters of one superquadric: 3 scales, 2 exponents, 3 Euler angles, 3 translation.
"""
PARAM_COUNT = 11

"""
Environment variable used as fallback for the worker thread count.
"""
THREADS_ENV = "ISCO_THREADS"
