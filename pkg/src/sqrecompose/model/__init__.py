"""Differentiable silhouette model of superquadric compositions

This package holds the geometric core used by every other part of sqrecompose: the superquadric parameterization and
its implicit surface, pinhole cameras and ray generation, the ray-marched silhouette renderer, the reconstruction loss
with its importance ray sampler, and exact loss gradients with respect to the raw superquadric parameters.

Example:
    A unit sphere is sqrecompose.model.superquadric.SuperquadricParams.sphere((0, 0, 0), 1.0)
"""
