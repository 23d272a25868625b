"""Deformable voxel grids: energy-minimized hexahedral control grids for
shape fitting, cubification, style transfer, retrieval, and PCA editing."""

from .analysis import (
    Correspondence,
    DvgDescriptor,
    PcaModel,
    correspondences,
    descriptor,
    knn_search,
    pca_deform,
    pca_fit,
)
from .energy import EnergyParams, bending_energy, elastic_energy, inclusion_loss, total_energy, energy_gradient
from .grid import ControlGrid, ball_covering, grid_derivatives, regular_grid, subdivide, trilinear_eval
from .optimizer import DvgModel, ScheduleParams, fit_hierarchical, fit_level, select_level
from .registration import TpsMap, cubify, exact_local_coords, locate_and_register, project, tps_apply, tps_fit
from .shape_io import Mesh, SampledShape, load_shape, load_sampled_shape, normalize_to_unit_cube, sample_surface

__version__ = "0.1.0"

__all__ = [
    "ControlGrid",
    "Correspondence",
    "DvgDescriptor",
    "DvgModel",
    "EnergyParams",
    "Mesh",
    "PcaModel",
    "SampledShape",
    "ScheduleParams",
    "TpsMap",
    "ball_covering",
    "bending_energy",
    "correspondences",
    "cubify",
    "descriptor",
    "elastic_energy",
    "energy_gradient",
    "exact_local_coords",
    "fit_hierarchical",
    "fit_level",
    "grid_derivatives",
    "inclusion_loss",
    "knn_search",
    "load_sampled_shape",
    "load_shape",
    "locate_and_register",
    "normalize_to_unit_cube",
    "pca_deform",
    "pca_fit",
    "project",
    "regular_grid",
    "sample_surface",
    "select_level",
    "subdivide",
    "total_energy",
    "tps_apply",
    "tps_fit",
]
