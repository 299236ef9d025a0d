"""Finite-element laboratory for Dirichlet-to-Neumann spectra, Steklov-Robin duality and nodal counts."""
from .assembly import FormMatrices, Potential, assemble
from .geometry import Annulus, Cylinder, Disk, Mesh, Rectangle, load_mesh, mesh_domain, save_mesh
from .spectra import Spectrum, dirichlet_spectrum, robin_spectrum, steklov_spectrum

__version__ = "0.1.0"

__all__ = [
    "Annulus",
    "Cylinder",
    "Disk",
    "FormMatrices",
    "Mesh",
    "Potential",
    "Rectangle",
    "Spectrum",
    "assemble",
    "dirichlet_spectrum",
    "load_mesh",
    "mesh_domain",
    "robin_spectrum",
    "save_mesh",
    "steklov_spectrum",
]
