"""regsom: Kohonen-map segmentation pipeline for unemployment-register data.

Collates registration spells per individual, derives occasional-work
features, trains an online self-organizing map, groups its code vectors into
super-classes by Ward clustering, and interprets the classes via Burt-table
correspondence analysis and canonical discriminant analysis. A deterministic
synthetic-register generator makes the whole pipeline runnable at desk scale.
"""

from .cda import CanonicalDiscriminant
from .mca import BurtMca
from .som import KohonenMap
from .superclass import WardSuperclasses

__version__ = "0.1.0"

__all__ = ["KohonenMap", "WardSuperclasses", "BurtMca",
           "CanonicalDiscriminant", "__version__"]
