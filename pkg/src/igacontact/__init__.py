"""Isogeometric penalty contact for circular contact pairs in plane strain."""

from .contact import ContactConfig, ContactPair, detect_contacts
from .elasticity import Material
from .nurbs import KnotVector, NurbsCurve, NurbsPatch, knot_insert, make_annulus_patch, make_arc, refine
from .scene import SceneConfig, build_scene, load_config, parse_config
from .solver import Body, ConfigError, LoadSchedule, RunHistory, Scene, SolverError, StepResult, run_load_steps

__version__ = "0.1.0"
