"""Rough-path numerics: tensor algebra, signatures, sewing, controlled paths, flows and RDE solvers."""
from . import brownian, controlled, flows, path_lift, sewing, tensor
from .controlled import ControlledPath, rough_integral, self_lift
from .flows import ApproxFlowGenerator, FlowEvaluation, flow_eval
from .path_lift import PiecewisePath, RoughPathGrid, distance, signature, young_lift
from .tensor import TruncatedTensor

__version__ = "0.1.0"
