"""Robust pointing-performance toolkit for balloon-borne telescopes.

Submodules
----------
lti         state-space / transfer-function primitives, H-infinity norms
lft         structured real uncertainty (linear fractional transformations)
multibody   port-based linearized multibody chain elements and assembly
flightchain flight-chain scenario construction, calibration, platform loops
pointing    line-of-sight kinematics, sensor fusion, fine-stage actuators
synthesis   weighted closed loop, fixed-structure controller search
scenario    TOML scenario files and run manifests
cli         command-line entry point
"""

__version__ = "0.1.0"

from .lti import StateSpaceModel, TransferFunction, hinf_norm, ss  # noqa: F401
from .lft import UncertainParam, UncertainSystem, instantiate  # noqa: F401
from .flightchain import build_chain, close_primary_loops, default_config  # noqa: F401
from .pointing import build_pointing_plant, default_pointing_config  # noqa: F401
