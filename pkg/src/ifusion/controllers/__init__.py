from .ip import IpController
from .mw import MwController
from .optical import OpticalController

__all__ = ["IpController", "MwController", "OpticalController"]
