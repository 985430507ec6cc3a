"""Desk-scale hierarchical transport SDN: simulated IP/optical/microwave
network elements, three domain controllers, legacy-device mediation, and
an end-to-end orchestrator behind a unified HTTP+JSON northbound API."""

from importlib import resources

__version__ = "0.1.0"


def refnet_path() -> str:
    """Filesystem path of the bundled REF-NET topology file."""
    return str(resources.files("ifusion.data").joinpath("refnet.json"))
