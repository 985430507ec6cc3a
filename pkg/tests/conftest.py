"""Hand-built domain fixtures matching the REF-NET reference topology.

The full simulation boot (topology file -> devices -> controllers) is
exercised in the harness tests; controller tests construct their domain
directly so failures localize.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ifusion.controllers import IpController, MwController, OpticalController
from ifusion.controllers.mw import AirInterfaceConfig, MwLink
from ifusion.devices import (Device, DeviceDescriptor, LegacyDevice, LogicalClock,
                             Technology, VendorProfile)
from ifusion.mediation import MediatedDevice
from ifusion.model import (Identifier, LayerTag, LinkRecord, PortRef,
                           TeAttributes)


def ident(text):
    return Identifier.parse(text)


def port(text):
    return PortRef.parse(text)


def ip_link(local, a, z, metric, capacity):
    return LinkRecord(Identifier("ip", local), LayerTag.IP_L3, port(a), port(z),
                      TeAttributes(te_metric=metric, capacity_mbps=capacity,
                                   unreserved_mbps=capacity))


REFNET_IP_PORTS = {
    "R1": ("ge0", "ge1", "p-r2", "p-r3", "xe1"),
    "R2": ("ge0", "ge1", "p-r1", "p-r3", "xe1", "xe2"),
    "R3": ("ge0", "ge1", "p-r1", "p-r2", "p-r4", "xe1"),
    "R4": ("ge0", "ge1", "p-r3", "p-m1", "xe1"),
}


def build_ip_domain(clock=None):
    clock = clock or LogicalClock()
    devices = {}
    for name, ports in REFNET_IP_PORTS.items():
        dev = Device(DeviceDescriptor(Identifier("ip", name), Technology.IP),
                     ports=ports, clock=clock)
        devices[dev.id] = dev
    links = [
        ip_link("R1-R2", "ip/R1:p-r2", "ip/R2:p-r1", 10, 10000),
        ip_link("R1-R3", "ip/R1:p-r3", "ip/R3:p-r1", 30, 10000),
        ip_link("R2-R3", "ip/R2:p-r3", "ip/R3:p-r2", 10, 10000),
        ip_link("R3-R4", "ip/R3:p-r4", "ip/R4:p-r3", 10, 10000),
    ]
    return IpController("ip", devices, links), devices


REFNET_RING = ["O1", "O2", "O3", "O4", "O5", "O6"]
REFNET_FIBER_PAIRS = [("O1", "O2"), ("O2", "O3"), ("O3", "O4"), ("O4", "O5"),
                      ("O5", "O6"), ("O1", "O6"), ("O2", "O5")]


def fiber_id(a, b):
    lo, hi = sorted((a, b))
    return f"opt/F-{lo}-{hi}"


def build_optical_domain(clock=None, wavelengths=4):
    clock = clock or LogicalClock()
    neighbors = {n: [] for n in REFNET_RING}
    for a, b in REFNET_FIBER_PAIRS:
        neighbors[a].append(b)
        neighbors[b].append(a)
    devices = {}
    for name in REFNET_RING:
        ports = tuple(f"deg-{p.lower()}" for p in sorted(neighbors[name])) + \
            ("ad1", "ad2", "ad3", "ad4")
        dev = Device(DeviceDescriptor(Identifier("opt", name), Technology.OPTICAL),
                     ports=ports, clock=clock)
        devices[dev.id] = dev
    fibers = []
    for a, b in REFNET_FIBER_PAIRS:
        fibers.append(LinkRecord(
            ident(fiber_id(a, b)), LayerTag.PHOT_MEDIA,
            port(f"opt/{a}:deg-{b.lower()}"), port(f"opt/{b}:deg-{a.lower()}"),
            TeAttributes(te_metric=1, capacity_mbps=400000, unreserved_mbps=400000)))
    controller = OpticalController("opt", devices, fibers,
                                   wavelength_count=wavelengths)
    return controller, devices


REFNET_MW_CONFIG = AirInterfaceConfig(channel_bandwidth_mhz=56, modulation_min=4,
                                      modulation_max=256, adaptive=True)


def build_mw_domain(clock=None, configure=True):
    """M1 -- M2 -- M3 chain; M3 is LEGACY behind mediation."""
    clock = clock or LogicalClock()
    m1 = Device(DeviceDescriptor(Identifier("mw", "M1"), Technology.MW),
                ports=("eth1", "air0"), air_interfaces=("air0",), clock=clock)
    m2 = Device(DeviceDescriptor(Identifier("mw", "M2"), Technology.MW),
                ports=("air0", "air1"), air_interfaces=("air0", "air1"), clock=clock)
    m3_legacy = LegacyDevice(DeviceDescriptor(Identifier("mw", "M3"), Technology.MW,
                                              VendorProfile.LEGACY), clock=clock)
    m3 = MediatedDevice(m3_legacy, interface="air0", ports=("air0", "eth0"))
    devices = {d.id: d for d in (m1, m2, m3)}
    links = [
        MwLink(ident("mw/M1-M2"), port("mw/M1:air0"), port("mw/M2:air0"),
               REFNET_MW_CONFIG, REFNET_MW_CONFIG.modulation_max),
        MwLink(ident("mw/M2-M3"), port("mw/M2:air1"), port("mw/M3:air0"),
               REFNET_MW_CONFIG, REFNET_MW_CONFIG.modulation_max),
    ]
    controller = MwController("mw", devices, links)
    if configure:
        for link in links:
            controller.configure_link(link.id, REFNET_MW_CONFIG)
    return controller, devices


@pytest.fixture
def ip_domain():
    return build_ip_domain()


@pytest.fixture
def optical_domain():
    return build_optical_domain()


@pytest.fixture
def mw_domain():
    return build_mw_domain()
