"""Microwave domain controller: unified air-interface model over native
and mediated devices, symmetric link configuration, adaptive-modulation
capacity tracking, and capacity-change fan-out.

Capacity model: floor(channel_bandwidth_mhz * log2(modulation) * 0.9),
the 0.9 covering coding/framing overhead. Computed in integers
(bw * log2 * 9 // 10) so results are exact.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace

from ..devices import SET, NotificationKind
from ..errors import (CommitFailed, InvalidConfig, LinkDown, NoPath,
                      OutOfRangeModulation, UnknownLink)
from ..model import (Identifier, LayerTag, LinkRecord, NodeRecord, PortRef,
                     TeAttributes, Technology)
from .base import ConfigTransaction, constrained_shortest_path

CHANNEL_BANDWIDTHS_MHZ = (7, 14, 28, 56, 112)
MODULATION_ORDERS = (4, 16, 64, 256, 1024)
_LOG2 = {4: 2, 16: 4, 64: 6, 256: 8, 1024: 10}


def air_capacity_mbps(channel_bandwidth_mhz: int, modulation: int) -> int:
    """floor(BW * log2(M) * 0.9) in exact integer arithmetic."""
    return channel_bandwidth_mhz * _LOG2[modulation] * 9 // 10


@dataclass(frozen=True)
class AirInterfaceConfig:
    channel_bandwidth_mhz: int
    modulation_min: int
    modulation_max: int
    adaptive: bool
    tx_power_dbm: int = 20

    def validate(self) -> None:
        if self.channel_bandwidth_mhz not in CHANNEL_BANDWIDTHS_MHZ:
            raise InvalidConfig(f"bandwidth {self.channel_bandwidth_mhz} MHz "
                                f"not in {CHANNEL_BANDWIDTHS_MHZ}")
        for m in (self.modulation_min, self.modulation_max):
            if m not in MODULATION_ORDERS:
                raise InvalidConfig(f"modulation order {m} not in {MODULATION_ORDERS}")
        if self.modulation_min > self.modulation_max:
            raise InvalidConfig("modulation_min above modulation_max")
        if not self.adaptive and self.modulation_min != self.modulation_max:
            raise InvalidConfig("fixed-modulation link needs min == max")
        if not -10 <= self.tx_power_dbm <= 35:
            raise InvalidConfig(f"tx power {self.tx_power_dbm} outside [-10, 35]")

    def to_dict(self) -> dict:
        return {
            "channel_bandwidth_mhz": self.channel_bandwidth_mhz,
            "modulation_min": self.modulation_min,
            "modulation_max": self.modulation_max,
            "adaptive": self.adaptive,
            "tx_power_dbm": self.tx_power_dbm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AirInterfaceConfig":
        return cls(
            channel_bandwidth_mhz=int(d["channel_bandwidth_mhz"]),
            modulation_min=int(d["modulation_min"]),
            modulation_max=int(d["modulation_max"]),
            adaptive=bool(d["adaptive"]),
            tx_power_dbm=int(d.get("tx_power_dbm", 20)),
        )


@dataclass
class MwLink:
    id: Identifier
    end_a: PortRef            # (device, air interface)
    end_z: PortRef
    config: AirInterfaceConfig
    current_modulation: int
    flagged: bool = False     # quarantined event seen

    def ends(self) -> tuple[PortRef, PortRef]:
        return (self.end_a, self.end_z)

    def to_dict(self) -> dict:
        return {
            "id": self.id.render(),
            "a": self.end_a.render(),
            "z": self.end_z.render(),
            "config": self.config.to_dict(),
            "current_modulation": self.current_modulation,
            "flagged": self.flagged,
        }


@dataclass(frozen=True)
class CapacityChange:
    link: Identifier
    old_mbps: int
    new_mbps: int


@dataclass
class MwPathHandle:
    """Bandwidth allocated on an ordered chain of MW links."""
    owner: str
    links: list[Identifier]
    mbps: int
    released: bool = False


class MwController:
    def __init__(self, domain: str, devices: dict, links: list[MwLink]):
        self.domain = domain
        self.technology = Technology.MW
        self.devices = dict(devices)
        self._links: dict[Identifier, MwLink] = {l.id: l for l in links}
        self._allocations: dict[Identifier, dict[str, int]] = {
            l.id: {} for l in links}
        self._subscribers: list = []
        self._lock = threading.RLock()
        self._last_capacity: dict[Identifier, int] = {
            l.id: self._capacity_or_zero(l) for l in links}

    # -- capacity model -----------------------------------------------------

    def get_link(self, link_id: Identifier) -> MwLink:
        link = self._links.get(link_id)
        if link is None:
            raise UnknownLink(link_id.render())
        return link

    def link_oper_up(self, link: MwLink) -> bool:
        for ref in link.ends():
            dev = self.devices.get(ref.node)
            if dev is None or dev.offline or not dev.interface_oper_up(ref.port):
                return False
        return True

    def effective_capacity(self, link_id: Identifier) -> int:
        with self._lock:
            link = self.get_link(link_id)
            if not self.link_oper_up(link):
                raise LinkDown(link_id.render())
            return air_capacity_mbps(link.config.channel_bandwidth_mhz,
                                     link.current_modulation)

    def _capacity_or_zero(self, link: MwLink) -> int:
        if not self.link_oper_up(link):
            return 0
        return air_capacity_mbps(link.config.channel_bandwidth_mhz,
                                 link.current_modulation)

    def allocated_on(self, link_id: Identifier) -> int:
        return sum(self._allocations.get(link_id, {}).values())

    def available_mbps(self, link_id: Identifier) -> int:
        with self._lock:
            link = self.get_link(link_id)
            return max(0, self._capacity_or_zero(link) - self.allocated_on(link_id))

    # -- configuration --------------------------------------------------------

    def configure_link(self, link_id: Identifier, config: AirInterfaceConfig) -> None:
        """Write the symmetric config to both ends atomically; the mediated
        path is indistinguishable from the native one here."""
        config.validate()
        with self._lock:
            link = self.get_link(link_id)
            old_capacity = self._capacity_or_zero(link)
            txn = ConfigTransaction()
            try:
                for ref in link.ends():
                    base = f"/air-interfaces/{ref.port}"
                    txn.stage(self.devices[ref.node], [
                        (f"{base}/channel_bandwidth_mhz", SET, config.channel_bandwidth_mhz),
                        (f"{base}/modulation_min", SET, config.modulation_min),
                        (f"{base}/modulation_max", SET, config.modulation_max),
                        (f"{base}/adaptive", SET, config.adaptive),
                        (f"{base}/tx_power_dbm", SET, config.tx_power_dbm),
                    ])
                txn.commit_all()
            except Exception as exc:
                raise CommitFailed(str(exc), link=link_id.render()) from exc
            link.config = config
            link.current_modulation = config.modulation_max
            self._maybe_publish(link)

    # -- adaptive modulation ----------------------------------------------------

    def subscribe_capacity(self, callback) -> None:
        """Register a CapacityChange consumer (the orchestrator)."""
        self._subscribers.append(callback)

    def _maybe_publish(self, link: MwLink) -> CapacityChange | None:
        """Publish the delta against the last published capacity, if any."""
        new = self._capacity_or_zero(link)
        old = self._last_capacity[link.id]
        if new == old:
            return None
        self._last_capacity[link.id] = new
        notice = CapacityChange(link.id, old, new)
        for callback in self._subscribers:
            callback(notice)
        return notice

    def on_modulation_change(self, link_id: Identifier, modulation: int) -> CapacityChange | None:
        """Apply a modulation report; idempotent events produce no notice."""
        with self._lock:
            link = self.get_link(link_id)
            cfg = link.config
            if modulation not in MODULATION_ORDERS or \
                    not cfg.modulation_min <= modulation <= cfg.modulation_max:
                link.flagged = True
                raise OutOfRangeModulation(
                    f"{modulation} outside [{cfg.modulation_min}, {cfg.modulation_max}]",
                    link=link_id.render())
            link.current_modulation = modulation
            return self._maybe_publish(link)

    def link_for_interface(self, device: Identifier, interface: str) -> MwLink | None:
        ref = PortRef(device, interface)
        for link in self._links.values():
            if ref in link.ends():
                return link
        return None

    def handle_device_event(self, device: Identifier, event) -> None:
        """Event-pump entry: modulation reports and link oper changes."""
        if event.kind is NotificationKind.MODULATION_CHANGE:
            link = self.link_for_interface(device, event.payload["interface"])
            if link is None:
                return
            try:
                self.on_modulation_change(link.id, event.payload["modulation"])
            except OutOfRangeModulation:
                pass  # quarantined: link is flagged, event goes no further
        elif event.kind in (NotificationKind.LINK_DOWN, NotificationKind.LINK_UP):
            link = self.link_for_interface(device, event.payload["interface"])
            if link is None:
                return
            with self._lock:
                self._maybe_publish(link)

    # -- bandwidth ledger ---------------------------------------------------------

    def mw_path(self, head: Identifier, tail: Identifier, mbps: int,
                excludes: frozenset = frozenset()) -> list[Identifier]:
        """Hop-count CSPF over links with enough available capacity."""
        links = self.view_links()

        def usable(link: LinkRecord) -> bool:
            if link.id in excludes:
                return False
            return link.te.oper_up and link.te.unreserved_mbps >= mbps

        return constrained_shortest_path(links, head, tail,
                                         metric=lambda l: 1, usable=usable)

    def path_check(self, entry: PortRef, exit: PortRef, mbps: int,
                   excludes: frozenset = frozenset()) -> list[Identifier]:
        return self.mw_path(entry.node, exit.node, mbps, excludes)

    def reserve_path(self, owner: str, head: Identifier, tail: Identifier,
                     mbps: int, excludes: frozenset = frozenset()) -> MwPathHandle:
        with self._lock:
            path = self.mw_path(head, tail, mbps, excludes)
            for link_id in path:
                self._allocations[link_id][owner] = mbps
            return MwPathHandle(owner, path, mbps)

    def release_path(self, handle: MwPathHandle) -> None:
        with self._lock:
            if handle.released:
                return
            for link_id in handle.links:
                self._allocations[link_id].pop(handle.owner, None)
            handle.released = True

    def allocations_snapshot(self) -> dict:
        with self._lock:
            return {lid.render(): dict(sorted(entries.items()))
                    for lid, entries in sorted(self._allocations.items())}

    def owners_on(self, link_id: Identifier) -> list[str]:
        return sorted(self._allocations.get(link_id, {}))

    # -- views ------------------------------------------------------------------

    def nodes(self) -> list[NodeRecord]:
        return sorted((NodeRecord(d.id, Technology.MW, tuple(d.ports))
                       for d in self.devices.values()), key=lambda n: n.id)

    def view_links(self) -> list[LinkRecord]:
        with self._lock:
            out = []
            for link in sorted(self._links.values(), key=lambda l: l.id):
                capacity = self._capacity_or_zero(link)
                unreserved = max(0, capacity - self.allocated_on(link.id))
                out.append(LinkRecord(
                    link.id, LayerTag.MW_AIR, link.end_a, link.end_z,
                    TeAttributes(te_metric=1, capacity_mbps=capacity,
                                 unreserved_mbps=unreserved,
                                 oper_up=capacity > 0)))
            return out

    def list_links(self) -> list[MwLink]:
        return [self._links[k] for k in sorted(self._links)]

    def bottleneck_mbps(self) -> int:
        with self._lock:
            return max((self.available_mbps(lid) for lid in self._links), default=0)

    def get_domain_monitoring(self) -> list[dict]:
        with self._lock:
            out = []
            for link in self.list_links():
                capacity = self._capacity_or_zero(link)
                out.append({
                    "link": link.id.render(),
                    "capacity_mbps": capacity,
                    "allocated_mbps": self.allocated_on(link.id),
                    "current_modulation": link.current_modulation,
                    "oper_up": capacity > 0,
                    "flagged": link.flagged,
                })
            return out

    # -- audit --------------------------------------------------------------------

    def audit(self) -> list[str]:
        problems = []
        with self._lock:
            for link in self._links.values():
                capacity = self._capacity_or_zero(link)
                allocated = self.allocated_on(link.id)
                if allocated > capacity:
                    problems.append(
                        f"{link.id}: allocated {allocated} > capacity {capacity}")
                cfg = link.config
                if not cfg.modulation_min <= link.current_modulation <= cfg.modulation_max:
                    problems.append(f"{link.id}: modulation outside configured range")
        return problems
