"""Optical domain controller: ROADM/fiber topology, OCh routing with
first-fit wavelength assignment under the continuity constraint, ODU
grooming onto OChs, and a T-API-shaped northbound view.

Candidate paths are enumerated (hop count, then node-id sequence) and the
first one with any free wavelength common to all its fibers wins; the
lowest free slot index is taken. Deterministic by construction.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from ..devices import DELETE, SET
from ..errors import (Blocked, CommitFailed, InvalidIntent, OchInUse,
                      UnknownOch, UnknownOdu, UnknownPort)
from ..model import (Identifier, LayerTag, LinkRecord, NodeRecord, PortRef,
                     ServiceState, Technology, transition)
from .base import ConfigTransaction, enumerate_simple_paths, path_nodes

OCH_CAPACITY_MBPS = 100_000
ODU_RATES = {"ODU0": 1_250, "ODU2": 10_000, "ODU4": 100_000}


def odu_rate_for(requested_mbps: int, ladder=("ODU0", "ODU2", "ODU4")) -> str:
    """Smallest rate in the ladder carrying ``requested_mbps``."""
    for name in ladder:
        if ODU_RATES[name] >= requested_mbps:
            return name
    raise Blocked(f"{requested_mbps} Mbps exceeds the largest ODU rate")


@dataclass
class OchConnection:
    id: str
    a: PortRef
    z: PortRef
    path: list[Identifier]        # ordered fiber link ids
    lam: int
    allocated_mbps: int = 0
    capacity_mbps: int = OCH_CAPACITY_MBPS
    state: ServiceState = ServiceState.PLANNED
    auto_created: bool = False    # created by grooming, collapses when drained

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "a": self.a.render(),
            "z": self.z.render(),
            "path": [f.render() for f in self.path],
            "lambda": self.lam,
            "allocated_mbps": self.allocated_mbps,
            "capacity_mbps": self.capacity_mbps,
            "state": self.state.value,
        }


@dataclass
class OduService:
    id: str
    rate: str
    carrier: str                  # OCh id
    a: PortRef
    z: PortRef
    state: ServiceState = ServiceState.PLANNED

    @property
    def rate_mbps(self) -> int:
        return ODU_RATES[self.rate]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "rate": self.rate,
            "rate_mbps": self.rate_mbps,
            "carrier": self.carrier,
            "a": self.a.render(),
            "z": self.z.render(),
            "state": self.state.value,
        }


@dataclass
class OduHandle:
    odu: OduService
    och: OchConnection
    och_created: bool
    txn: ConfigTransaction


class OpticalController:
    def __init__(self, domain: str, devices: dict, fibers: list[LinkRecord],
                 wavelength_count: dict[Identifier, int] | int = 4,
                 path_cap: int = 8, cap_min_nodes: int = 8):
        self.domain = domain
        self.technology = Technology.OPTICAL
        self.devices = dict(devices)
        self._fibers: dict[Identifier, LinkRecord] = {f.id: f for f in fibers}
        if isinstance(wavelength_count, int):
            wavelength_count = {f.id: wavelength_count for f in fibers}
        self._wavelengths = dict(wavelength_count)
        self._occupancy: dict[Identifier, list[str | None]] = {
            f.id: [None] * self._wavelengths[f.id] for f in fibers}
        self._ochs: dict[str, OchConnection] = {}
        self._odus: dict[str, OduService] = {}
        self._counter = 0
        self._lock = threading.RLock()
        self.path_cap = path_cap
        self.cap_min_nodes = cap_min_nodes

    def _next_id(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}-{self._counter:04d}"

    # -- topology ---------------------------------------------------------------

    def nodes(self) -> list[NodeRecord]:
        return sorted((NodeRecord(d.id, Technology.OPTICAL, tuple(d.ports))
                       for d in self.devices.values()), key=lambda n: n.id)

    def fibers(self) -> list[LinkRecord]:
        return sorted(self._fibers.values(), key=lambda f: f.id)

    def free_slots(self, fiber_id: Identifier) -> list[int]:
        return [i for i, holder in enumerate(self._occupancy[fiber_id])
                if holder is None]

    def _check_port(self, ref: PortRef) -> None:
        dev = self.devices.get(ref.node)
        if dev is None or ref.port not in dev.ports:
            raise UnknownPort(ref.render())

    def _degree_at(self, fiber: LinkRecord, node: Identifier) -> str:
        a, z = fiber.endpoints()
        if a.node == node:
            return a.port
        if z.node == node:
            return z.port
        raise ValueError(f"fiber {fiber.id} does not touch {node}")

    # -- routing and wavelength assignment ----------------------------------------

    def compute_och(self, a: PortRef, z: PortRef,
                    excludes: frozenset[Identifier] = frozenset()
                    ) -> tuple[list[Identifier], int]:
        """First (hops, node-sequence)-ordered path with a free common
        wavelength; lowest free slot index on that path."""
        self._check_port(a)
        self._check_port(z)
        if a.node == z.node:
            raise InvalidIntent("add/drop ports must be on distinct ROADMs")
        with self._lock:
            def usable(fiber: LinkRecord) -> bool:
                if fiber.id in excludes:
                    return False
                fa, fz = fiber.nodes()
                return fa not in excludes and fz not in excludes

            paths = enumerate_simple_paths(self.fibers(), a.node, z.node,
                                           usable=usable)
            if len(self.devices) >= self.cap_min_nodes:
                paths = paths[:self.path_cap]
            for path in paths:
                common = set(self.free_slots(path[0].id))
                for fiber in path[1:]:
                    common &= set(self.free_slots(fiber.id))
                if common:
                    return [f.id for f in path], min(common)
            raise Blocked(f"no (path, lambda) pair {a.node} -> {z.node}")

    # -- OCh lifecycle ---------------------------------------------------------

    def _och_edits(self, och: OchConnection) -> dict[Identifier, list]:
        fibers = [self._fibers[fid] for fid in och.path]
        nodes = path_nodes(och.a.node, fibers)
        edits: dict[Identifier, list] = {}
        base = f"/cross-connects/{och.id}"
        for i, node in enumerate(nodes):
            in_port = och.a.port if i == 0 else self._degree_at(fibers[i - 1], node)
            out_port = och.z.port if i == len(nodes) - 1 else self._degree_at(fibers[i], node)
            edits[node] = [
                (f"{base}/in_port", SET, in_port),
                (f"{base}/lambda", SET, och.lam),
                (f"{base}/out_port", SET, out_port),
            ]
        return edits

    def _mark(self, och: OchConnection) -> None:
        for fid in och.path:
            self._occupancy[fid][och.lam] = och.id

    def _unmark(self, och: OchConnection) -> None:
        for fid in och.path:
            if self._occupancy[fid][och.lam] == och.id:
                self._occupancy[fid][och.lam] = None

    def setup_och(self, a: PortRef, z: PortRef,
                  excludes: frozenset = frozenset(),
                  auto_created: bool = False) -> OchConnection:
        with self._lock:
            path, lam = self.compute_och(a, z, excludes)
            och = OchConnection(self._next_id("och"), a, z, path, lam,
                                auto_created=auto_created)
            self._mark(och)
            och.state = transition(och.state, ServiceState.RESERVED)
            txn = ConfigTransaction()
            try:
                for node, edits in self._och_edits(och).items():
                    txn.stage(self.devices[node], edits)
                txn.commit_all()
            except Exception as exc:
                self._unmark(och)
                raise CommitFailed(str(exc), och=och.id) from exc
            och.state = transition(och.state, ServiceState.ACTIVE)
            self._ochs[och.id] = och
            return och

    def teardown_och(self, och_id: str) -> None:
        with self._lock:
            och = self._ochs.get(och_id)
            if och is None:
                raise UnknownOch(och_id)
            if och.state is not ServiceState.ACTIVE:
                raise UnknownOch(f"{och_id} is {och.state.value}")
            if och.allocated_mbps > 0:
                raise OchInUse(f"{och_id} carries {och.allocated_mbps} Mbps")
            txn = ConfigTransaction()
            fibers = [self._fibers[fid] for fid in och.path]
            for node in path_nodes(och.a.node, fibers):
                txn.stage(self.devices[node],
                          [(f"/cross-connects/{och.id}", DELETE, None)])
            try:
                txn.commit_all()
            except Exception as exc:
                raise CommitFailed(str(exc), och=och_id) from exc
            self._unmark(och)
            och.state = transition(och.state, ServiceState.DELETED)

    def get_och(self, och_id: str) -> OchConnection:
        och = self._ochs.get(och_id)
        if och is None:
            raise UnknownOch(och_id)
        return och

    # -- ODU grooming -------------------------------------------------------------

    def _grooming_target(self, a: PortRef, z: PortRef, rate_mbps: int
                         ) -> OchConnection | None:
        """Best-fit: the fullest ACTIVE OCh between the ROADM pair that
        still fits; ties to the lowest OCh id."""
        pair = {a.node, z.node}
        candidates = [
            och for och in self._ochs.values()
            if och.state is ServiceState.ACTIVE
            and {och.a.node, och.z.node} == pair
            and och.allocated_mbps + rate_mbps <= och.capacity_mbps
        ]
        candidates.sort(key=lambda o: (-o.allocated_mbps, o.id))
        return candidates[0] if candidates else None

    def reserve_odu(self, a: PortRef, z: PortRef, rate: str,
                    excludes: frozenset = frozenset()) -> OduHandle:
        """Phase 1: pick or create the carrier, mark occupancy/allocation,
        stage all device edits."""
        if rate not in ODU_RATES:
            raise InvalidIntent(f"unknown ODU rate {rate!r}")
        self._check_port(a)
        self._check_port(z)
        with self._lock:
            rate_mbps = ODU_RATES[rate]
            och = self._grooming_target(a, z, rate_mbps)
            och_created = False
            device_edits: dict[Identifier, list] = {}
            if och is None:
                path, lam = self.compute_och(a, z, excludes)
                och = OchConnection(self._next_id("och"), a, z, path, lam,
                                    auto_created=True)
                self._mark(och)
                och.state = transition(och.state, ServiceState.RESERVED)
                och_created = True
                device_edits = self._och_edits(och)
            odu = OduService(self._next_id("odu"), rate, och.id, a, z)
            och.allocated_mbps += rate_mbps
            for node in (a.node, z.node):
                device_edits.setdefault(node, []).extend([
                    (f"/odu-clients/{odu.id}/och", SET, och.id),
                    (f"/odu-clients/{odu.id}/rate", SET, rate),
                ])
            odu.state = transition(odu.state, ServiceState.RESERVED)
            txn = ConfigTransaction()
            try:
                for node in sorted(device_edits):
                    txn.stage(self.devices[node], device_edits[node])
            except Exception:
                self._rollback_odu_state(odu, och, och_created)
                raise
            return OduHandle(odu, och, och_created, txn)

    def _rollback_odu_state(self, odu: OduService, och: OchConnection,
                            och_created: bool) -> None:
        och.allocated_mbps -= ODU_RATES[odu.rate]
        if och_created:
            self._unmark(och)
            self._ochs.pop(och.id, None)
        if odu.state is not ServiceState.FAILED:
            odu.state = transition(odu.state, ServiceState.FAILED)

    def commit_odu(self, handle: OduHandle) -> OduService:
        with self._lock:
            try:
                handle.txn.commit_all()
            except Exception as exc:
                self._rollback_odu_state(handle.odu, handle.och, handle.och_created)
                raise CommitFailed(str(exc), odu=handle.odu.id) from exc
            if handle.och_created:
                handle.och.state = transition(handle.och.state, ServiceState.ACTIVE)
                self._ochs[handle.och.id] = handle.och
            handle.odu.state = transition(handle.odu.state, ServiceState.ACTIVE)
            self._odus[handle.odu.id] = handle.odu
            return handle.odu

    def rollback_odu(self, handle: OduHandle) -> None:
        with self._lock:
            handle.txn.abort()
            self._rollback_odu_state(handle.odu, handle.och, handle.och_created)

    def setup_odu(self, a: PortRef, z: PortRef, rate: str) -> OduService:
        with self._lock:
            handle = self.reserve_odu(a, z, rate)
            return self.commit_odu(handle)

    def release_odu(self, odu_id: str) -> None:
        """Teardown; an auto-created carrier OCh collapses once drained."""
        with self._lock:
            odu = self._odus.get(odu_id)
            if odu is None:
                raise UnknownOdu(odu_id)
            if odu.state is not ServiceState.ACTIVE:
                raise UnknownOdu(f"{odu_id} is {odu.state.value}")
            och = self._ochs[odu.carrier]
            collapse = och.auto_created and och.allocated_mbps == odu.rate_mbps
            txn = ConfigTransaction()
            edits: dict[Identifier, list] = {}
            for node in (odu.a.node, odu.z.node):
                edits.setdefault(node, []).append(
                    (f"/odu-clients/{odu.id}", DELETE, None))
            if collapse:
                fibers = [self._fibers[fid] for fid in och.path]
                for node in path_nodes(och.a.node, fibers):
                    edits.setdefault(node, []).append(
                        (f"/cross-connects/{och.id}", DELETE, None))
            try:
                for node in sorted(edits):
                    txn.stage(self.devices[node], edits[node])
                txn.commit_all()
            except Exception as exc:
                raise CommitFailed(str(exc), odu=odu_id) from exc
            och.allocated_mbps -= odu.rate_mbps
            odu.state = transition(odu.state, ServiceState.DELETED)
            if collapse:
                self._unmark(och)
                och.state = transition(och.state, ServiceState.DELETED)

    def get_odu(self, odu_id: str) -> OduService:
        odu = self._odus.get(odu_id)
        if odu is None:
            raise UnknownOdu(odu_id)
        return odu

    # -- orchestrator surface -----------------------------------------------------

    def path_check(self, entry: PortRef, exit: PortRef, mbps: int,
                   excludes: frozenset = frozenset()) -> str:
        """Feasibility of an ODU segment; returns the rate it would use."""
        rate = odu_rate_for(mbps, ladder=("ODU0", "ODU2", "ODU4"))
        with self._lock:
            if self._grooming_target(entry, exit, ODU_RATES[rate]) is not None:
                return rate
            self.compute_och(entry, exit, excludes)  # raises Blocked if not
            return rate

    def bottleneck_mbps(self) -> int:
        with self._lock:
            best = max((och.capacity_mbps - och.allocated_mbps
                        for och in self._ochs.values()
                        if och.state is ServiceState.ACTIVE), default=0)
            if any(self.free_slots(fid) for fid in self._fibers):
                best = max(best, OCH_CAPACITY_MBPS)
            return best

    # -- views ---------------------------------------------------------------------

    def get_tapi_context(self) -> dict:
        """Pure projection of controller state, T-API 2.0 shaped."""
        with self._lock:
            nodes = []
            edge_points = []
            sips = []
            for node in self.nodes():
                nodes.append({"uuid": node.id.render(),
                              "name": node.id.local})
                for port in sorted(node.ports):
                    ref = f"{node.id.render()}:{port}"
                    edge_points.append({"uuid": ref, "node": node.id.render()})
                    if port.startswith("ad"):
                        sips.append({"uuid": ref})
            links = [{
                "uuid": f.id.render(),
                "node-edge-points": [f.endpoint_a.render(), f.endpoint_z.render()],
                "total-wavelengths": self._wavelengths[f.id],
                "free-wavelengths": len(self.free_slots(f.id)),
            } for f in self.fibers()]
            services = []
            for och in sorted(self._ochs.values(), key=lambda o: o.id):
                if och.state is ServiceState.ACTIVE:
                    services.append({"uuid": och.id, "layer": "OCH",
                                     "end-points": [och.a.render(), och.z.render()],
                                     "lambda": och.lam,
                                     "allocated_mbps": och.allocated_mbps})
            for odu in sorted(self._odus.values(), key=lambda o: o.id):
                if odu.state is ServiceState.ACTIVE:
                    services.append({"uuid": odu.id, "layer": "ODU",
                                     "end-points": [odu.a.render(), odu.z.render()],
                                     "rate": odu.rate, "carrier": odu.carrier})
            return {
                "context": {
                    "topology": {"nodes": nodes, "node-edge-points": edge_points,
                                 "links": links},
                    "service_interface_points": sips,
                    "connectivity_services": services,
                }
            }

    def get_domain_monitoring(self) -> list[dict]:
        with self._lock:
            return [{
                "fiber": f.id.render(),
                "wavelengths": self._wavelengths[f.id],
                "free": len(self.free_slots(f.id)),
            } for f in self.fibers()]

    def list_ochs(self) -> list[OchConnection]:
        return [self._ochs[k] for k in sorted(self._ochs)]

    def list_odus(self) -> list[OduService]:
        return [self._odus[k] for k in sorted(self._odus)]

    # -- audit ------------------------------------------------------------------

    def occupancy_snapshot(self) -> dict:
        with self._lock:
            return {fid.render(): list(slots)
                    for fid, slots in sorted(self._occupancy.items())}

    def audit(self) -> list[str]:
        """Wavelength exclusivity/continuity and OTN accounting."""
        problems = []
        with self._lock:
            active = {o.id: o for o in self._ochs.values()
                      if o.state is ServiceState.ACTIVE}
            for och in active.values():
                for fid in och.path:
                    if self._occupancy[fid][och.lam] != och.id:
                        problems.append(
                            f"{fid}: slot {och.lam} not held by {och.id}")
            for fid, slots in self._occupancy.items():
                for lam, holder in enumerate(slots):
                    if holder is not None and holder not in active:
                        problems.append(f"{fid}: slot {lam} held by dead {holder}")
            for och in active.values():
                total = sum(o.rate_mbps for o in self._odus.values()
                            if o.carrier == och.id and o.state is ServiceState.ACTIVE)
                if total != och.allocated_mbps:
                    problems.append(
                        f"{och.id}: ODU sum {total} != allocated {och.allocated_mbps}")
                if och.allocated_mbps > och.capacity_mbps:
                    problems.append(f"{och.id}: over-allocated")
        return problems
