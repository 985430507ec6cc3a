"""IP domain controller: inventory and layered topology discovery,
centralized CSPF, MPLS LSP provisioning with a controller-side bandwidth
ledger, and L2/L3 VPN configuration.

The reservation ledger lives here, not on the devices: path computation
and admission happen under one domain mutation lock, so concurrent
requests cannot double-book a link.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

from ..devices import DELETE, RUNNING, SET
from ..errors import (BadState, CommitFailed, NoPath, TagExhausted, UnknownLsp,
                      UnknownNode, UnknownPort)
from ..model import (Identifier, LayerTag, LinkRecord, NodeRecord, PortRef,
                     ServiceState, TeAttributes, Technology, TopologyGraph,
                     transition)
from .base import ConfigTransaction, constrained_shortest_path


@dataclass
class Lsp:
    id: str
    head: Identifier
    tail: Identifier
    ero: list[Identifier]
    reserved_mbps: int
    state: ServiceState = ServiceState.PLANNED

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "head": self.head.render(),
            "tail": self.tail.render(),
            "ero": [l.render() for l in self.ero],
            "reserved_mbps": self.reserved_mbps,
            "state": self.state.value,
        }


@dataclass
class VpnService:
    id: str
    kind: str                                  # L2VPN | L3VPN
    attachments: list[tuple[Identifier, str, int]]
    vpn_tag: int
    bound_lsps: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "attachments": [{"pe": pe.render(), "interface": i, "vlan": v}
                            for pe, i, v in self.attachments],
            "vpn_tag": self.vpn_tag,
            "bound_lsps": list(self.bound_lsps),
        }


@dataclass
class LspHandle:
    """A reserved-but-uncommitted LSP: ledger decremented, head-end config
    staged in an open candidate session."""
    lsp: Lsp
    txn: ConfigTransaction


class IpController:
    def __init__(self, domain: str, devices: dict, adjacency: list[LinkRecord],
                 vpn_tag_range: tuple[int, int] = (1, 4094)):
        self.domain = domain
        self.technology = Technology.IP
        self.devices = dict(devices)
        self._declared: dict[Identifier, LinkRecord] = {l.id: l for l in adjacency}
        self._augmented: dict[Identifier, dict] = {}
        self._reservations: dict[Identifier, dict[str, int]] = {
            l.id: {} for l in adjacency}
        self._lsps: dict[str, Lsp] = {}
        self._vpns: dict[str, VpnService] = {}
        self._vpn_tag_range = vpn_tag_range
        self._counter = 0
        self._lock = threading.RLock()

    # -- inventory / topology ------------------------------------------------

    def _next_id(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}-{self._counter:04d}"

    def reserved_on(self, link_id: Identifier) -> int:
        return sum(self._reservations.get(link_id, {}).values())

    def _link_specs(self) -> list[LinkRecord]:
        return list(self._declared.values()) + [
            aug["record"] for aug in self._augmented.values()]

    def _oper_view(self, link: LinkRecord) -> tuple[bool, bool]:
        """(admin_up, oper_up) of a link as seen from its end devices."""
        admin = True
        oper = True
        for ref in link.endpoints():
            dev = self.devices.get(ref.node)
            if dev is None or dev.offline:
                continue
            cfg = dev.get_config(RUNNING)
            if cfg.get(f"/interfaces/{ref.port}/admin_up") is False:
                admin = False
            if not dev.interface_oper_up(ref.port):
                oper = False
        return admin, admin and oper

    def view_links(self) -> list[LinkRecord]:
        """IP_L3 links with live TE attributes (ledger + device state)."""
        with self._lock:
            out = []
            for spec in self._link_specs():
                admin, oper = self._oper_view(spec)
                te = replace(spec.te,
                             unreserved_mbps=spec.te.capacity_mbps - self.reserved_on(spec.id),
                             admin_up=admin, oper_up=oper)
                out.append(replace(spec, te=te))
            return sorted(out, key=lambda l: l.id)

    def nodes(self) -> list[NodeRecord]:
        return sorted((NodeRecord(d.id, Technology.IP, tuple(d.ports))
                       for d in self.devices.values()), key=lambda n: n.id)

    def discover(self) -> tuple[dict, dict[LayerTag, TopologyGraph]]:
        """(inventory, layered topology) rebuilt from running configs plus
        the declared physical adjacency. Unreachable devices are reported,
        not fatal."""
        with self._lock:
            inventory = {"devices": {}, "errors": []}
            for dev_id, dev in sorted(self.devices.items()):
                if dev.offline:
                    inventory["errors"].append(
                        {"device": dev_id.render(), "code": "UNKNOWN_DEVICE"})
                    continue
                cfg = dev.get_config(RUNNING)
                interfaces = []
                for port in dev.ports:
                    interfaces.append({
                        "name": port,
                        "vlan": cfg.get(f"/interfaces/{port}/vlan"),
                        "peer": self._peer_of(PortRef(dev_id, port)),
                    })
                inventory["devices"][dev_id.render()] = {
                    "technology": dev.descriptor.technology.value,
                    "vendor_profile": dev.descriptor.vendor_profile.value,
                    "model_version": dev.descriptor.model_version,
                    "interfaces": interfaces,
                }

            layers: dict[LayerTag, TopologyGraph] = {}
            for tag in (LayerTag.ETH_L2, LayerTag.IP_L3, LayerTag.MPLS):
                graph = TopologyGraph()
                for node in self.nodes():
                    graph.add_node(node)
                layers[tag] = graph
            for link in self.view_links():
                layers[LayerTag.IP_L3].add_link(link)
                for tag, prefix in ((LayerTag.ETH_L2, "eth"), (LayerTag.MPLS, "mpls")):
                    derived = LinkRecord(
                        Identifier(link.id.domain, f"{prefix}:{link.id.local}"),
                        tag, link.endpoint_a, link.endpoint_z, link.te)
                    layers[tag].add_link(derived)
            return inventory, layers

    def _peer_of(self, ref: PortRef) -> str | None:
        for link in self._link_specs():
            a, z = link.endpoints()
            if ref == a:
                return z.render()
            if ref == z:
                return a.render()
        return None

    # -- path computation ------------------------------------------------------

    def compute_path(self, head: Identifier, tail: Identifier, requested_mbps: int,
                     excludes: frozenset[Identifier] = frozenset()) -> list[Identifier]:
        for node in (head, tail):
            if not any(node == d for d in self.devices):
                raise UnknownNode(node.render())
        links = self.view_links()

        def usable(link: LinkRecord) -> bool:
            if link.id in excludes:
                return False
            a, z = link.nodes()
            if a in excludes or z in excludes:
                return False
            return link.te.oper_up and link.te.unreserved_mbps >= requested_mbps

        return constrained_shortest_path(links, head, tail, usable=usable)

    def path_check(self, entry: PortRef, exit: PortRef, mbps: int,
                   excludes: frozenset = frozenset()) -> list[Identifier]:
        """Feasibility probe for the orchestrator; reserves nothing."""
        return self.compute_path(entry.node, exit.node, mbps, excludes)

    # -- LSP lifecycle ---------------------------------------------------------

    def reserve_lsp(self, head: Identifier, tail: Identifier, requested_mbps: int,
                    excludes: frozenset = frozenset()) -> LspHandle:
        """Phase 1: admit, decrement the ledger, stage head-end config."""
        with self._lock:
            ero = self.compute_path(head, tail, requested_mbps, excludes)
            lsp = Lsp(self._next_id("lsp"), head, tail, ero, requested_mbps)
            for link_id in ero:
                self._reservations[link_id][lsp.id] = requested_mbps
            lsp.state = transition(lsp.state, ServiceState.RESERVED)
            txn = ConfigTransaction()
            try:
                base = f"/mpls/lsp-heads/{lsp.id}"
                txn.stage(self.devices[head], [
                    (f"{base}/to", SET, tail.render()),
                    (f"{base}/ero", SET, ",".join(l.render() for l in ero)),
                    (f"{base}/bandwidth_mbps", SET, requested_mbps),
                ])
            except Exception:
                self._undo_reservation(lsp)
                raise
            return LspHandle(lsp, txn)

    def commit_reserved(self, handle: LspHandle) -> Lsp:
        """Phase 2: commit the staged config; restores everything on failure."""
        with self._lock:
            try:
                handle.txn.commit_all()
            except Exception as exc:
                self._undo_reservation(handle.lsp)
                handle.lsp.state = transition(handle.lsp.state, ServiceState.FAILED)
                raise CommitFailed(str(exc), lsp=handle.lsp.id) from exc
            handle.lsp.state = transition(handle.lsp.state, ServiceState.ACTIVE)
            self._lsps[handle.lsp.id] = handle.lsp
            return handle.lsp

    def rollback_reserved(self, handle: LspHandle) -> None:
        with self._lock:
            handle.txn.abort()
            self._undo_reservation(handle.lsp)
            handle.lsp.state = transition(handle.lsp.state, ServiceState.FAILED)

    def _undo_reservation(self, lsp: Lsp) -> None:
        for link_id in lsp.ero:
            self._reservations[link_id].pop(lsp.id, None)

    def provision_lsp(self, head: Identifier, tail: Identifier, requested_mbps: int,
                      excludes: frozenset = frozenset()) -> Lsp:
        with self._lock:
            handle = self.reserve_lsp(head, tail, requested_mbps, excludes)
            return self.commit_reserved(handle)

    def teardown_lsp(self, lsp_id: str) -> None:
        with self._lock:
            lsp = self._lsps.get(lsp_id)
            if lsp is None:
                raise UnknownLsp(lsp_id)
            if lsp.state is not ServiceState.ACTIVE:
                raise BadState(f"LSP {lsp_id} is {lsp.state.value}")
            txn = ConfigTransaction()
            txn.stage(self.devices[lsp.head],
                      [(f"/mpls/lsp-heads/{lsp.id}", DELETE, None)])
            try:
                txn.commit_all()
            except Exception as exc:
                raise CommitFailed(str(exc), lsp=lsp_id) from exc
            self._undo_reservation(lsp)
            lsp.state = transition(lsp.state, ServiceState.DELETED)

    def get_lsp(self, lsp_id: str) -> Lsp:
        lsp = self._lsps.get(lsp_id)
        if lsp is None:
            raise UnknownLsp(lsp_id)
        return lsp

    def list_lsps(self) -> list[Lsp]:
        return [self._lsps[k] for k in sorted(self._lsps)]

    # -- VPNs -------------------------------------------------------------------

    def provision_vpn(self, kind: str, attachments: list[tuple[Identifier, str, int]],
                      requested_mbps: int = 0) -> VpnService:
        if kind not in ("L2VPN", "L3VPN"):
            raise ValueError(f"unknown VPN kind {kind!r}")
        if len(attachments) < 2:
            raise ValueError("a VPN needs at least 2 attachments")
        with self._lock:
            for pe, _, _ in attachments:
                if pe not in self.devices:
                    raise UnknownNode(pe.render())
            tag = self._allocate_tag(kind)
            name = f"vpn-{tag}"
            txn = ConfigTransaction()
            by_pe: dict[Identifier, list] = {}
            for pe, interface, vlan in attachments:
                by_pe.setdefault(pe, []).append((interface, vlan))
            try:
                for pe in sorted(by_pe):
                    edits = [(f"/vrfs/{name}/vpn_tag", SET, tag),
                             (f"/vrfs/{name}/kind", SET, kind)]
                    for interface, vlan in by_pe[pe]:
                        edits.append((f"/vrfs/{name}/interfaces/{interface}/vlan",
                                      SET, vlan))
                    txn.stage(self.devices[pe], edits)
                txn.commit_all()
            except Exception as exc:
                # tag derives from live records, so it is free again by itself
                raise CommitFailed(str(exc), vpn=name) from exc
            vpn = VpnService(self._next_id("vpn"), kind, list(attachments), tag)
            self._vpns[vpn.id] = vpn
            return vpn

    def _allocate_tag(self, kind: str) -> int:
        used = {v.vpn_tag for v in self._vpns.values() if v.kind == kind}
        lo, hi = self._vpn_tag_range
        for tag in range(lo, hi + 1):
            if tag not in used:
                return tag
        raise TagExhausted(f"no free {kind} tag in {lo}..{hi}")

    def list_vpns(self) -> list[VpnService]:
        return [self._vpns[k] for k in sorted(self._vpns)]

    # -- monitoring / augmentation ----------------------------------------------

    def get_domain_monitoring(self) -> list[dict]:
        with self._lock:
            report = []
            for link in self.view_links():
                dev = self.devices.get(link.endpoint_a.node)
                stale = dev is None or dev.offline
                tx = None
                if not stale:
                    tx = dev.state()["interfaces"].get(
                        link.endpoint_a.port, {}).get("tx_mbps")
                report.append({
                    "link": link.id.render(),
                    "capacity_mbps": link.te.capacity_mbps,
                    "unreserved_mbps": link.te.unreserved_mbps,
                    "reserved_mbps": self.reserved_on(link.id),
                    "tx_mbps": tx,
                    "stale": stale,
                })
            return report

    def register_augmented_link(self, local_name: str, a: PortRef, z: PortRef,
                                capacity_mbps: int, te_metric: int = 100,
                                backing: str | None = None) -> LinkRecord:
        """Add an ODU-backed IP link created by multi-layer coordination."""
        with self._lock:
            link_id = Identifier(self.domain, local_name)
            if link_id in self._declared or link_id in self._augmented:
                raise ValueError(f"link {link_id} already exists")
            record = LinkRecord(link_id, LayerTag.IP_L3, a, z,
                                TeAttributes(te_metric=te_metric,
                                             capacity_mbps=capacity_mbps,
                                             unreserved_mbps=capacity_mbps))
            self._augmented[link_id] = {"record": record, "flagged": False,
                                        "backing": backing}
            self._reservations[link_id] = {}
            return record

    def flag_augmented_link(self, link_id: Identifier, flagged: bool = True) -> None:
        self._augmented[link_id]["flagged"] = flagged

    def augmented_links(self) -> dict[str, dict]:
        return {lid.render(): {"flagged": aug["flagged"], "backing": aug["backing"]}
                for lid, aug in sorted(self._augmented.items())}

    def bottleneck_mbps(self) -> int:
        """Upper bound on any single unsplit flow through the domain."""
        links = self.view_links()
        return max((l.te.unreserved_mbps for l in links if l.te.oper_up), default=0)

    # -- audit -----------------------------------------------------------------

    def ledger_snapshot(self) -> dict:
        with self._lock:
            return {
                link_id.render(): {
                    "capacity_mbps": spec.te.capacity_mbps,
                    "reservations": dict(sorted(self._reservations[link_id].items())),
                }
                for link_id, spec in sorted(
                    (l.id, l) for l in self._link_specs())
            }

    def audit(self) -> list[str]:
        """Conservation check. ``unreserved`` is derived from the ledger, so
        the checks that can actually fail are overbooking and reservations
        orphaned from (or missing on) their LSPs."""
        problems = []
        with self._lock:
            live = {l.id for l in self._lsps.values()
                    if l.state in (ServiceState.RESERVED, ServiceState.ACTIVE)}
            for spec in self._link_specs():
                entries = self._reservations[spec.id]
                reserved = sum(entries.values())
                if not 0 <= reserved <= spec.te.capacity_mbps:
                    problems.append(
                        f"{spec.id}: reserved {reserved} outside "
                        f"[0, {spec.te.capacity_mbps}]")
                for owner, mbps in entries.items():
                    if mbps <= 0:
                        problems.append(f"{spec.id}: non-positive reservation {owner}")
                    if owner not in live:
                        problems.append(f"{spec.id}: residual reservation {owner}")
            for lsp in self._lsps.values():
                if lsp.state in (ServiceState.RESERVED, ServiceState.ACTIVE):
                    for link_id in lsp.ero:
                        if lsp.id not in self._reservations.get(link_id, {}):
                            problems.append(
                                f"{link_id}: missing reservation for {lsp.id}")
        return problems
