"""Shared domain vocabulary: identifiers, layers, topology graphs, TE
attributes, service intents and lifecycle states.

All types here are plain values. Nothing in this module mutates shared
state, so instances are safe to pass between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ValidationFailed


@dataclass(frozen=True, order=True)
class Identifier:
    """Globally unique name, rendered ``domain/local``.

    Ordering is byte-wise on the rendered form, which makes every sort
    in the system deterministic.
    """

    domain: str
    local: str

    def __post_init__(self):
        if not self.domain or not self.local:
            raise ValueError("identifier parts must be non-empty")
        if "/" in self.domain:
            raise ValueError("domain part must not contain '/'")

    def render(self) -> str:
        return f"{self.domain}/{self.local}"

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "Identifier":
        domain, sep, local = text.partition("/")
        if not sep:
            raise ValueError(f"identifier {text!r} lacks a domain part")
        return cls(domain, local)


@dataclass(frozen=True, order=True)
class PortRef:
    """A port on a node, rendered ``domain/node:port``."""

    node: Identifier
    port: str

    def __post_init__(self):
        if not self.port:
            raise ValueError("port name must be non-empty")

    def render(self) -> str:
        return f"{self.node.render()}:{self.port}"

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "PortRef":
        node, sep, port = text.rpartition(":")
        if not sep:
            raise ValueError(f"port ref {text!r} lacks a ':port' part")
        return cls(Identifier.parse(node), port)


class LayerTag(Enum):
    ETH_L2 = "ETH_L2"
    IP_L3 = "IP_L3"
    MPLS = "MPLS"
    ODU = "ODU"
    OCH = "OCH"
    PHOT_MEDIA = "PHOT_MEDIA"
    MW_AIR = "MW_AIR"


class Technology(Enum):
    IP = "IP"
    OPTICAL = "OPTICAL"
    MW = "MW"


@dataclass(frozen=True)
class TeAttributes:
    """Traffic-engineering attributes of a link.

    Bandwidth accounting is integer Mbps so conservation checks stay
    exact: 0 <= unreserved_mbps <= capacity_mbps, te_metric >= 1.
    """

    te_metric: int = 1
    capacity_mbps: int = 0
    unreserved_mbps: int = 0
    admin_up: bool = True
    oper_up: bool = True

    def violations(self, subject: str) -> list["Violation"]:
        out = []
        if self.te_metric < 1:
            out.append(Violation("BAD_TE_METRIC", subject, f"te_metric {self.te_metric} < 1"))
        if self.capacity_mbps < 0:
            out.append(Violation("BAD_CAPACITY", subject, f"capacity {self.capacity_mbps} < 0"))
        if not 0 <= self.unreserved_mbps <= self.capacity_mbps:
            out.append(Violation(
                "UNRESERVED_EXCEEDS_CAPACITY", subject,
                f"unreserved {self.unreserved_mbps} outside [0, {self.capacity_mbps}]"))
        return out

    def to_dict(self) -> dict:
        return {
            "te_metric": self.te_metric,
            "capacity_mbps": self.capacity_mbps,
            "unreserved_mbps": self.unreserved_mbps,
            "admin_up": self.admin_up,
            "oper_up": self.oper_up,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TeAttributes":
        return cls(
            te_metric=int(d.get("te_metric", 1)),
            capacity_mbps=int(d.get("capacity_mbps", 0)),
            unreserved_mbps=int(d.get("unreserved_mbps", d.get("capacity_mbps", 0))),
            admin_up=bool(d.get("admin_up", True)),
            oper_up=bool(d.get("oper_up", True)),
        )


@dataclass(frozen=True)
class NodeRecord:
    id: Identifier
    technology: Technology
    ports: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id.render(),
            "technology": self.technology.value,
            "ports": sorted(self.ports),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NodeRecord":
        return cls(
            id=Identifier.parse(d["id"]),
            technology=Technology(d["technology"]),
            ports=tuple(d.get("ports", ())),
        )


@dataclass(frozen=True)
class LinkRecord:
    id: Identifier
    layer: LayerTag
    endpoint_a: PortRef
    endpoint_z: PortRef
    te: TeAttributes = field(default_factory=TeAttributes)
    bidirectional: bool = True

    def endpoints(self) -> tuple[PortRef, PortRef]:
        return (self.endpoint_a, self.endpoint_z)

    def nodes(self) -> tuple[Identifier, Identifier]:
        return (self.endpoint_a.node, self.endpoint_z.node)

    def other_node(self, node: Identifier) -> Identifier:
        a, z = self.nodes()
        return z if node == a else a

    def to_dict(self) -> dict:
        return {
            "id": self.id.render(),
            "layer": self.layer.value,
            "a": self.endpoint_a.render(),
            "z": self.endpoint_z.render(),
            "bidirectional": self.bidirectional,
            "te": self.te.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinkRecord":
        return cls(
            id=Identifier.parse(d["id"]),
            layer=LayerTag(d["layer"]),
            endpoint_a=PortRef.parse(d["a"]),
            endpoint_z=PortRef.parse(d["z"]),
            te=TeAttributes.from_dict(d.get("te", {})),
            bidirectional=bool(d.get("bidirectional", True)),
        )


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by the validator. Data, not an error."""

    code: str
    subject: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"code": self.code, "subject": self.subject, "detail": self.detail}


class TopologyGraph:
    """Multi-layer graph of nodes, ports and links.

    Construction is permissive (a link may reference a missing port so the
    validator has something to report); ``validate_topology`` is the gate.
    """

    def __init__(self):
        self._nodes: dict[Identifier, NodeRecord] = {}
        self._links: dict[Identifier, LinkRecord] = {}

    # construction

    def add_node(self, node: NodeRecord) -> None:
        if node.id in self._nodes:
            raise ValueError(f"node {node.id} already present")
        self._nodes[node.id] = node

    def add_link(self, link: LinkRecord) -> None:
        if link.id in self._links:
            raise ValueError(f"link {link.id} already present")
        self._links[link.id] = link

    def remove_link(self, link_id: Identifier) -> None:
        del self._links[link_id]

    def replace_link(self, link: LinkRecord) -> None:
        if link.id not in self._links:
            raise KeyError(f"link {link.id} not present")
        self._links[link.id] = link

    def update_te(self, link_id: Identifier, **changes) -> None:
        link = self._links[link_id]
        self._links[link_id] = replace(link, te=replace(link.te, **changes))

    # access

    @property
    def nodes(self) -> list[NodeRecord]:
        return sorted(self._nodes.values(), key=lambda n: n.id)

    @property
    def links(self) -> list[LinkRecord]:
        return sorted(self._links.values(), key=lambda l: l.id)

    def node(self, node_id: Identifier) -> NodeRecord:
        return self._nodes[node_id]

    def has_node(self, node_id: Identifier) -> bool:
        return node_id in self._nodes

    def link(self, link_id: Identifier) -> LinkRecord:
        return self._links[link_id]

    def has_link(self, link_id: Identifier) -> bool:
        return link_id in self._links

    def links_at(self, node_id: Identifier) -> list[LinkRecord]:
        return [l for l in self.links if node_id in l.nodes()]

    def copy(self) -> "TopologyGraph":
        g = TopologyGraph()
        g._nodes = dict(self._nodes)
        g._links = dict(self._links)
        return g

    def __eq__(self, other) -> bool:
        if not isinstance(other, TopologyGraph):
            return NotImplemented
        return self._nodes == other._nodes and self._links == other._links

    def to_dict(self) -> dict:
        return {
            "nodes": [n.to_dict() for n in self.nodes],
            "links": [l.to_dict() for l in self.links],
        }


class ServiceState(Enum):
    PLANNED = "PLANNED"
    RESERVED = "RESERVED"
    ACTIVE = "ACTIVE"
    FAILED = "FAILED"
    DELETED = "DELETED"


_LEGAL_TRANSITIONS = {
    (ServiceState.PLANNED, ServiceState.RESERVED),
    (ServiceState.RESERVED, ServiceState.ACTIVE),
    (ServiceState.PLANNED, ServiceState.FAILED),
    (ServiceState.RESERVED, ServiceState.FAILED),
    (ServiceState.ACTIVE, ServiceState.DELETED),
    (ServiceState.FAILED, ServiceState.DELETED),
}


def can_transition(a: ServiceState, b: ServiceState) -> bool:
    return (a, b) in _LEGAL_TRANSITIONS


def transition(current: ServiceState, target: ServiceState) -> ServiceState:
    """Return ``target`` if the edge is legal, else raise ValueError."""
    if not can_transition(current, target):
        raise ValueError(f"illegal service state transition {current.value} -> {target.value}")
    return target


@dataclass(frozen=True)
class ServiceIntent:
    """Technology-agnostic service request."""

    endpoint_a: PortRef
    endpoint_z: PortRef
    requested_mbps: int
    layer_hint: LayerTag | None = None
    excludes: frozenset[Identifier] = frozenset()
    diversity_group: str | None = None

    def validate(self, allow_loopback: bool = False) -> None:
        if self.requested_mbps <= 0:
            raise ValueError("requested_mbps must be > 0")
        if not allow_loopback and self.endpoint_a == self.endpoint_z:
            raise ValueError("intent endpoints must be distinct")

    def to_dict(self) -> dict:
        return {
            "a": self.endpoint_a.render(),
            "z": self.endpoint_z.render(),
            "requested_mbps": self.requested_mbps,
            "layer_hint": self.layer_hint.value if self.layer_hint else None,
            "excludes": sorted(e.render() for e in self.excludes),
            "diversity_group": self.diversity_group,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ServiceIntent":
        return cls(
            endpoint_a=PortRef.parse(d["a"]),
            endpoint_z=PortRef.parse(d["z"]),
            requested_mbps=int(d["requested_mbps"]),
            layer_hint=LayerTag(d["layer_hint"]) if d.get("layer_hint") else None,
            excludes=frozenset(Identifier.parse(e) for e in d.get("excludes", ())),
            diversity_group=d.get("diversity_group"),
        )


# -- validation and canonical serialization ----------------------------------

def validate_topology(graph: TopologyGraph) -> list[Violation]:
    """Return every invariant violation; empty list iff the graph is valid."""
    violations: list[Violation] = []
    for link in graph.links:
        subject = link.id.render()
        for ref in link.endpoints():
            if not graph.has_node(ref.node):
                violations.append(Violation("DANGLING_ENDPOINT", subject,
                                            f"node {ref.node} not in graph"))
            elif ref.port not in graph.node(ref.node).ports:
                violations.append(Violation("DANGLING_ENDPOINT", subject,
                                            f"port {ref} not declared on node"))
        violations.extend(link.te.violations(subject))
    seen: dict[tuple[PortRef, LayerTag], Identifier] = {}
    for link in graph.links:
        for ref in link.endpoints():
            key = (ref, link.layer)
            if key in seen and seen[key] != link.id:
                violations.append(Violation(
                    "PORT_REUSED", link.id.render(),
                    f"port {ref} already used by {seen[key]} at layer {link.layer.value}"))
            else:
                seen[key] = link.id
    return violations


def canonical_bytes(obj) -> bytes:
    """Canonical JSON encoding: sorted keys, no whitespace, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def canonical_serialize(graph: TopologyGraph) -> bytes:
    """Serialize a valid graph deterministically (sorted by rendered id).

    Equal graphs serialize byte-identically; invalid graphs are rejected
    with their validation report.
    """
    report = validate_topology(graph)
    if report:
        raise ValidationFailed("topology invalid",
                               report=[v.to_dict() for v in report])
    return canonical_bytes(graph.to_dict())


def deserialize_topology(data: bytes | str) -> TopologyGraph:
    """Inverse of canonical_serialize. Duplicate ids are reported as
    validation failures, not silently collapsed."""
    raw = json.loads(data)
    graph = TopologyGraph()
    report: list[Violation] = []
    for nd in raw.get("nodes", ()):
        node = NodeRecord.from_dict(nd)
        if graph.has_node(node.id):
            report.append(Violation("DUPLICATE_ID", node.id.render(), "duplicate node id"))
        else:
            graph.add_node(node)
    for ld in raw.get("links", ()):
        link = LinkRecord.from_dict(ld)
        if graph.has_link(link.id):
            report.append(Violation("DUPLICATE_ID", link.id.render(), "duplicate link id"))
        else:
            graph.add_link(link)
    if report:
        raise ValidationFailed("duplicate identifiers",
                               report=[v.to_dict() for v in report])
    return graph
