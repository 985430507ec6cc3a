import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifusion.errors import ValidationFailed
from ifusion.model import (Identifier, LayerTag, LinkRecord, NodeRecord, PortRef,
                           ServiceIntent, ServiceState, TeAttributes, Technology,
                           TopologyGraph, can_transition, canonical_serialize,
                           deserialize_topology, transition, validate_topology)


def mk_node(name, tech=Technology.IP, ports=("p1", "p2")):
    return NodeRecord(Identifier("ip", name), tech, tuple(ports))


def mk_link(name, a, b, pa="p1", pb="p2", layer=LayerTag.IP_L3, **te):
    return LinkRecord(
        Identifier("ip", name), layer,
        PortRef(Identifier("ip", a), pa), PortRef(Identifier("ip", b), pb),
        te=TeAttributes(**te) if te else TeAttributes(te_metric=1, capacity_mbps=100,
                                                      unreserved_mbps=100),
    )


class TestIdentifier:
    def test_render_and_parse(self):
        ident = Identifier("ip", "R1")
        assert ident.render() == "ip/R1"
        assert Identifier.parse("ip/R1") == ident

    def test_ordering_is_bytewise_on_rendered_form(self):
        ids = [Identifier("ip", "R10"), Identifier("ip", "R2"), Identifier("g", "z")]
        assert [i.render() for i in sorted(ids)] == sorted(i.render() for i in ids)

    def test_empty_parts_rejected(self):
        with pytest.raises(ValueError):
            Identifier("", "x")
        with pytest.raises(ValueError):
            Identifier("d", "")

    def test_portref_round_trip(self):
        ref = PortRef(Identifier("mw", "M3"), "eth0")
        assert ref.render() == "mw/M3:eth0"
        assert PortRef.parse("mw/M3:eth0") == ref


class TestServiceState:
    LEGAL = {
        (ServiceState.PLANNED, ServiceState.RESERVED),
        (ServiceState.RESERVED, ServiceState.ACTIVE),
        (ServiceState.PLANNED, ServiceState.FAILED),
        (ServiceState.RESERVED, ServiceState.FAILED),
        (ServiceState.ACTIVE, ServiceState.DELETED),
        (ServiceState.FAILED, ServiceState.DELETED),
    }

    def test_full_5x5_matrix(self):
        for a, b in itertools.product(ServiceState, ServiceState):
            assert can_transition(a, b) == ((a, b) in self.LEGAL)

    def test_transition_raises_on_illegal_edge(self):
        assert transition(ServiceState.PLANNED, ServiceState.RESERVED) is ServiceState.RESERVED
        with pytest.raises(ValueError):
            transition(ServiceState.ACTIVE, ServiceState.PLANNED)


class TestValidateTopology:
    def test_empty_graph_is_vacuously_valid(self):
        assert validate_topology(TopologyGraph()) == []

    def test_dangling_endpoint_reported(self):
        g = TopologyGraph()
        g.add_node(mk_node("R1"))
        g.add_link(mk_link("L99", "R1", "R9"))
        codes = [v.code for v in validate_topology(g)]
        assert codes == ["DANGLING_ENDPOINT"]
        assert validate_topology(g)[0].subject == "ip/L99"

    def test_undeclared_port_is_dangling(self):
        g = TopologyGraph()
        g.add_node(mk_node("R1", ports=("p1",)))
        g.add_node(mk_node("R2", ports=("p1",)))
        g.add_link(mk_link("L1", "R1", "R2", pa="p1", pb="ge9"))
        assert [v.code for v in validate_topology(g)] == ["DANGLING_ENDPOINT"]

    def test_unreserved_above_capacity_reported(self):
        g = TopologyGraph()
        g.add_node(mk_node("R1"))
        g.add_node(mk_node("R2"))
        g.add_link(mk_link("L1", "R1", "R2", te_metric=1, capacity_mbps=10,
                           unreserved_mbps=20))
        assert [v.code for v in validate_topology(g)] == ["UNRESERVED_EXCEEDS_CAPACITY"]

    def test_port_reuse_within_layer_reported(self):
        g = TopologyGraph()
        for n in ("R1", "R2", "R3"):
            g.add_node(mk_node(n))
        g.add_link(mk_link("L1", "R1", "R2"))
        g.add_link(mk_link("L2", "R1", "R3", pa="p1", pb="p1"))
        assert "PORT_REUSED" in [v.code for v in validate_topology(g)]

    def test_same_port_on_different_layers_allowed(self):
        g = TopologyGraph()
        g.add_node(mk_node("R1"))
        g.add_node(mk_node("R2"))
        g.add_link(mk_link("L1", "R1", "R2", layer=LayerTag.IP_L3))
        g.add_link(mk_link("L2", "R1", "R2", layer=LayerTag.ETH_L2))
        assert validate_topology(g) == []


class TestCanonicalSerialization:
    def build(self, order):
        g = TopologyGraph()
        nodes = {n: mk_node(n) for n in ("R1", "R2", "R3")}
        links = {
            "L1": mk_link("L1", "R1", "R2", pa="p1", pb="p1"),
            "L2": mk_link("L2", "R2", "R3", pa="p2", pb="p1"),
        }
        for name in order["nodes"]:
            g.add_node(nodes[name])
        for name in order["links"]:
            g.add_link(links[name])
        return g

    def test_insertion_order_does_not_matter(self):
        a = self.build({"nodes": ["R1", "R2", "R3"], "links": ["L1", "L2"]})
        b = self.build({"nodes": ["R3", "R1", "R2"], "links": ["L2", "L1"]})
        assert canonical_serialize(a) == canonical_serialize(b)

    def test_round_trip_identity(self):
        g = self.build({"nodes": ["R1", "R2", "R3"], "links": ["L1", "L2"]})
        blob = canonical_serialize(g)
        assert canonical_serialize(deserialize_topology(blob)) == blob

    def test_invalid_graph_rejected_with_report(self):
        g = TopologyGraph()
        g.add_node(mk_node("R1"))
        g.add_link(mk_link("L1", "R1", "R9"))
        with pytest.raises(ValidationFailed) as exc:
            canonical_serialize(g)
        assert exc.value.context["report"]

    def test_duplicate_ids_rejected_on_deserialize(self):
        g = self.build({"nodes": ["R1", "R2", "R3"], "links": ["L1", "L2"]})
        raw = canonical_serialize(g).decode()
        import json
        doc = json.loads(raw)
        doc["nodes"].append(doc["nodes"][0])
        with pytest.raises(ValidationFailed):
            deserialize_topology(json.dumps(doc))


names = st.sampled_from(["R1", "R2", "R3", "R4", "R5"])


@st.composite
def graphs(draw):
    node_names = draw(st.sets(names, min_size=2, max_size=5))
    g = TopologyGraph()
    port_pool = [f"p{i}" for i in range(8)]
    for n in sorted(node_names):
        g.add_node(mk_node(n, ports=tuple(port_pool)))
    free = {n: list(port_pool) for n in node_names}
    n_links = draw(st.integers(min_value=0, max_value=4))
    for i in range(n_links):
        pair = draw(st.permutations(sorted(node_names)))[:2]
        a, b = pair
        if not free[a] or not free[b]:
            continue
        cap = draw(st.integers(min_value=0, max_value=1000))
        g.add_link(LinkRecord(
            Identifier("ip", f"L{i}"), LayerTag.IP_L3,
            PortRef(Identifier("ip", a), free[a].pop()),
            PortRef(Identifier("ip", b), free[b].pop()),
            te=TeAttributes(te_metric=draw(st.integers(1, 50)), capacity_mbps=cap,
                            unreserved_mbps=draw(st.integers(0, cap))),
        ))
    return g


@settings(max_examples=60, deadline=None)
@given(graphs(), graphs())
def test_serialize_injective_up_to_graph_equality(g1, g2):
    b1, b2 = canonical_serialize(g1), canonical_serialize(g2)
    assert (b1 == b2) == (g1 == g2)


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_serialize_round_trips_losslessly(g):
    assert deserialize_topology(canonical_serialize(g)) == g


def test_intent_validation():
    a = PortRef(Identifier("ip", "R1"), "ge0")
    z = PortRef(Identifier("ip", "R4"), "ge0")
    ServiceIntent(a, z, 100).validate()
    with pytest.raises(ValueError):
        ServiceIntent(a, z, 0).validate()
    with pytest.raises(ValueError):
        ServiceIntent(a, a, 10).validate()
    ServiceIntent(a, a, 10).validate(allow_loopback=True)
