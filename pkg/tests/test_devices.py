import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifusion.devices import (CANDIDATE, DELETE, RUNNING, SET, ConfigTree, Device,
                             DeviceDescriptor, LegacyDevice, NotificationKind,
                             Technology, VendorProfile)
from ifusion.errors import (LockedByOther, SchemaViolation, SeqOutOfRange,
                            ValidationFailed)
from ifusion.model import Identifier


def ip_device(name="R1", ports=("ge0", "ge1")):
    return Device(DeviceDescriptor(Identifier("ip", name), Technology.IP), ports=ports)


def mw_device(name="M1", air=("air0",)):
    return Device(DeviceDescriptor(Identifier("mw", name), Technology.MW),
                  ports=air, air_interfaces=air)


def legacy_device(name="M3"):
    return LegacyDevice(DeviceDescriptor(Identifier("mw", name), Technology.MW,
                                         VendorProfile.LEGACY))


class TestConfigTree:
    def test_diff_orders_deletes_before_sets(self):
        old = ConfigTree({"/a/x": 1, "/b/y": 2})
        new = ConfigTree({"/b/y": 3, "/c/z": 4})
        assert old.diff(new) == [("/a/x", DELETE, None), ("/b/y", SET, 3),
                                 ("/c/z", SET, 4)]

    def test_subtree_delete(self):
        t = ConfigTree({"/a/x": 1, "/a/y": 2, "/b/z": 3})
        assert t.delete("/a") == 2
        assert t.leaves() == {"/b/z": 3}


class TestDatastore:
    def test_factory_default_is_empty_interfaces(self):
        dev = ip_device()
        assert dev.get_config(RUNNING).leaves() == {}

    def test_candidate_equals_running_on_session_open(self):
        dev = ip_device()
        with dev.open_session() as s:
            s.edit([("/interfaces/ge0/vlan", SET, 100)])
            s.commit()
        with dev.open_session() as s:
            assert s.candidate() == dev.get_config(RUNNING)

    def test_commit_moves_candidate_to_running(self):
        dev = ip_device()
        with dev.open_session() as s:
            s.edit([("/interfaces/ge0/vlan", SET, 100)])
            assert dev.get_config(RUNNING).get("/interfaces/ge0/vlan") is None
            s.commit()
        assert dev.get_config(RUNNING).get("/interfaces/ge0/vlan") == 100

    def test_snapshot_is_a_copy_not_a_live_view(self):
        dev = ip_device()
        snap = dev.get_config(RUNNING)
        with dev.open_session() as s:
            s.edit([("/interfaces/ge0/vlan", SET, 7)])
            s.commit()
        assert snap.get("/interfaces/ge0/vlan") is None

    def test_type_violation_rejects_whole_batch(self):
        dev = ip_device()
        with dev.open_session() as s:
            with pytest.raises(SchemaViolation):
                s.edit([("/interfaces/ge0/vlan", SET, "abc")])
            assert s.candidate() == dev.get_config(RUNNING)

    def test_batch_is_all_or_nothing(self):
        dev = ip_device()
        with dev.open_session() as s:
            before = s.candidate()
            with pytest.raises(SchemaViolation):
                s.edit([("/interfaces/ge0/vlan", SET, 1),
                        ("/bogus/path", SET, 2)])
            assert s.candidate() == before
            assert not s.candidate().has("/interfaces/ge0/vlan")

    def test_lock_excludes_second_session(self):
        dev = ip_device()
        with dev.open_session("a"):
            with pytest.raises(LockedByOther):
                dev.open_session("b")
        dev.open_session("b").close()

    def test_commit_ids_strictly_increase(self):
        dev = ip_device()
        ids = []
        for _ in range(3):
            with dev.open_session() as s:
                ids.append(s.commit())
        assert ids == sorted(set(ids))

    def test_empty_commit_emits_empty_diff(self):
        dev = ip_device()
        with dev.open_session() as s:
            s.commit()
        [event] = dev.event_log
        assert event.kind is NotificationKind.CONFIG_COMMITTED
        assert event.payload["diff"] == []

    def test_injected_commit_failure_leaves_running_unchanged(self):
        dev = ip_device()
        dev.inject_commit_failure()
        before = dev.get_config(RUNNING)
        with dev.open_session() as s:
            s.edit([("/interfaces/ge0/vlan", SET, 9)])
            with pytest.raises(ValidationFailed):
                s.commit()
        assert dev.get_config(RUNNING) == before

    def test_mandatory_mw_leaf_cannot_be_deleted(self):
        dev = mw_device()
        assert dev.get_config(RUNNING).get("/air-interfaces/air0/channel_bandwidth_mhz") == 28
        with dev.open_session() as s:
            with pytest.raises(SchemaViolation):
                s.edit([("/air-interfaces/air0/adaptive", DELETE, None)])


class TestNotifications:
    def test_subscriber_sees_exactly_one_commit_event(self):
        dev = ip_device()
        sub = dev.subscribe()
        with dev.open_session() as s:
            s.edit([("/interfaces/ge0/vlan", SET, 100)])
            s.commit()
        events = sub.drain()
        assert [e.kind for e in events] == [NotificationKind.CONFIG_COMMITTED]
        assert events[0].payload["diff"] == [
            {"path": "/interfaces/ge0/vlan", "op": SET, "value": 100}]

    def test_replay_from_seq_one(self):
        dev = ip_device()
        for _ in range(3):
            with dev.open_session() as s:
                s.commit()
        sub = dev.subscribe(from_seq=1)
        assert [e.seq for e in sub.drain()] == [1, 2, 3]
        assert sub.get(timeout=0.01) is None

    def test_two_subscribers_see_identical_sequences(self):
        dev = ip_device()
        s1, s2 = dev.subscribe(), dev.subscribe()
        for _ in range(4):
            with dev.open_session() as s:
                s.commit()
        assert [e.seq for e in s1.drain()] == [e.seq for e in s2.drain()]

    def test_from_seq_out_of_range(self):
        dev = ip_device()
        with pytest.raises(SeqOutOfRange):
            dev.subscribe(from_seq=5)
        with pytest.raises(SeqOutOfRange):
            dev.subscribe(from_seq=0)

    def test_replay_after_random_commits_equals_log(self):
        rng = random.Random(7)
        dev = ip_device()
        for i in range(100):
            with dev.open_session() as s:
                if rng.random() < 0.8:
                    s.edit([(f"/interfaces/ge{rng.randrange(2)}/vlan", SET,
                             rng.randrange(4095))])
                s.commit()
        sub = dev.subscribe(from_seq=1)
        replay = sub.drain()
        assert [e.seq for e in replay] == list(range(1, 101))
        assert replay == dev.event_log

    def test_link_events_on_oper_toggle(self):
        dev = ip_device()
        sub = dev.subscribe()
        dev.set_interface_oper("ge0", False)
        dev.set_interface_oper("ge0", False)  # idempotent, no event
        dev.set_interface_oper("ge0", True)
        kinds = [e.kind for e in sub.drain()]
        assert kinds == [NotificationKind.LINK_DOWN, NotificationKind.LINK_UP]


class TestAtomicCommitProperty:
    def test_running_equals_fold_of_successful_commits(self):
        rng = random.Random(21)
        dev = ip_device()
        expected = ConfigTree()
        for _ in range(200):
            with dev.open_session() as s:
                path = f"/interfaces/ge{rng.randrange(2)}/vlan"
                value = rng.randrange(4095)
                fail = rng.random() < 0.3
                s.edit([(path, SET, value)])
                if fail:
                    dev.inject_commit_failure()
                    with pytest.raises(ValidationFailed):
                        s.commit()
                else:
                    s.commit()
                    expected.set(path, value)
            assert dev.get_config(RUNNING) == expected


leaf_paths = st.sampled_from([
    "/interfaces/ge0/vlan", "/interfaces/ge0/bogus", "/nope/x",
    "/interfaces/ge1/admin_up", "/vrfs/v1/vpn_tag", "/mpls/lsp-heads/l1/bandwidth_mbps",
])
leaf_values = st.one_of(st.integers(-10, 70000), st.booleans(), st.text(max_size=5))


@settings(max_examples=120, deadline=None)
@given(st.lists(st.tuples(leaf_paths, leaf_values), min_size=1, max_size=4))
def test_schema_rejection_never_alters_candidate(edits):
    dev = ip_device()
    with dev.open_session() as s:
        before = s.candidate()
        try:
            s.edit([(p, SET, v) for p, v in edits])
        except SchemaViolation:
            assert s.candidate() == before


class TestLegacyDevice:
    def test_set_then_get(self):
        dev = legacy_device()
        assert dev.execute("SET RF-BW 56") == "OK"
        assert dev.execute("GET RF-BW") == "56"

    def test_show_all_includes_set_value(self):
        dev = legacy_device()
        assert dev.execute("SET MOD-MAX QAM256") == "OK"
        assert "MOD-MAX=QAM256" in dev.execute("SHOW ALL").splitlines()

    def test_value_outside_allowed_set(self):
        dev = legacy_device()
        assert dev.execute("SET RF-BW 13") == "ERR BAD_VALUE"
        assert dev.execute("GET RF-BW") == "28"

    def test_unknown_param_and_command(self):
        dev = legacy_device()
        assert dev.execute("SET XPIC ON") == "ERR UNKNOWN_PARAM"
        assert dev.execute("GET XPIC") == "ERR UNKNOWN_PARAM"
        assert dev.execute("REBOOT NOW") == "ERR UNKNOWN_COMMAND"
        assert dev.execute("SHOW SOME") == "ERR UNKNOWN_COMMAND"

    def test_sets_are_immediate_no_candidate_behavior(self):
        dev = legacy_device()
        dev.execute("SET TX-PWR 30")
        assert dev.execute("GET TX-PWR") == "30"

    def test_tx_power_range(self):
        dev = legacy_device()
        assert dev.execute("SET TX-PWR 35") == "OK"
        assert dev.execute("SET TX-PWR 36") == "ERR BAD_VALUE"
        assert dev.execute("SET TX-PWR -10") == "OK"
        assert dev.execute("SET TX-PWR -11") == "ERR BAD_VALUE"

    def test_show_all_is_sorted_param_equals_value(self):
        dev = legacy_device()
        lines = dev.execute("SHOW ALL").splitlines()
        assert lines == sorted(lines)
        assert all("=" in line for line in lines)
