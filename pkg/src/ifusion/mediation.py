"""Standard-model adapter for legacy devices.

The mediator synthesizes candidate/commit semantics over a candidate-less
proprietary box: edits are staged in a shadow tree, a commit emits the
minimal legacy command sequence, and failures are compensated by
re-setting prior values. Controllers talk to a ``MediatedDevice`` facade
that behaves exactly like a NATIVE device.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from importlib import resources

from .devices import (CANDIDATE, DELETE, RUNNING, SET, ConfigTree, DeviceSchema,
                      InterfaceState, LegacyDevice, NotificationEvent,
                      NotificationKind, SeqOutOfRange, Subscription, load_schema)
from .errors import (CompensationFailed, LegacyRejected, LockedByOther,
                     SchemaViolation, UnmappedParam, UnmappedPath,
                     ValidationFailed)
from .model import Identifier, Technology


class ValueMap:
    """Bijection between standard leaf values and legacy tokens."""

    def __init__(self, kind: str, pairs=None, min=None, max=None):
        self.kind = kind
        if kind == "table":
            self._fwd = {}
            self._rev = {}
            for std, token in pairs:
                std = tuple(std) if isinstance(std, list) else std
                if std in self._fwd or token in self._rev:
                    raise ValueError("value_map is not bijective")
                self._fwd[std] = token
                self._rev[token] = std
        elif kind == "int":
            self.min, self.max = min, max
        else:
            raise ValueError(f"unknown value_map kind {kind!r}")

    def to_legacy(self, value) -> str:
        if self.kind == "table":
            if value not in self._fwd:
                raise ValueError(f"{value!r} outside mapped domain")
            return self._fwd[value]
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"{value!r} is not an int")
        return str(value)

    def to_standard(self, token: str):
        if self.kind == "table":
            if token not in self._rev:
                raise ValueError(f"legacy token {token!r} outside mapped domain")
            return self._rev[token]
        return int(token)


@dataclass(frozen=True)
class MappingRule:
    standard_path: str     # schema path pattern, e.g. /air-interfaces/*/adaptive
    legacy_param: str
    value_map: ValueMap

    def matches(self, path: str) -> bool:
        psegs = self.standard_path.split("/")[1:]
        segs = ConfigTree.normalize(path).split("/")[1:]
        return len(psegs) == len(segs) and all(
            ps == "*" or ps == s for ps, s in zip(psegs, segs))


class RuleSet:
    def __init__(self, profile: str, technology: Technology, rules: list[MappingRule]):
        self.profile = profile
        self.technology = technology
        self.rules = list(rules)
        by_path = {}
        by_param = {}
        for rule in rules:
            if rule.standard_path in by_path:
                raise ValueError(f"path {rule.standard_path} mapped by more than one rule")
            if rule.legacy_param in by_param:
                raise ValueError(f"param {rule.legacy_param} mapped by more than one rule")
            by_path[rule.standard_path] = rule
            by_param[rule.legacy_param] = rule
        self._by_param = by_param

    def rule_for_path(self, path: str) -> MappingRule | None:
        for rule in self.rules:
            if rule.matches(path):
                return rule
        return None

    def rule_for_param(self, param: str) -> MappingRule | None:
        return self._by_param.get(param)


def load_rule_set(name: str = "legacy_mw") -> RuleSet:
    raw = json.loads(resources.files("ifusion.mediation_rules")
                     .joinpath(f"{name}.json").read_text())
    rules = [MappingRule(r["standard_path"], r["legacy_param"], ValueMap(**r["value_map"]))
             for r in raw["rules"]]
    return RuleSet(raw["profile"], Technology(raw["technology"]), rules)


class MediatedSession:
    """Shadow candidate over one legacy device."""

    def __init__(self, mediator: "Mediator", client: str):
        self.mediator = mediator
        self.client = client
        self.shadow_candidate = mediator.mediate_read()
        self.closed = False

    def edit(self, edits) -> None:
        self.mediator.mediate_edit(self, edits)

    def commit(self) -> int:
        return self.mediator.mediate_commit(self)

    def discard(self) -> None:
        self.shadow_candidate = self.mediator.mediate_read()

    def candidate(self) -> ConfigTree:
        return self.shadow_candidate.copy()

    def close(self) -> None:
        self.mediator._close_session(self)

    def __enter__(self) -> "MediatedSession":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


class Mediator:
    """Maps standard-model operations onto one legacy device.

    Onboarding requires total coverage in both directions: every legacy
    parameter readable into the standard model, every standard air-interface
    leaf writable onto the device.
    """

    def __init__(self, device: LegacyDevice, rules: RuleSet | None = None,
                 interface: str = "air0", schema: DeviceSchema | None = None):
        self.device = device
        self.rules = rules or load_rule_set()
        self.interface = interface
        self.schema = schema or load_schema(device.descriptor.technology)
        self._lock = threading.RLock()
        self._session: MediatedSession | None = None
        self._commit_id = 0
        self._commit_failures = 0
        self._seq = 0
        self._event_log: list[NotificationEvent] = []
        self._subscriptions: list[Subscription] = []
        self._check_coverage()

    def _check_coverage(self) -> None:
        for param in self.device.specs:
            if self.rules.rule_for_param(param) is None:
                raise UnmappedParam(f"legacy param {param} not covered by rule set "
                                    f"{self.rules.profile}", param=param)
        for leaf in self.schema.mandatory_under("/air-interfaces/*"):
            path = f"/air-interfaces/{self.interface}/{leaf}"
            if self.rules.rule_for_path(path) is None:
                raise UnmappedPath(f"standard path {path} not covered", path=path)

    # -- read direction ---------------------------------------------------

    def mediate_read(self) -> ConfigTree:
        """SHOW ALL mapped through inverse value maps into a standard tree."""
        reply = self.device.execute("SHOW ALL")
        tree = ConfigTree()
        for line in reply.splitlines():
            param, _, token = line.partition("=")
            rule = self.rules.rule_for_param(param)
            if rule is None:
                raise UnmappedParam(f"legacy param {param} has no mapping rule", param=param)
            leaf = rule.standard_path.rsplit("/", 1)[1]
            tree.set(f"/air-interfaces/{self.interface}/{leaf}",
                     rule.value_map.to_standard(token))
        return tree

    # -- write direction ----------------------------------------------------

    def open_session(self, client: str = "controller") -> MediatedSession:
        with self._lock:
            if self._session is not None:
                raise LockedByOther(f"device {self.device.id} locked by "
                                    f"{self._session.client}", holder=self._session.client)
            self._session = MediatedSession(self, client)
            return self._session

    def _require_session(self, session: MediatedSession) -> None:
        if session.closed or self._session is not session:
            raise LockedByOther("not the active mediated session")

    def mediate_edit(self, session: MediatedSession, edits) -> None:
        with self._lock:
            self._require_session(session)
            for path, op, value in edits:
                if self.rules.rule_for_path(path) is None:
                    raise UnmappedPath(f"{path} has no mapping rule", path=path)
                spec = self.schema.match(path)
                if op == SET:
                    complaint = spec.check(value) if spec else "path not in schema"
                    if complaint:
                        raise SchemaViolation(f"{path}: {complaint}", path=path)
                elif op == DELETE:
                    if spec and spec.mandatory:
                        raise SchemaViolation(f"{path}: mandatory leaf cannot be deleted",
                                              path=path)
                else:
                    raise SchemaViolation(f"unknown edit op {op!r}")
            scratch = session.shadow_candidate.copy()
            for path, op, value in edits:
                if op == SET:
                    scratch.set(path, value)
                else:
                    if scratch.delete(path) == 0:
                        raise SchemaViolation(f"{path}: delete of absent path", path=path)
            session.shadow_candidate = scratch

    def mediate_commit(self, session: MediatedSession) -> int:
        with self._lock:
            self._require_session(session)
            if self._commit_failures > 0:
                self._commit_failures -= 1
                raise ValidationFailed("injected commit failure",
                                       device=self.device.id.render())
            current = self.mediate_read()
            diff = current.diff(session.shadow_candidate)
            prior = {p: v for p, v in current.leaves().items()}
            applied: list[str] = []
            for path, op, value in diff:
                if op != SET:
                    # Flat always-present param stores have nothing to delete;
                    # deletes are rejected at edit time by the mandatory rule.
                    raise SchemaViolation(f"{path}: legacy store cannot delete")
                rule = self.rules.rule_for_path(path)
                command = f"SET {rule.legacy_param} {rule.value_map.to_legacy(value)}"
                reply = self.device.execute(command)
                if reply != "OK":
                    self._compensate(applied, prior)
                    raise LegacyRejected(f"{command} -> {reply}", command=command,
                                         reply=reply)
                applied.append(path)
            self._commit_id += 1
            self._emit(NotificationKind.CONFIG_COMMITTED, {
                "commit_id": self._commit_id,
                "diff": [{"path": p, "op": op, "value": v} for p, op, v in diff],
            })
            return self._commit_id

    def _compensate(self, applied_paths: list[str], prior: dict[str, object]) -> None:
        for path in reversed(applied_paths):
            rule = self.rules.rule_for_path(path)
            token = rule.value_map.to_legacy(prior[path])
            reply = self.device.execute(f"SET {rule.legacy_param} {token}")
            if reply != "OK":
                raise CompensationFailed(
                    f"could not restore {rule.legacy_param} to {token}: {reply}",
                    device=self.device.id.render())

    def _close_session(self, session: MediatedSession) -> None:
        with self._lock:
            if session.closed:
                return
            session.closed = True
            if self._session is session:
                self._session = None

    # -- synthetic notifications ------------------------------------------

    def _emit(self, kind: NotificationKind, payload: dict) -> None:
        self._seq += 1
        event = NotificationEvent(self.device.id, self._seq, kind, payload)
        self._event_log.append(event)
        for sub in self._subscriptions:
            sub._push(event)

    def subscribe(self, from_seq: int = 1) -> Subscription:
        with self._lock:
            if not 1 <= from_seq <= self._seq + 1:
                raise SeqOutOfRange(f"from_seq {from_seq} outside 1..{self._seq + 1}")
            sub = Subscription()
            for event in self._event_log:
                if event.seq >= from_seq:
                    sub._push(event)
            self._subscriptions.append(sub)
            return sub

    def inject_commit_failure(self, count: int = 1) -> None:
        with self._lock:
            self._commit_failures += count


class MediatedDevice:
    """Device-shaped facade over (legacy device + mediator).

    Controllers use this exactly like a NATIVE ``Device``: sessions,
    get_config, subscriptions, oper state, fault hooks.
    """

    def __init__(self, device: LegacyDevice, rules: RuleSet | None = None,
                 interface: str = "air0", ports: tuple[str, ...] = ()):
        self.mediator = Mediator(device, rules, interface)
        self.legacy = device
        self.descriptor = device.descriptor
        self.schema = self.mediator.schema
        self.ports = tuple(ports) or (interface,)
        self.air_interfaces = (interface,)
        self.clock = device.clock
        self._boot_tick = device.clock.now
        self._interfaces = {p: InterfaceState() for p in self.ports}
        self._lock = threading.RLock()

    @property
    def id(self) -> Identifier:
        return self.descriptor.id

    @property
    def offline(self) -> bool:
        return self.legacy.offline

    @offline.setter
    def offline(self, value: bool) -> None:
        self.legacy.offline = value

    def open_session(self, client: str = "controller") -> MediatedSession:
        return self.mediator.open_session(client)

    def get_config(self, store: str = RUNNING) -> ConfigTree:
        if store == RUNNING:
            return self.mediator.mediate_read()
        if store == CANDIDATE:
            session = self.mediator._session
            if session is not None:
                return session.shadow_candidate.copy()
            return self.mediator.mediate_read()
        raise ValueError(f"unknown datastore {store!r}")

    def subscribe(self, from_seq: int = 1) -> Subscription:
        return self.mediator.subscribe(from_seq)

    @property
    def event_log(self) -> list[NotificationEvent]:
        return list(self.mediator._event_log)

    def uptime_ticks(self) -> int:
        return self.clock.now - self._boot_tick

    def state(self) -> dict:
        with self._lock:
            return {
                "uptime_ticks": self.uptime_ticks(),
                "interfaces": {
                    name: {"tx_mbps": st.tx_mbps, "rx_mbps": st.rx_mbps,
                           "oper_up": st.oper_up}
                    for name, st in sorted(self._interfaces.items())
                },
            }

    def set_counters(self, interface: str, tx_mbps: int, rx_mbps: int) -> None:
        with self._lock:
            st = self._interfaces[interface]
            st.tx_mbps, st.rx_mbps = tx_mbps, rx_mbps

    def set_interface_oper(self, interface: str, up: bool) -> None:
        with self._lock:
            st = self._interfaces[interface]
            if st.oper_up == up:
                return
            st.oper_up = up
            kind = NotificationKind.LINK_UP if up else NotificationKind.LINK_DOWN
            self.mediator._emit(kind, {"interface": interface, "oper_up": up})

    def interface_oper_up(self, interface: str) -> bool:
        with self._lock:
            return self._interfaces[interface].oper_up

    def inject_commit_failure(self, count: int = 1) -> None:
        self.mediator.inject_commit_failure(count)

    def emit_modulation_change(self, interface: str, modulation: int) -> None:
        self.mediator._emit(NotificationKind.MODULATION_CHANGE,
                            {"interface": interface, "modulation": modulation})
