"""Simulated network elements.

Every NATIVE device exposes a datastore interface: a running and a
candidate configuration tree, exclusive session locking, batch edits
validated against a per-technology schema, atomic commit, and ordered
notifications. LEGACY devices expose only a flat parameter store driven
by a fixed proprietary command grammar; the mediation layer adapts them.

Each device serializes its own requests behind one lock (the mailbox
contract); distinct devices are fully independent.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .errors import (BadValue, LockedByOther, SchemaViolation, SeqOutOfRange,
                     UnknownCommand, UnknownParam, ValidationFailed)
from .model import Identifier, Technology

SET = "SET"
DELETE = "DELETE"

RUNNING = "RUNNING"
CANDIDATE = "CANDIDATE"


class VendorProfile(Enum):
    NATIVE = "NATIVE"
    LEGACY = "LEGACY"


@dataclass(frozen=True)
class DeviceDescriptor:
    id: Identifier
    technology: Technology
    vendor_profile: VendorProfile = VendorProfile.NATIVE
    model_version: str = "sim-1.0"

    def __post_init__(self):
        if self.vendor_profile is VendorProfile.LEGACY and \
                self.technology not in (Technology.MW, Technology.IP):
            raise ValueError("LEGACY profile is only defined for MW and IP devices")


class LogicalClock:
    """Shared deterministic tick counter."""

    def __init__(self):
        self._now = 0
        self._lock = threading.Lock()

    @property
    def now(self) -> int:
        return self._now

    def advance(self, ticks: int = 1) -> int:
        with self._lock:
            self._now += ticks
            return self._now


class ConfigTree:
    """Hierarchical typed configuration, stored as a flat map of
    '/'-separated leaf paths to values. Comparison is structural."""

    def __init__(self, leaves: dict[str, object] | None = None):
        self._leaves: dict[str, object] = dict(leaves or {})

    @staticmethod
    def normalize(path: str) -> str:
        path = "/" + path.strip("/")
        if "//" in path or path == "/":
            raise ValueError(f"malformed path {path!r}")
        return path

    def get(self, path: str, default=None):
        return self._leaves.get(self.normalize(path), default)

    def has(self, path: str) -> bool:
        return self.normalize(path) in self._leaves

    def set(self, path: str, value) -> None:
        self._leaves[self.normalize(path)] = value

    def delete(self, path: str) -> int:
        """Delete a leaf or a whole subtree; returns number of leaves removed."""
        path = self.normalize(path)
        if path in self._leaves:
            del self._leaves[path]
            return 1
        prefix = path + "/"
        doomed = [p for p in self._leaves if p.startswith(prefix)]
        for p in doomed:
            del self._leaves[p]
        return len(doomed)

    def subtree(self, prefix: str) -> dict[str, object]:
        prefix = self.normalize(prefix) + "/"
        return {p[len(prefix):]: v for p, v in self._leaves.items() if p.startswith(prefix)}

    def instances(self, branch: str) -> list[str]:
        """Names of the list entries directly under ``branch``."""
        prefix = self.normalize(branch) + "/"
        names = {p[len(prefix):].split("/", 1)[0]
                 for p in self._leaves if p.startswith(prefix)}
        return sorted(names)

    def leaves(self) -> dict[str, object]:
        return dict(self._leaves)

    def copy(self) -> "ConfigTree":
        return ConfigTree(self._leaves)

    def diff(self, new: "ConfigTree") -> list[tuple[str, str, object]]:
        """Edits transforming self into ``new``: deletes first, then sets,
        each group in canonical path order."""
        deletes = [(p, DELETE, None) for p in sorted(self._leaves)
                   if p not in new._leaves]
        sets = [(p, SET, v) for p, v in sorted(new._leaves.items())
                if self._leaves.get(p) != v]
        return deletes + sets

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfigTree):
            return NotImplemented
        return self._leaves == other._leaves

    def __len__(self) -> int:
        return len(self._leaves)

    def to_dict(self) -> dict[str, object]:
        return {p: self._leaves[p] for p in sorted(self._leaves)}


@dataclass(frozen=True)
class LeafSpec:
    type: str
    values: tuple = ()
    min: int | None = None
    max: int | None = None
    mandatory: bool = False

    def check(self, value) -> str | None:
        """Return a complaint string, or None when the value conforms."""
        if self.type == "int":
            if not isinstance(value, int) or isinstance(value, bool):
                return f"expected int, got {type(value).__name__}"
            if self.min is not None and value < self.min:
                return f"{value} < min {self.min}"
            if self.max is not None and value > self.max:
                return f"{value} > max {self.max}"
        elif self.type == "str":
            if not isinstance(value, str):
                return f"expected str, got {type(value).__name__}"
        elif self.type == "bool":
            if not isinstance(value, bool):
                return f"expected bool, got {type(value).__name__}"
        elif self.type == "enum":
            if value not in self.values:
                return f"{value!r} not in {list(self.values)}"
        elif self.type == "enum_int":
            if isinstance(value, bool) or value not in self.values:
                return f"{value!r} not in {list(self.values)}"
        else:
            return f"unknown leaf type {self.type}"
        return None


class DeviceSchema:
    """Typed leaf paths for one technology. Wildcard segments (``*``)
    match exactly one path segment (a list-entry key)."""

    def __init__(self, technology: Technology, paths: dict[str, LeafSpec],
                 factory: dict[str, object], air_interface_factory: dict | None = None):
        self.technology = technology
        self._specs = {ConfigTree.normalize(p): s for p, s in paths.items()}
        self.factory = dict(factory)
        self.air_interface_factory = dict(air_interface_factory or {})

    def match(self, path: str) -> LeafSpec | None:
        segs = ConfigTree.normalize(path).split("/")[1:]
        for pattern, spec in self._specs.items():
            psegs = pattern.split("/")[1:]
            if len(psegs) != len(segs):
                continue
            if all(ps == "*" or ps == s for ps, s in zip(psegs, segs)):
                return spec
        return None

    def covers_prefix(self, path: str) -> bool:
        """True when ``path`` is a proper prefix of at least one schema path."""
        segs = ConfigTree.normalize(path).split("/")[1:]
        for pattern in self._specs:
            psegs = pattern.split("/")[1:]
            if len(psegs) <= len(segs):
                continue
            if all(ps == "*" or ps == s for ps, s in zip(psegs[:len(segs)], segs)):
                return True
        return False

    def mandatory_under(self, branch_pattern: str) -> list[str]:
        out = []
        prefix = ConfigTree.normalize(branch_pattern)
        for pattern, spec in self._specs.items():
            if spec.mandatory and pattern.startswith(prefix + "/"):
                out.append(pattern[len(prefix) + 1:])
        return sorted(out)


def load_schema(technology: Technology) -> DeviceSchema:
    name = {Technology.IP: "ip", Technology.OPTICAL: "optical", Technology.MW: "mw"}[technology]
    raw = json.loads(resources.files("ifusion.schemas").joinpath(f"{name}.json").read_text())
    paths = {}
    for p, d in raw["paths"].items():
        paths[p] = LeafSpec(
            type=d["type"],
            values=tuple(d.get("values", ())),
            min=d.get("min"),
            max=d.get("max"),
            mandatory=bool(d.get("mandatory", False)),
        )
    return DeviceSchema(Technology(raw["technology"]), paths, raw.get("factory", {}),
                        raw.get("air_interface_factory"))


class NotificationKind(Enum):
    CONFIG_COMMITTED = "CONFIG_COMMITTED"
    OPER_CHANGE = "OPER_CHANGE"
    MODULATION_CHANGE = "MODULATION_CHANGE"
    LINK_DOWN = "LINK_DOWN"
    LINK_UP = "LINK_UP"


@dataclass(frozen=True)
class NotificationEvent:
    device: Identifier
    seq: int
    kind: NotificationKind
    payload: dict

    def to_dict(self) -> dict:
        return {"device": self.device.render(), "seq": self.seq,
                "kind": self.kind.value, "payload": self.payload}


class Subscription:
    """Ordered event feed for one subscriber. ``drain`` never blocks;
    ``get`` blocks until an event arrives or the timeout elapses."""

    def __init__(self):
        self._queue: deque[NotificationEvent] = deque()
        self._cond = threading.Condition()

    def _push(self, event: NotificationEvent) -> None:
        with self._cond:
            self._queue.append(event)
            self._cond.notify_all()

    def drain(self) -> list[NotificationEvent]:
        with self._cond:
            out = list(self._queue)
            self._queue.clear()
            return out

    def get(self, timeout: float | None = None) -> NotificationEvent | None:
        with self._cond:
            if not self._queue:
                self._cond.wait(timeout)
            return self._queue.popleft() if self._queue else None

    def __len__(self) -> int:
        with self._cond:
            return len(self._queue)


@dataclass
class InterfaceState:
    tx_mbps: int = 0
    rx_mbps: int = 0
    oper_up: bool = True


class Session:
    """Exclusive edit session over one device's candidate store."""

    def __init__(self, device: "Device", client: str):
        self.device = device
        self.client = client
        self.closed = False

    def edit(self, edits) -> None:
        self.device._edit(self, edits)

    def commit(self) -> int:
        return self.device._commit(self)

    def discard(self) -> None:
        self.device._discard(self)

    def candidate(self) -> ConfigTree:
        return self.device.get_config(CANDIDATE)

    def close(self) -> None:
        self.device._close_session(self)

    def __enter__(self) -> "Session":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


class Device:
    """One simulated NATIVE network element."""

    def __init__(self, descriptor: DeviceDescriptor, schema: DeviceSchema | None = None,
                 ports: tuple[str, ...] = (), air_interfaces: tuple[str, ...] = (),
                 overrides: dict[str, object] | None = None,
                 clock: LogicalClock | None = None):
        self.descriptor = descriptor
        self.schema = schema or load_schema(descriptor.technology)
        self.ports = tuple(ports)
        self.air_interfaces = tuple(air_interfaces)
        self.clock = clock or LogicalClock()
        self._boot_tick = self.clock.now
        self._lock = threading.RLock()
        self._session: Session | None = None
        self._running = ConfigTree(self.schema.factory)
        for iface in self.air_interfaces:
            for leaf, value in self.schema.air_interface_factory.items():
                self._running.set(f"/air-interfaces/{iface}/{leaf}", value)
        for path, value in (overrides or {}).items():
            complaint = self._check_edit(path, SET, value)
            if complaint:
                raise SchemaViolation(f"{path}: {complaint}", path=path)
            self._running.set(path, value)
        self._candidate = self._running.copy()
        self._seq = 0
        self._commit_id = 0
        self._event_log: list[NotificationEvent] = []
        self._subscriptions: list[Subscription] = []
        self._interfaces = {p: InterfaceState() for p in self.ports}
        self._commit_failures = 0
        self.offline = False

    @property
    def id(self) -> Identifier:
        return self.descriptor.id

    def uptime_ticks(self) -> int:
        return self.clock.now - self._boot_tick

    # -- configuration --------------------------------------------------

    def get_config(self, store: str = RUNNING) -> ConfigTree:
        with self._lock:
            if store == RUNNING:
                return self._running.copy()
            if store == CANDIDATE:
                return self._candidate.copy()
            raise ValueError(f"unknown datastore {store!r}")

    def open_session(self, client: str = "controller") -> Session:
        with self._lock:
            if self._session is not None:
                raise LockedByOther(f"device {self.id} locked by {self._session.client}",
                                    holder=self._session.client)
            self._candidate = self._running.copy()
            self._session = Session(self, client)
            return self._session

    def _require_session(self, session: Session) -> None:
        if session.closed:
            raise LockedByOther("session already closed")
        if self._session is not session:
            raise LockedByOther(f"device {self.id} locked by another session")

    def _check_edit(self, path: str, op: str, value) -> str | None:
        spec = self.schema.match(path)
        if op == SET:
            if spec is None:
                return "path not in schema"
            return spec.check(value)
        if op == DELETE:
            if spec is not None:
                if spec.mandatory:
                    return "mandatory leaf cannot be deleted"
                return None
            if self.schema.covers_prefix(path):
                return None  # subtree delete
            return "path not in schema"
        return f"unknown edit op {op!r}"

    def _edit(self, session: Session, edits) -> None:
        with self._lock:
            self._require_session(session)
            for path, op, value in edits:
                complaint = self._check_edit(path, op, value)
                if complaint:
                    raise SchemaViolation(f"{path}: {complaint}", path=path)
            scratch = self._candidate.copy()
            for path, op, value in edits:
                if op == SET:
                    scratch.set(path, value)
                else:
                    if scratch.delete(path) == 0:
                        raise SchemaViolation(f"{path}: delete of absent path", path=path)
            self._candidate = scratch

    def _validate_candidate(self) -> list[str]:
        problems = []
        for iface in self.air_interfaces:
            for leaf in self.schema.mandatory_under("/air-interfaces/*"):
                if not self._candidate.has(f"/air-interfaces/{iface}/{leaf}"):
                    problems.append(f"/air-interfaces/{iface}/{leaf} missing")
        return problems

    def _commit(self, session: Session) -> int:
        with self._lock:
            self._require_session(session)
            if self._commit_failures > 0:
                self._commit_failures -= 1
                raise ValidationFailed("injected commit failure", device=self.id.render())
            problems = self._validate_candidate()
            if problems:
                raise ValidationFailed("; ".join(problems), device=self.id.render())
            diff = self._running.diff(self._candidate)
            self._running = self._candidate.copy()
            self._commit_id += 1
            self._emit(NotificationKind.CONFIG_COMMITTED, {
                "commit_id": self._commit_id,
                "diff": [{"path": p, "op": op, "value": v} for p, op, v in diff],
            })
            return self._commit_id

    def _discard(self, session: Session) -> None:
        with self._lock:
            self._require_session(session)
            self._candidate = self._running.copy()

    def _close_session(self, session: Session) -> None:
        with self._lock:
            if session.closed:
                return
            session.closed = True
            if self._session is session:
                self._session = None
                self._candidate = self._running.copy()

    # -- notifications ---------------------------------------------------

    def _emit(self, kind: NotificationKind, payload: dict) -> None:
        self._seq += 1
        event = NotificationEvent(self.id, self._seq, kind, payload)
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

    @property
    def event_log(self) -> list[NotificationEvent]:
        with self._lock:
            return list(self._event_log)

    # -- operational state ------------------------------------------------

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
            self._emit(kind, {"interface": interface, "oper_up": up})

    def interface_oper_up(self, interface: str) -> bool:
        with self._lock:
            return self._interfaces[interface].oper_up

    # -- fault injection ---------------------------------------------------

    def inject_commit_failure(self, count: int = 1) -> None:
        with self._lock:
            self._commit_failures += count

    def emit_modulation_change(self, interface: str, modulation: int) -> None:
        """Radio condition change on an MW air interface (simulation hook)."""
        with self._lock:
            self._emit(NotificationKind.MODULATION_CHANGE,
                       {"interface": interface, "modulation": modulation})


# -- legacy device ------------------------------------------------------------

@dataclass(frozen=True)
class LegacyParamSpec:
    name: str
    kind: str                      # "int" or "enum"
    values: tuple[str, ...] = ()   # enum tokens
    min: int | None = None
    max: int | None = None

    def accepts(self, token: str) -> bool:
        if self.kind == "enum":
            return token in self.values
        try:
            value = int(token)
        except ValueError:
            return False
        if self.min is not None and value < self.min:
            return False
        if self.max is not None and value > self.max:
            return False
        return True


MW_LEGACY_PARAMS = (
    LegacyParamSpec("TX-FREQ", "int", min=0),
    LegacyParamSpec("RF-BW", "enum", values=("7", "14", "28", "56", "112")),
    LegacyParamSpec("MOD-MIN", "enum", values=("QPSK", "QAM16", "QAM64", "QAM256", "QAM1024")),
    LegacyParamSpec("MOD-MAX", "enum", values=("QPSK", "QAM16", "QAM64", "QAM256", "QAM1024")),
    LegacyParamSpec("ACM", "enum", values=("ON", "OFF")),
    LegacyParamSpec("TX-PWR", "int", min=-10, max=35),
)

MW_LEGACY_FACTORY = {
    "TX-FREQ": "18000000",
    "RF-BW": "28",
    "MOD-MIN": "QPSK",
    "MOD-MAX": "QPSK",
    "ACM": "OFF",
    "TX-PWR": "20",
}


class LegacyDevice:
    """Proprietary box with a flat parameter store and immediate writes.

    Command grammar (exact ASCII):
        SET <PARAM> <VALUE>   ->  "OK" | "ERR BAD_VALUE" | "ERR UNKNOWN_PARAM"
        GET <PARAM>           ->  "<value>" | "ERR UNKNOWN_PARAM"
        SHOW ALL              ->  "PARAM=VALUE" lines, sorted, newline-joined
        anything else         ->  "ERR UNKNOWN_COMMAND"
    """

    def __init__(self, descriptor: DeviceDescriptor,
                 params: tuple[LegacyParamSpec, ...] = MW_LEGACY_PARAMS,
                 factory: dict[str, str] | None = None,
                 clock: LogicalClock | None = None):
        if descriptor.vendor_profile is not VendorProfile.LEGACY:
            raise ValueError("LegacyDevice requires a LEGACY descriptor")
        self.descriptor = descriptor
        self.specs = {s.name: s for s in params}
        self.store: dict[str, str] = dict(MW_LEGACY_FACTORY if factory is None else factory)
        self.clock = clock or LogicalClock()
        self._lock = threading.RLock()
        self._set_failures: dict[str, int] = {}
        self.offline = False

    @property
    def id(self) -> Identifier:
        return self.descriptor.id

    def execute(self, command: str) -> str:
        with self._lock:
            parts = command.split()
            if len(parts) == 3 and parts[0] == "SET":
                return self._do_set(parts[1], parts[2])
            if len(parts) == 2 and parts[0] == "GET":
                return self._do_get(parts[1])
            if len(parts) == 2 and parts[0] == "SHOW" and parts[1] == "ALL":
                return "\n".join(f"{k}={v}" for k, v in sorted(self.store.items()))
            return "ERR UNKNOWN_COMMAND"

    def _do_set(self, param: str, token: str) -> str:
        spec = self.specs.get(param)
        if spec is None:
            return "ERR UNKNOWN_PARAM"
        if self._set_failures.get(param, 0) > 0:
            self._set_failures[param] -= 1
            return "ERR BAD_VALUE"
        if not spec.accepts(token):
            return "ERR BAD_VALUE"
        self.store[param] = token
        return "OK"

    def _do_get(self, param: str) -> str:
        if param not in self.specs:
            return "ERR UNKNOWN_PARAM"
        return self.store[param]

    def inject_set_failure(self, param: str, count: int = 1) -> None:
        """Make the next ``count`` SETs of ``param`` fail with BAD_VALUE."""
        with self._lock:
            if param not in self.specs:
                raise UnknownParam(param)
            self._set_failures[param] = self._set_failures.get(param, 0) + count


def raise_legacy_reply(command: str, reply: str) -> None:
    """Map an ``ERR <CODE>`` reply onto the corresponding exception."""
    if reply == "ERR UNKNOWN_COMMAND":
        raise UnknownCommand(command)
    if reply == "ERR UNKNOWN_PARAM":
        raise UnknownParam(command)
    if reply == "ERR BAD_VALUE":
        raise BadValue(command)
    if reply.startswith("ERR"):
        raise BadValue(f"{command}: {reply}")
