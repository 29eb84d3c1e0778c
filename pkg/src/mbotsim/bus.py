"""In-process publish/subscribe middleware with bounded per-subscriber queues.

Topics are named "/{robot_name}/<suffix>" and carry one of three payload
kinds: float arrays (up to 16 entries), body twists, or fixed-size image
stubs.  Queues drop the oldest message on overflow and there is no history
replay for late subscribers.  Scheduled publishers fire on simulation time:
publisher k-th fire happens at t = k / rate_hz.
"""

from __future__ import annotations

import math
import zlib
from collections import deque
from dataclasses import dataclass
from typing import Callable

from .core import Twist2D

FLOAT_ARRAY = "float_array"
TWIST = "twist"
IMAGE_STUB = "image_stub"
KINDS = (FLOAT_ARRAY, TWIST, IMAGE_STUB)

DEFAULT_QUEUE_DEPTH = 10
MAX_FLOAT_ARRAY_LEN = 16

# Slack when matching scheduled fire times against the step clock; far below
# any sane timestep or publish interval.
_FIRE_EPS = 1e-9


class BusError(Exception):
    pass


class TopicExistsError(BusError):
    pass


class UnknownTopicError(BusError):
    pass


class PayloadKindError(BusError, TypeError):
    pass


class StampRegressionError(BusError):
    pass


class InsufficientDataError(BusError):
    pass


@dataclass(frozen=True)
class TopicSpec:
    """Topic contract: unique name, payload kind, optional publish rate, and
    the required float-array length when the kind demands one."""

    name: str
    kind: str
    rate_hz: float | None = None
    array_len: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown topic kind {self.kind!r}")
        if self.rate_hz is not None and not self.rate_hz > 0:
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz!r}")


@dataclass(frozen=True)
class ByteStub:
    """Stand-in for an image payload: byte length plus a checksum marker."""

    length: int
    checksum: int


def make_image_stub(length: int) -> ByteStub:
    return ByteStub(length, zlib.crc32(length.to_bytes(8, "little")))


@dataclass(frozen=True)
class TopicMessage:
    topic: str
    stamp: float
    payload: tuple | Twist2D | ByteStub


@dataclass(frozen=True)
class RateSample:
    """Measured publish rate over a window of observed stamps."""

    topic: str
    window: float
    mean_hz: float
    stddev_hz: float


class Subscription:
    """Bounded FIFO view of one topic for one consumer."""

    def __init__(self, topic_name: str, depth: int):
        if depth < 1:
            raise ValueError(f"queue depth must be >= 1, got {depth}")
        self.topic_name = topic_name
        self.queue: deque[TopicMessage] = deque(maxlen=depth)

    def take(self) -> TopicMessage | None:
        """Pop the oldest pending message, or None when the queue is empty."""
        if self.queue:
            return self.queue.popleft()
        return None

    def drain(self) -> list[TopicMessage]:
        out = list(self.queue)
        self.queue.clear()
        return out

    def latest(self) -> TopicMessage | None:
        """Drop everything but the newest pending message and return it."""
        if not self.queue:
            return None
        msg = self.queue[-1]
        self.queue.clear()
        return msg


class TopicHandle:
    def __init__(self, spec: TopicSpec):
        self.spec = spec
        self.subscribers: list[Subscription] = []
        self.last_stamp: float | None = None
        self.stamp_history: deque[float] = deque(maxlen=8192)


class _ScheduledPublisher:
    def __init__(self, handle: TopicHandle, rate_hz: float, source: Callable[[], object]):
        self.handle = handle
        self.rate_hz = rate_hz
        self.source = source
        self.next_fire = 1  # k-th fire occurs at k / rate_hz


class Bus:
    """Topic registry plus synchronous, deterministic delivery."""

    def __init__(self):
        self._topics: dict[str, TopicHandle] = {}
        self._pending: dict[str, list[Subscription]] = {}
        self._scheduled: list[_ScheduledPublisher] = []

    def advertise(self, spec: TopicSpec) -> TopicHandle:
        if spec.name in self._topics:
            raise TopicExistsError(f"topic {spec.name!r} already advertised")
        handle = TopicHandle(spec)
        self._topics[spec.name] = handle
        # Late-join subscriptions activate now, in the order they subscribed.
        for sub in self._pending.pop(spec.name, []):
            handle.subscribers.append(sub)
        return handle

    def topic_names(self) -> list[str]:
        return list(self._topics)

    def spec_of(self, name: str) -> TopicSpec:
        handle = self._topics.get(name)
        if handle is None:
            raise UnknownTopicError(f"topic {name!r} not advertised")
        return handle.spec

    def subscribe(self, name: str, queue_depth: int = DEFAULT_QUEUE_DEPTH) -> Subscription:
        sub = Subscription(name, queue_depth)
        handle = self._topics.get(name)
        if handle is not None:
            handle.subscribers.append(sub)
        else:
            self._pending.setdefault(name, []).append(sub)
        return sub

    def publish(self, handle: TopicHandle, message: TopicMessage) -> None:
        self._check_payload(handle.spec, message)
        if handle.last_stamp is not None and message.stamp < handle.last_stamp:
            raise StampRegressionError(
                f"stamp {message.stamp} precedes {handle.last_stamp} on {handle.spec.name!r}"
            )
        handle.last_stamp = message.stamp
        handle.stamp_history.append(message.stamp)
        for sub in handle.subscribers:
            sub.queue.append(message)  # deque maxlen drops the oldest

    def publish_to(self, name: str, message: TopicMessage) -> None:
        handle = self._topics.get(name)
        if handle is None:
            raise UnknownTopicError(f"topic {name!r} not advertised")
        self.publish(handle, message)

    @staticmethod
    def _check_payload(spec: TopicSpec, message: TopicMessage) -> None:
        payload = message.payload
        if spec.kind == FLOAT_ARRAY:
            if not isinstance(payload, tuple):
                raise PayloadKindError(
                    f"{spec.name!r} expects a float array, got {type(payload).__name__}"
                )
            if len(payload) > MAX_FLOAT_ARRAY_LEN:
                raise PayloadKindError(
                    f"float array on {spec.name!r} exceeds {MAX_FLOAT_ARRAY_LEN} entries"
                )
            if spec.array_len is not None and len(payload) != spec.array_len:
                raise PayloadKindError(
                    f"{spec.name!r} expects {spec.array_len} entries, got {len(payload)}"
                )
        elif spec.kind == TWIST:
            if not isinstance(payload, Twist2D):
                raise PayloadKindError(
                    f"{spec.name!r} expects a twist, got {type(payload).__name__}"
                )
        elif spec.kind == IMAGE_STUB:
            if not isinstance(payload, ByteStub):
                raise PayloadKindError(
                    f"{spec.name!r} expects an image stub, got {type(payload).__name__}"
                )

    def register_scheduled_publisher(
        self, spec: TopicSpec, source: Callable[[], object]
    ) -> TopicHandle:
        """Advertise a topic that fires source() at spec.rate_hz in sim time."""
        if spec.rate_hz is None:
            raise ValueError(f"scheduled topic {spec.name!r} needs a rate_hz")
        handle = self.advertise(spec)
        self._scheduled.append(_ScheduledPublisher(handle, spec.rate_hz, source))
        return handle

    def fire_due(self, t_end: float) -> int:
        """Fire every scheduled publish due up to simulation time t_end.

        Messages are stamped with their nominal fire time k / rate, so
        measured rates reflect the schedule, not the stepping grid.
        """
        fired = 0
        for pub in self._scheduled:
            while pub.next_fire / pub.rate_hz <= t_end + _FIRE_EPS:
                stamp = pub.next_fire / pub.rate_hz
                self.publish(pub.handle, TopicMessage(pub.handle.spec.name, stamp, pub.source()))
                pub.next_fire += 1
                fired += 1
        return fired

    def measure_rate(self, name: str, window: float) -> RateSample:
        """Mean and spread of the observed publish rate over the trailing window."""
        if not window > 0:
            raise ValueError(f"window must be positive, got {window!r}")
        handle = self._topics.get(name)
        if handle is None:
            raise UnknownTopicError(f"topic {name!r} not advertised")
        history = handle.stamp_history
        if len(history) < 2:
            raise InsufficientDataError(f"need >= 2 messages on {name!r} to measure a rate")
        cutoff = history[-1] - window
        stamps = [s for s in history if s >= cutoff]
        if len(stamps) < 2:
            raise InsufficientDataError(
                f"need >= 2 messages within the {window} s window on {name!r}"
            )
        mean_hz = (len(stamps) - 1) / (stamps[-1] - stamps[0])
        rates = [1.0 / (b - a) for a, b in zip(stamps, stamps[1:])]
        mean_r = sum(rates) / len(rates)
        stddev = math.sqrt(sum((r - mean_r) ** 2 for r in rates) / len(rates))
        return RateSample(name, window, mean_hz, stddev)
