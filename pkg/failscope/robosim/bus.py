import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Generator, List, Tuple

import simpy
from pydantic import BaseModel

from failscope.exceptions import ConfigurationException

logger = logging.getLogger(__name__)

INTERCEPTED_SUFFIX = "_intercepted"


class Topic(BaseModel):
    class Config:
        frozen = True

    name: str
    message_type: str


@dataclass(frozen=True)
class BusMessage:
    topic: str
    publish_time: float
    deliver_time: float
    payload: Any


Callback = Callable[[BusMessage], None]


class Publisher:
    """Handle through which one node publishes on one topic.

    The topic a publisher writes to is resolved through the bus's remappings on every publish, so renaming a topic
    rewires existing publishers.
    """

    def __init__(self, bus: "MessageBus", node: str, topic: str) -> None:
        self.bus = bus
        self.node = node
        self.topic = topic

    @property
    def resolved_topic(self) -> str:
        return self.bus.resolve(self.node, self.topic)

    def publish(self, payload: Any) -> BusMessage:
        now = self.bus.env.now
        message = BusMessage(topic=self.resolved_topic, publish_time=now, deliver_time=now, payload=payload)
        self.bus.deliver(message)
        return message


class MessageBus:
    """Topic-based publish/subscribe bus running on a `simpy` clock.

    Delivery to subscribers is synchronous at the current simulated time; latency is introduced only by delay nodes
    (see `intercept_topic`), which reschedule messages on the same clock.
    """

    def __init__(self, env: simpy.Environment) -> None:
        self.env = env
        self.topics: Dict[str, Topic] = {}
        self._publishers: List[Publisher] = []
        self._subscribers: Dict[str, List[Tuple[str, Callback]]] = {}
        self._remappings: Dict[Tuple[str, str], str] = {}

    def advertise(self, node: str, topic: str, message_type: str) -> Publisher:
        self._register(topic, message_type)
        publisher = Publisher(self, node, topic)
        self._publishers.append(publisher)
        return publisher

    def subscribe(self, node: str, topic: str, message_type: str, callback: Callback) -> None:
        self._register(topic, message_type)
        self._subscribers.setdefault(topic, []).append((node, callback))

    def remap(self, node: str, topic: str, new_topic: str) -> None:
        """Make `node` publish on `new_topic` whenever it publishes on `topic`."""
        self._register(new_topic, self.topics[topic].message_type)
        self._remappings[(node, topic)] = new_topic

    def resolve(self, node: str, topic: str) -> str:
        return self._remappings.get((node, topic), topic)

    def deliver(self, message: BusMessage) -> None:
        for _, callback in self._subscribers.get(message.topic, ()):
            callback(message)

    def publishers_of(self, topic: str) -> List[Publisher]:
        return [publisher for publisher in self._publishers if publisher.resolved_topic == topic]

    def topology(self) -> List[str]:
        """Describe the wiring as `publisher -> topic -> subscribers` lines, sorted by topic then publisher."""
        lines = []
        for name in sorted(self.topics):
            subscribers = ", ".join(node for node, _ in self._subscribers.get(name, ())) or "-"
            publishers = sorted({publisher.node for publisher in self.publishers_of(name)}) or ["-"]
            lines.extend(f"{node} -> {name} -> {subscribers}" for node in publishers)
        return lines

    def _register(self, topic: str, message_type: str) -> None:
        existing = self.topics.get(topic)
        if existing is None:
            self.topics[topic] = Topic(name=topic, message_type=message_type)
        elif existing.message_type != message_type:
            raise ConfigurationException(
                f"topic {topic} carries {existing.message_type}, cannot also carry {message_type}"
            )


class DelayNode:
    """Republishes every message from one topic onto another after a constant delay.

    A zero delay republishes synchronously, so the downstream view is identical to an uninterrupted topic. Constant
    delays on a single clock keep messages in publish order.
    """

    def __init__(self, bus: MessageBus, source: str, destination: str, delay_s: float) -> None:
        self.bus = bus
        self.destination = destination
        self.delay_s = delay_s
        self.name = f"delay{destination.replace('/', '_')}"
        bus.subscribe(self.name, source, bus.topics[source].message_type, self._on_message)
        bus.advertise(self.name, destination, bus.topics[destination].message_type)

    def _on_message(self, message: BusMessage) -> None:
        if self.delay_s == 0:
            self.bus.deliver(replace(message, topic=self.destination))
            return
        self.bus.env.process(self._forward(message))

    def _forward(self, message: BusMessage) -> Generator[simpy.Event, Any, None]:
        yield self.bus.env.timeout(self.delay_s)
        self.bus.deliver(replace(message, topic=self.destination, deliver_time=message.deliver_time + self.delay_s))


def intercept_topic(bus: MessageBus, topic: str, delay_s: float) -> MessageBus:
    """Route a topic through a delay node by renaming.

    Every current publisher of `topic` is remapped to `<topic>_intercepted`; a delay node subscribes there and
    republishes on `topic` `delay_s` seconds later.

    Args:
        bus: The bus to rewire, before the simulation starts.
        topic: Name of an existing topic.
        delay_s: Constant delay in simulated seconds.

    Raises:
        ConfigurationException: If the topic is unknown or the delay is negative.
    """
    if topic not in bus.topics:
        raise ConfigurationException(f"cannot intercept unknown topic {topic}")
    if delay_s < 0:
        raise ConfigurationException("delay must not be negative")
    renamed = topic + INTERCEPTED_SUFFIX
    for publisher in bus.publishers_of(topic):
        bus.remap(publisher.node, publisher.topic, renamed)
    DelayNode(bus, renamed, topic, delay_s)
    logger.debug("intercepted %s with a %s s delay", topic, delay_s)
    return bus

