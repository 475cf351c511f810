"""
simulated partner-to-partner secure channels

the wire is ideal (no adversary, zero latency), what is modeled is availability: while a channel is
partitioned messages wait in the module cache until the channel heals, the cache is full, or they time out
"""
import json
import logging
from collections import deque
from typing import Dict, List, Callable, Optional, Deque, Tuple, Union

from .interface import Representable, DCMBException, MessageTypes, ChannelStates, SendOutcomes, EventTypes, \
    make_event

log = logging.getLogger(__name__)

TypeSink = Callable[['P2PMessage'], None]


class P2PMessage(Representable):
    """
    `Standard Object`

    one message on a channel, ``payload`` is opaque to the channel
    """
    msg_id: str
    type: MessageTypes
    from_id: str
    to_id: str
    payload: bytes
    enqueued_at: int

    def __init__(self, **kwargs):
        self.msg_id = kwargs.get('msg_id', '')
        self.type = MessageTypes(kwargs.get('type', MessageTypes.DATA))
        self.from_id = kwargs.get('from_id', '')
        self.to_id = kwargs.get('to_id', '')
        self.payload = kwargs.get('payload', b'')
        self.enqueued_at = kwargs.get('enqueued_at', 0)

    @property
    def body(self) -> Dict:
        """payload decoded as JSON, every message dcmb.py itself produces is JSON"""
        return json.loads(self.payload.decode('utf-8'))

    @property
    def _repr(self) -> Dict:
        return {'msg_id': self.msg_id, 'type': int(self.type), 'from_id': self.from_id, 'to_id': self.to_id,
                'enqueued_at': self.enqueued_at}

    def __repr__(self):
        return f'P2PMessage({self.msg_id}, {self.from_id}->{self.to_id})'


class CachePolicy:
    capacity: int
    timeout: int

    def __init__(self, capacity: int = 100, timeout: int = 24):
        if capacity < 1 or timeout < 1:
            raise CachePolicy.InvalidPolicy(f'capacity and timeout must be >= 1, got {capacity}/{timeout}')
        self.capacity = capacity
        self.timeout = timeout

    class InvalidPolicy(DCMBException):
        category = 'config'


class Channel:
    """
    one direction between two partners, FIFO
    """
    from_id: str
    to_id: str
    state: ChannelStates
    policy: CachePolicy
    delivery_log: List[P2PMessage]
    events: List[Dict]

    _cache: Deque[P2PMessage]
    _sink: Optional[TypeSink]

    def __init__(self, from_id: str, to_id: str, policy: CachePolicy = None, sink: TypeSink = None,
                 events: List[Dict] = None):
        """
        :param sink: called with every delivered message, usually the receiving partner's queue
        :param events: event list to append to, a network shares one list across its channels
        """
        self.from_id = from_id
        self.to_id = to_id
        self.state = ChannelStates.AVAILABLE
        self.policy = policy or CachePolicy()
        self.delivery_log = []
        self.events = events if events is not None else []
        self._cache = deque()
        self._sink = sink

    @property
    def name(self) -> str:
        return f'{self.from_id}->{self.to_id}'

    @property
    def cached(self) -> List[P2PMessage]:
        return list(self._cache)

    @property
    def available(self) -> bool:
        return self.state == ChannelStates.AVAILABLE

    def set_availability(self, state: Union[ChannelStates, str]):
        """setting the current state again is a no-op"""
        state = ChannelStates(state)
        if state == self.state:
            return
        self.state = state
        log.info(f'channel {self.name} is now {state.value}')

    def send(self, msg: P2PMessage, now: int, policy: CachePolicy = None) -> SendOutcomes:
        """
        deliver ``msg`` now if the channel is up, else cache it, or drop it if the cache is full

        earlier cached messages are delivered first, so delivery stays FIFO
        """
        policy = policy or self.policy
        msg.enqueued_at = now
        self._expire(now, policy)
        if self.available:
            self._flush(now)
            self._deliver(msg, now)
            return SendOutcomes.DELIVERED
        if len(self._cache) >= policy.capacity:
            # newest is rejected, older cached data already has evidence pending
            self._drop(msg, now, SendOutcomes.DROPPED_FULL, 'cache_full')
            return SendOutcomes.DROPPED_FULL
        self._cache.append(msg)
        self.events.append(make_event(EventTypes.MESSAGE_CACHED, now, msg_id=msg.msg_id, channel=self.name))
        log.debug(f'{msg.msg_id} cached on {self.name} ({len(self._cache)}/{policy.capacity})')
        return SendOutcomes.CACHED

    def tick(self, now: int, policy: CachePolicy = None) -> List[Dict]:
        """
        drop expired cached messages, then deliver the rest if the channel is up

        :return: the delivery and drop events this tick produced
        """
        mark = len(self.events)
        self._expire(now, policy or self.policy)
        if self.available:
            self._flush(now)
        return [e for e in self.events[mark:] if e['type'] != EventTypes.MESSAGE_CACHED.value]

    def drain(self, now: int) -> List[Dict]:
        """final tick of a run: whatever is still cached can never be delivered any more"""
        events = self.tick(now)
        while self._cache:
            msg = self._cache.popleft()
            events.append(self._drop(msg, now, SendOutcomes.DROPPED_TIMEOUT, 'scenario_end'))
        return events

    def _expire(self, now: int, policy: CachePolicy):
        kept = deque()
        for msg in self._cache:
            if now - msg.enqueued_at > policy.timeout:
                self._drop(msg, now, SendOutcomes.DROPPED_TIMEOUT, 'timeout')
            else:
                kept.append(msg)
        self._cache = kept

    def _flush(self, now: int):
        while self._cache:
            self._deliver(self._cache.popleft(), now)

    def _deliver(self, msg: P2PMessage, now: int):
        self.delivery_log.append(msg)
        self.events.append(make_event(EventTypes.MESSAGE_DELIVERED, now, msg_id=msg.msg_id, channel=self.name,
                                      outcome=SendOutcomes.DELIVERED.value))
        if self._sink:
            self._sink(msg)

    def _drop(self, msg: P2PMessage, now: int, outcome: SendOutcomes, reason: str) -> Dict:
        event = make_event(EventTypes.MESSAGE_DROPPED, now, msg_id=msg.msg_id, channel=self.name,
                           outcome=outcome.value, reason=reason)
        self.events.append(event)
        log.warning(f'{msg.msg_id} dropped on {self.name}: {reason}')
        return event


class Network:
    """
    all channels of a run, keyed by (from_id, to_id)
    """
    _channels: Dict[Tuple[str, str], Channel]
    _events: List[Dict]

    def __init__(self, events: List[Dict] = None):
        """
        :param events: list the channel events are appended to, e.g. a run log's record list
        """
        self._channels = {}
        self._events = events if events is not None else []

    def add_channel(self, from_id: str, to_id: str, policy: CachePolicy = None, sink: TypeSink = None) -> Channel:
        channel = Channel(from_id, to_id, policy, sink, self._events)
        self._channels[(from_id, to_id)] = channel
        return channel

    def has_channel(self, from_id: str, to_id: str) -> bool:
        return (from_id, to_id) in self._channels

    def channel(self, from_id: str, to_id: str) -> Channel:
        try:
            return self._channels[(from_id, to_id)]
        except KeyError:
            raise Network.UnknownChannel(f'no channel {from_id}->{to_id}')

    @property
    def channels(self) -> List[Channel]:
        return list(self._channels.values())

    def send(self, msg: P2PMessage, now: int) -> SendOutcomes:
        return self.channel(msg.from_id, msg.to_id).send(msg, now)

    def tick(self, now: int) -> List[Dict]:
        events = []
        for channel in self._channels.values():
            events.extend(channel.tick(now))
        return events

    def drain(self, now: int) -> List[Dict]:
        events = []
        for channel in self._channels.values():
            events.extend(channel.drain(now))
        return events

    @property
    def events(self) -> List[Dict]:
        """every channel event in the order it happened"""
        return list(self._events)

    class UnknownChannel(DCMBException):
        category = 'config'
