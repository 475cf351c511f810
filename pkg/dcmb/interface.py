r"""Some Interfaces"""
import asyncio
import json
from abc import ABC, abstractmethod
from enum import IntEnum, Enum
from typing import Union, Dict, List

from Cryptodome.Hash import SHA256


class AsyncRunnable(ABC):
    """
    an object whose work runs as a coroutine, on a loop it owns unless given one
    """
    _loop: asyncio.AbstractEventLoop = None

    @property
    def loop(self) -> asyncio.AbstractEventLoop:
        """the event loop for the async work"""
        return self._loop

    @loop.setter
    def loop(self, new_loop: asyncio.AbstractEventLoop):
        self._loop = new_loop

    @abstractmethod
    async def start(self):
        """run the async work"""
        ...


class Representable(ABC):
    @property
    @abstractmethod
    def _repr(self) -> Union[str, Dict, List]:
        """cast class object to JSON serializable representation"""
        raise NotImplementedError


class DCMBException(Exception):
    """
    base of all errors raised by dcmb.py

    ``category`` is used by the command line to pick an exit code
    """
    category: str = 'other'


class _TypeEnum(Enum):
    """
    base of every enum that goes on the wire or into the ledger, serialized as its value

    has a ``_repr`` of its own, Representable is an ABC and its metaclass does not mix with Enum's
    """

    @property
    def _repr(self):
        return self.value


def _get_repr(item) -> Union[str, Dict, List]:
    """a helper function for serialization"""
    if isinstance(item, dict):
        return {k: _get_repr(v) for k, v in item.items()}
    if isinstance(item, (list, tuple)):
        return [_get_repr(i) for i in item]
    r = getattr(item, '_repr', item)
    return item if r is item else _get_repr(r)


def canonical_json(obj) -> bytes:
    """the one serialization every digest in dcmb.py is computed over"""
    return json.dumps(_get_repr(obj), sort_keys=True, separators=(',', ':'), ensure_ascii=False).encode('utf-8')


def sha256_hex(data: bytes) -> str:
    return SHA256.new(data).hexdigest()


ZERO_DIGEST = '00' * 32


class HashVariants(_TypeEnum):
    """
    memory-hard hash variants a parameter set can name
    """
    ARGON2ID = 'argon2id'
    ARGON2I = 'argon2i'
    ARGON2D = 'argon2d'


class TxKinds(_TypeEnum):
    """
    kinds of ledger transaction
    """
    EVIDENCE = 'evidence'
    CONTRACT_INPUT = 'contract_input'
    CONTRACT_EVENT = 'contract_event'
    CERTIFICATION = 'certification'


class ActionKinds(_TypeEnum):
    NOTIFY = 'notify'
    EMIT_EVENT = 'emit_event'
    INITIATE_ORDER = 'initiate_order'


class ImportanceTypes(_TypeEnum):
    LOW = 'low'
    NORMAL = 'normal'
    HIGH = 'high'


class Roles(_TypeEnum):
    """
    roles a participant can be registered with
    """
    MACHINE_OWNER = 'machine_owner'
    MACHINE_MANUFACTURER = 'machine_manufacturer'
    VALIDATOR = 'validator'
    SEQUENCER = 'sequencer'


class Verdicts(_TypeEnum):
    CERTIFY = 'certify'
    REJECT = 'reject'


class CertStatus(_TypeEnum):
    CERTIFIED = 'certified'
    REJECTED = 'rejected'
    PENDING = 'pending'


class Visibility(_TypeEnum):
    """
    who may fetch a submitted module source

    PRIVATE: validators only, SHARED: validators plus sender and receiver
    """
    PRIVATE = 'private'
    SHARED = 'shared'


class ChannelStates(_TypeEnum):
    AVAILABLE = 'available'
    PARTITIONED = 'partitioned'


class SendOutcomes(_TypeEnum):
    DELIVERED = 'delivered'
    CACHED = 'cached'
    DROPPED_FULL = 'dropped_full'
    DROPPED_TIMEOUT = 'dropped_timeout'


class MessageTypes(IntEnum):
    """
    types of P2P message
    """
    DATA = 1
    NOTIFY = 2


class EventTypes(Enum):
    """
    types of run log events
    """
    RECORD_REJECTED = 'record_rejected'
    UNMAPPED_VALUE = 'unmapped_value'
    BLOB_SEALED = 'blob_sealed'
    ATTESTED = 'attested'

    MESSAGE_DELIVERED = 'message_delivered'
    MESSAGE_CACHED = 'message_cached'
    MESSAGE_DROPPED = 'message_dropped'

    BLOCK_SEALED = 'block_sealed'
    CONTRACT_FIRED = 'contract_fired'
    NOTIFICATION_DELIVERED = 'notification_delivered'
    ACTION_TRIGGERED = 'action_triggered'

    VOTE_CAST = 'vote_cast'
    STATUS_DECIDED = 'status_decided'
    GATE_ALLOWED = 'gate_allowed'
    GATE_DENIED = 'gate_denied'


def make_event(type: EventTypes, tick: int, **fields) -> dict:
    """one run log record"""
    return dict(type=type.value, tick=tick, **fields)
