import asyncio
import inspect
import logging
from typing import Dict, List, Callable, Coroutine, Tuple

from .commitment import Salt
from .interface import AsyncRunnable, MessageTypes, Roles
from .p2p import P2PMessage

log = logging.getLogger(__name__)

TypeHandler = Callable[..., Coroutine]


class Partner(AsyncRunnable):
    """
    The receiving end of a partner's channels.

    Delivered messages are queued by the channel and consumed here, then passed to the handlers
    registered for their type.

    reminder: consumption is sequential, so handler order is delivery order
    """
    participant_id: str
    role: Roles
    received: List[P2PMessage]

    _handler_map: Dict[MessageTypes, List[TypeHandler]]
    _pkg_queue: asyncio.Queue

    def __init__(self, participant_id: str, role: Roles):
        self.participant_id = participant_id
        self.role = Roles(role)
        self.received = []

        self._handler_map = {}
        self._pkg_queue = asyncio.Queue()

    @property
    def pkg_queue(self) -> asyncio.Queue:
        return self._pkg_queue

    def deliver(self, msg: P2PMessage):
        """channel sink, the channel never waits on the partner"""
        self._pkg_queue.put_nowait(msg)

    def register(self, type: MessageTypes, handler: TypeHandler):
        if not asyncio.iscoroutinefunction(handler):
            raise TypeError('handler must be a coroutine.')

        params = list(inspect.signature(handler).parameters.values())
        if len(params) != 1:
            raise TypeError('handler must have one and only one param, the delivered P2PMessage')

        if type not in self._handler_map:
            self._handler_map[type] = []
        self._handler_map[type].append(handler)

    def on_message(self, type: MessageTypes):
        """
        decorator, register a coroutine to handle delivered messages of the type
        """

        def decorator(func: TypeHandler):
            self.register(type, func)
            return func

        return decorator

    async def handle_pkg(self):
        """
        consume every queued message, returns once the queue is empty
        """
        while not self._pkg_queue.empty():
            msg: P2PMessage = self._pkg_queue.get_nowait()
            log.debug(f'{self.participant_id} upcoming msg: {msg}')

            try:
                await self._dispatch_msg(msg)
            except Exception as e:
                log.exception(e)

            self._pkg_queue.task_done()

    async def _dispatch_msg(self, msg: P2PMessage):
        self.received.append(msg)
        for handler in self._handler_map.get(msg.type, []):
            await self._handle_safe(handler)(msg)

    @staticmethod
    def _handle_safe(handler: TypeHandler):
        async def safe_handler(msg):
            try:
                await handler(msg)
            except Exception as e:
                log.exception(f'error raised during message handling', exc_info=e)

        return safe_handler

    def disclosures(self) -> List[Tuple[object, Salt]]:
        """
        ``(payload, salt)`` of every data message received, what this partner can disclose to an auditor
        """
        ret = []
        for msg in self.received:
            if msg.type != MessageTypes.DATA:
                continue
            body = msg.body
            ret.append((body['value'], Salt.from_hex(body['salt'])))
        return ret

    async def start(self):
        await self.handle_pkg()
