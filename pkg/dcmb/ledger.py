"""
append-only, hash-chained block store: the audit trail

a single sequencer seals blocks, contract inputs are evaluated at sealing time and the resulting
contract events join the next block
"""
import json
import logging
from collections import deque
from typing import Dict, List, Optional, Tuple, Iterator, Callable, Deque, Iterable, Union

from .commitment import Salt, encode_payload
from .contracts import EqualityContract, ActionSpec
from .interface import Representable, DCMBException, TxKinds, Roles, canonical_json, sha256_hex, ZERO_DIGEST

log = logging.getLogger(__name__)

DEFAULT_BLOCK_CAPACITY = 100
MIN_LEAK_PATTERN = 4

# body keys whose values are hex-encoded bytes, decoded before leak matching
BINARY_FIELDS = frozenset({
    'hash', 'salt', 'blob_digest', 'signature', 'value', 'public_key', 'digest', 'tx_id', 'input_tx_id',
    'source_digest', 'build_digest', 'validation_log_digest', 'source_signature', 'build_signature',
})
# public parameters, never payload
SKIPPED_FIELDS = frozenset({'params_id'})

TypeEventHandler = Callable[['Transaction', ActionSpec], None]

TX_FIELDS = frozenset({'tx_id', 'kind', 'sender_id', 'body', 'timestamp'})
BLOCK_FIELDS = frozenset({'height', 'prev_hash', 'block_hash', 'sealed_at', 'txs'})


def _check_fields(d: Dict, fields: frozenset):
    if not isinstance(d, dict):
        raise TypeError(f'expected an object, got {type(d).__name__}')
    if d.keys() != fields:
        raise ValueError(f'fields {sorted(d.keys() ^ fields)} missing or unexpected')


class Transaction(Representable):
    """
    `Standard Object`

    one ledger entry, ``tx_id`` is the digest over (kind, sender_id, body, timestamp)
    """
    tx_id: str
    kind: TxKinds
    sender_id: str
    body: Dict
    timestamp: int

    def __init__(self, **kwargs):
        self.kind = TxKinds(kwargs.get('kind'))
        self.sender_id = kwargs.get('sender_id', '')
        # normalized copy, a caller's dict can not reach into a sealed block
        self.body = json.loads(canonical_json(kwargs.get('body', {})))
        self.timestamp = kwargs.get('timestamp', 0)
        self.tx_id = kwargs.get('tx_id') or self.compute_id()

    def compute_id(self) -> str:
        return sha256_hex(canonical_json({'kind': self.kind, 'sender_id': self.sender_id,
                                          'body': self.body, 'timestamp': self.timestamp}))

    @property
    def _repr(self) -> Dict:
        return {'tx_id': self.tx_id, 'kind': self.kind.value, 'sender_id': self.sender_id,
                'body': self.body, 'timestamp': self.timestamp}

    @staticmethod
    def from_repr(d: Dict) -> 'Transaction':
        """
        :raise ValueError: the keys are not exactly the serialized fields
        """
        _check_fields(d, TX_FIELDS)
        return Transaction(kind=d['kind'], sender_id=d['sender_id'], body=d['body'], timestamp=d['timestamp'],
                           tx_id=d['tx_id'])

    def __repr__(self):
        return f'Transaction({self.kind.value}, {self.tx_id[:8]}...)'


class Block(Representable):
    """
    `Standard Object`

    sealed batch of transactions, linked to its predecessor by ``prev_hash``
    """
    height: int
    prev_hash: str
    txs: Tuple[Transaction, ...]
    sealed_at: int
    block_hash: str

    def __init__(self, **kwargs):
        self.height = kwargs.get('height', 0)
        self.prev_hash = kwargs.get('prev_hash', ZERO_DIGEST)
        self.txs = tuple(kwargs.get('txs', ()))
        self.sealed_at = kwargs.get('sealed_at', 0)
        self.block_hash = kwargs.get('block_hash') or self.compute_hash()

    def compute_hash(self) -> str:
        return sha256_hex(canonical_json({'height': self.height, 'prev_hash': self.prev_hash,
                                          'sealed_at': self.sealed_at, 'txs': list(self.txs)}))

    @property
    def _repr(self) -> Dict:
        return {'height': self.height, 'prev_hash': self.prev_hash, 'block_hash': self.block_hash,
                'sealed_at': self.sealed_at, 'txs': [t._repr for t in self.txs]}

    @staticmethod
    def from_repr(d: Dict) -> 'Block':
        _check_fields(d, BLOCK_FIELDS)
        return Block(height=d['height'], prev_hash=d['prev_hash'], block_hash=d['block_hash'],
                     sealed_at=d['sealed_at'], txs=[Transaction.from_repr(t) for t in d['txs']])


class Receipt:
    tx_id: str
    pending: bool

    def __init__(self, tx_id: str, pending: bool = True):
        self.tx_id = tx_id
        self.pending = pending

    def __repr__(self):
        return f'Receipt({self.tx_id[:8]}..., pending={self.pending})'


class AuditEntry:
    """one Evidence commitment found by ``audit_lookup``"""
    block_height: int
    tx_id: str
    salt: Salt
    module_id: str

    def __init__(self, block_height: int, tx_id: str, salt: Salt, module_id: str = ''):
        self.block_height = block_height
        self.tx_id = tx_id
        self.salt = salt
        self.module_id = module_id

    def __repr__(self):
        return f'AuditEntry(height={self.block_height}, tx={self.tx_id[:8]}..., salt={self.salt.hex()})'


def _leaves(body, key: str = '') -> Iterator[Tuple[str, object]]:
    if isinstance(body, dict):
        for k, v in body.items():
            yield from _leaves(v, k)
    elif isinstance(body, list):
        for v in body:
            yield from _leaves(v, key)
    else:
        yield key, body


def find_leaks(body: Dict, patterns: Iterable[bytes]) -> List[bytes]:
    """
    patterns found inside ``body``

    a plain leaf equal to a pattern is a leak whatever its length, patterns of ``MIN_LEAK_PATTERN``
    bytes or more are also searched inside every leaf, hex fields on their decoded bytes
    """
    found = []
    patterns = list(patterns)
    for key, value in _leaves(body):
        if value is None or isinstance(value, bool) or key in SKIPPED_FIELDS:
            continue
        data = None
        if key in BINARY_FIELDS and isinstance(value, str):
            try:
                data = bytes.fromhex(value)
            except ValueError:
                pass
        if data is None:
            data = encode_payload(value) if isinstance(value, (int, float, str)) else str(value).encode('utf-8')
            found.extend(p for p in patterns if p == data and p not in found)
        found.extend(p for p in patterns if len(p) >= MIN_LEAK_PATTERN and p in data and p not in found)
    return found


class Ledger:
    """
    Represents the shared audit trail all partners submit to.

    reminder: only the sequencer mutates a ledger, every call here happens on the simulation's one timeline
    """
    blocks: List[Block]
    contract_registry: Dict[str, EqualityContract]
    module_keys: Dict[str, bytes]
    capacity: int
    sequencer_id: str

    _pending: Deque[Transaction]
    _participants: Dict[str, Roles]
    _leak_patterns: List[bytes]
    _event_handlers: List[TypeEventHandler]

    def __init__(self, *, capacity: int = DEFAULT_BLOCK_CAPACITY, sequencer_id: str = 'sequencer'):
        if capacity < 1:
            raise ValueError('block capacity must be >= 1')
        self.capacity = capacity
        self.sequencer_id = sequencer_id
        self.blocks = []
        self.contract_registry = {}
        self.module_keys = {}
        self._pending = deque()
        self._participants = {sequencer_id: Roles.SEQUENCER}
        self._leak_patterns = []
        self._event_handlers = []

    # ------------------------------------------------------------------
    # participants and guards
    # ------------------------------------------------------------------

    def register_participant(self, participant_id: str, role: Union[Roles, str], *, now: int = 0):
        """register a participant and record it, so a reloaded ledger knows it too"""
        role = Roles(role)
        if self._participants.get(participant_id) == role:
            return
        self._participants[participant_id] = role
        self._append_internal(Transaction(kind=TxKinds.CERTIFICATION, sender_id=self.sequencer_id, timestamp=now,
                                          body={'record': 'participant_registered',
                                                'participant_id': participant_id, 'role': role.value}))
        log.debug(f'participant {participant_id} registered as {role.value}')

    def is_registered(self, participant_id: str) -> bool:
        return participant_id in self._participants

    def role_of(self, participant_id: str) -> Optional[Roles]:
        return self._participants.get(participant_id)

    def participants(self, role: Roles = None) -> List[str]:
        return [p for p, r in self._participants.items() if role is None or r == role]

    def register_leak_pattern(self, pattern: Union[bytes, str]):
        """
        raw bytes that must never appear in an Evidence or ContractInput body
        """
        if isinstance(pattern, str):
            pattern = pattern.encode('utf-8')
        if pattern not in self._leak_patterns:
            self._leak_patterns.append(pattern)

    def on_contract_event(self, handler: TypeEventHandler) -> TypeEventHandler:
        """decorator, ``handler(event_tx, action)`` runs for every contract event emitted at sealing"""
        self._event_handlers.append(handler)
        return handler

    # ------------------------------------------------------------------
    # write path
    # ------------------------------------------------------------------

    def submit_transaction(self, tx: Transaction) -> Receipt:
        """
        put ``tx`` into the pending pool, it goes into the next sealed block

        :raise Ledger.UnknownSender: sender not registered
        :raise Ledger.MalformedTransaction: tx_id does not recompute
        :raise Ledger.LeakRejected: a registered raw payload pattern is inside the body
        """
        if not self.is_registered(tx.sender_id):
            raise Ledger.UnknownSender(f'sender {tx.sender_id!r} is not a registered participant')
        if tx.tx_id != tx.compute_id():
            raise Ledger.MalformedTransaction(f'tx_id {tx.tx_id} does not match the transaction body')
        if tx.kind in (TxKinds.EVIDENCE, TxKinds.CONTRACT_INPUT):
            leaks = find_leaks(tx.body, self._leak_patterns)
            if leaks:
                raise Ledger.LeakRejected(f'{tx.kind.value} tx from {tx.sender_id} carries raw payload bytes')
        self._pending.append(tx)
        log.debug(f'tx {tx.tx_id[:8]} ({tx.kind.value}) from {tx.sender_id} pending')
        return Receipt(tx.tx_id, pending=True)

    def _append_internal(self, tx: Transaction):
        """sequencer-originated records skip the sender guards"""
        self._pending.append(tx)

    @property
    def pending(self) -> List[Transaction]:
        return list(self._pending)

    def seal_block(self, now: int = None, *, force: bool = False) -> Optional[Block]:
        """
        seal up to ``capacity`` pending transactions into a new block

        :param now: sealing tick, defaults to the next height
        :param force: seal an empty block when nothing is pending
        :return: the new block, None if nothing pending and not forced
        """
        if not self._pending and not force:
            return None
        txs = [self._pending.popleft() for _ in range(min(self.capacity, len(self._pending)))]
        block = Block(height=len(self.blocks),
                      prev_hash=self.blocks[-1].block_hash if self.blocks else ZERO_DIGEST,
                      sealed_at=len(self.blocks) if now is None else now,
                      txs=txs)
        self.blocks.append(block)
        log.debug(f'[ seal ] block {block.height} with {len(txs)} txs: {block.block_hash[:12]}')

        for tx in txs:
            self._apply_record(tx)
            if tx.kind == TxKinds.CONTRACT_INPUT:
                self._evaluate_contract_input(tx, block.sealed_at)
        return block

    def _evaluate_contract_input(self, tx: Transaction, now: int):
        contract = self.contract_registry.get(tx.body.get('contract_id'))
        if contract is None:
            log.warning(f'contract input {tx.tx_id[:8]} targets unknown contract {tx.body.get("contract_id")}')
            return
        try:
            value = bytes.fromhex(tx.body['value'])
        except (KeyError, ValueError):
            log.warning(f'contract input {tx.tx_id[:8]} carries no digest')
            return
        action = contract.evaluate(value)
        if action is None:
            return
        event = Transaction(kind=TxKinds.CONTRACT_EVENT, sender_id=self.sequencer_id, timestamp=now,
                            body={'contract_id': contract.contract_id, 'input_tx_id': tx.tx_id,
                                  'action': action._repr})
        self._append_internal(event)
        log.info(f'contract {contract.contract_id} fired {action.kind.value} -> {action.target_id}')
        for handler in self._event_handlers:
            try:
                handler(event, action)
            except Exception as e:
                log.exception(f'error raised during contract event handling', exc_info=e)

    def _apply_record(self, tx: Transaction):
        """keep derived state in step with sealed registry records"""
        if tx.kind != TxKinds.CERTIFICATION:
            return
        record = tx.body.get('record')
        if record == 'participant_registered':
            self._participants[tx.body['participant_id']] = Roles(tx.body['role'])
        elif record == 'contract_deployed':
            contract = EqualityContract.from_repr(tx.body['contract'])
            self.contract_registry.setdefault(contract.contract_id, contract)
        elif record == 'module_registered':
            self.module_keys[tx.body['module_id']] = bytes.fromhex(tx.body['public_key'])

    # ------------------------------------------------------------------
    # read path
    # ------------------------------------------------------------------

    def transactions(self, kind: TxKinds = None, *,
                     include_pending: bool = False) -> Iterator[Tuple[Optional[int], Transaction]]:
        """
        iterate ``(block_height, tx)`` in chain order, pending ones come last with height None
        """
        for block in self.blocks:
            for tx in block.txs:
                if kind is None or tx.kind == kind:
                    yield block.height, tx
        if include_pending:
            for tx in list(self._pending):
                if kind is None or tx.kind == kind:
                    yield None, tx

    def verify_chain(self) -> Tuple[bool, Optional[int]]:
        """
        recompute every tx id, block hash and prev link

        :return: (True, None) if intact, else (False, lowest inconsistent height)
        """
        prev = ZERO_DIGEST
        for i, block in enumerate(self.blocks):
            intact = block.height == i \
                     and block.prev_hash == prev \
                     and all(tx.tx_id == tx.compute_id() for tx in block.txs) \
                     and block.block_hash == block.compute_hash()
            if not intact:
                log.warning(f'chain broken at height {i}')
                return False, i
            prev = block.block_hash
        return True, None

    def audit_lookup(self, commitment_hash: Union[str, bytes]) -> List[AuditEntry]:
        """all sealed Evidence commitments whose hash equals ``commitment_hash``"""
        if isinstance(commitment_hash, bytes):
            commitment_hash = commitment_hash.hex()
        commitment_hash = commitment_hash.lower()
        ret = []
        for height, tx in self.transactions(TxKinds.EVIDENCE):
            for c in tx.body.get('commitments', []):
                if c.get('hash') == commitment_hash:
                    ret.append(AuditEntry(height, tx.tx_id, Salt.from_hex(c['salt']), tx.body.get('module_id', '')))
        return ret

    @property
    def height(self) -> int:
        return len(self.blocks)

    # ------------------------------------------------------------------
    # persistence: one block object per line
    # ------------------------------------------------------------------

    def dumps(self) -> str:
        return ''.join(canonical_json(b).decode('utf-8') + '\n' for b in self.blocks)

    def dump(self, path: str):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.dumps())

    @staticmethod
    def loads(text: str, *, capacity: int = DEFAULT_BLOCK_CAPACITY, sequencer_id: str = 'sequencer') -> 'Ledger':
        """
        rebuild a ledger from its serialization, replaying registry records

        :raise Ledger.CorruptLedger: a line does not parse into a block
        """
        ledger = Ledger(capacity=capacity, sequencer_id=sequencer_id)
        for line_no, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                block = Block.from_repr(json.loads(line))
            except (ValueError, KeyError, TypeError) as e:
                raise Ledger.CorruptLedger(f'line {line_no} is not a block: {e}', height=line_no) from e
            ledger.blocks.append(block)
            for tx in block.txs:
                try:
                    ledger._apply_record(tx)
                except (ValueError, KeyError, TypeError) as e:
                    log.warning(f'skipping unreadable registry record {tx.tx_id[:8]}: {e}')
        return ledger

    @staticmethod
    def load(path: str, **kwargs) -> 'Ledger':
        with open(path, 'r', encoding='utf-8') as f:
            return Ledger.loads(f.read(), **kwargs)

    class UnknownSender(DCMBException):
        category = 'ledger'

    class MalformedTransaction(DCMBException):
        category = 'ledger'

    class LeakRejected(DCMBException):
        category = 'ledger'

    class CorruptLedger(DCMBException):
        category = 'chain'

        def __init__(self, message: str, height: int = None):
            super().__init__(message)
            self.height = height

    class ChainInvalid(DCMBException):
        category = 'chain'

        def __init__(self, message: str, height: int = None):
            super().__init__(message)
            self.height = height
