"""
the Data Communication Module for Blockchain

one instance per sending partner: each collection period it forwards raw records over the secure
channel, commits to them for the audit trail (batched into signed blobs), and maps values to
qualitative labels for equality contracts
"""
import json
import logging
import math
import random
from abc import ABC, abstractmethod
from typing import List, Tuple, Optional, Dict, Union, Iterable, TYPE_CHECKING

from Cryptodome.Hash import SHA256

from .cert import Cert
from .commitment import Commitment, HashParams, Salt, commit, generate_salt, constant_time_equal, Payload
from .interface import Representable, DCMBException, MessageTypes, EventTypes, TxKinds, make_event, canonical_json
from .ledger import Transaction
from .p2p import P2PMessage

if TYPE_CHECKING:
    from .ledger import Ledger

log = logging.getLogger(__name__)

DEFAULT_STAGES = ('forward', 'evidence', 'map')


class DataRecord:
    """
    one collected value, e.g. the count of work pieces a machine produced
    """
    source_id: str
    value: Union[int, float]
    collected_at: int

    def __init__(self, source_id: str, value: Union[int, float], collected_at: int = 0):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ValueError(f'record value must be a finite number, got {value!r}')
        self.source_id = source_id
        self.value = value
        self.collected_at = collected_at

    def __repr__(self):
        return f'DataRecord({self.source_id}={self.value}@{self.collected_at})'


class IntervalMapping(Representable):
    """
    ordered table of open intervals ``(lower, upper) -> label``
    """
    entries: Tuple[Tuple[float, float, str], ...]

    def __init__(self, entries: Iterable[Tuple[float, float, str]]):
        self.entries = tuple((lower, upper, label) for lower, upper, label in entries)
        self.validate()

    def validate(self):
        for lower, upper, label in self.entries:
            if not lower < upper:
                raise IntervalMapping.InvalidMapping(f'interval for {label!r} needs lower < upper')
        ordered = sorted(self.entries, key=lambda e: e[0])
        for (_, upper, a), (lower, _, b) in zip(ordered, ordered[1:]):
            # open intervals may share an endpoint
            if lower < upper:
                raise IntervalMapping.InvalidMapping(f'intervals for {a!r} and {b!r} overlap')

    def map(self, value: Union[int, float]) -> Optional[str]:
        for lower, upper, label in self.entries:
            if lower < value < upper:
                return label
        return None

    @property
    def labels(self) -> List[str]:
        return [label for _, _, label in self.entries]

    @staticmethod
    def from_config(entries: List) -> 'IntervalMapping':
        """``[[5300, 5400, "Maintenance imminent"], ...]`` or ``[{"lower":..,"upper":..,"label":..}]``"""
        return IntervalMapping((e['lower'], e['upper'], e['label']) if isinstance(e, dict) else tuple(e)
                               for e in entries)

    @property
    def _repr(self) -> List:
        return [[lower, upper, label] for lower, upper, label in self.entries]

    class InvalidMapping(DCMBException):
        category = 'config'


def map_to_interval(value: Union[int, float], mapping: IntervalMapping) -> Optional[str]:
    """the label whose open interval strictly contains ``value``, None if there is none"""
    return mapping.map(value)


class EvidenceBlob(Representable):
    """
    `Standard Object`

    a batch of message commitments signed as one unit
    """
    module_id: str
    commitments: Tuple[Commitment, ...]
    blob_digest: bytes
    signature: bytes

    def __init__(self, **kwargs):
        self.module_id = kwargs.get('module_id', '')
        self.commitments = tuple(kwargs.get('commitments', ()))
        self.blob_digest = kwargs.get('blob_digest') or EvidenceBlob.compute_digest(self.commitments)
        self.signature = kwargs.get('signature', b'')

    @staticmethod
    def compute_digest(commitments: Iterable[Commitment]) -> bytes:
        return SHA256.new(canonical_json(list(commitments))).digest()

    @property
    def _repr(self) -> Dict:
        return {'module_id': self.module_id, 'commitments': [c._repr for c in self.commitments],
                'blob_digest': self.blob_digest.hex(), 'signature': self.signature.hex()}

    @staticmethod
    def from_repr(d: Dict) -> 'EvidenceBlob':
        return EvidenceBlob(module_id=d.get('module_id', ''),
                            commitments=[Commitment.from_repr(c) for c in d['commitments']],
                            blob_digest=bytes.fromhex(d['blob_digest']),
                            signature=bytes.fromhex(d['signature']))

    def __len__(self):
        return len(self.commitments)


def seal_blob(pending: List[Commitment], cert: Cert, module_id: str = '') -> EvidenceBlob:
    """
    sign the pending commitments as one blob and clear ``pending``

    :raise Cert.SigningKeyUnavailable: ``cert`` holds no private key, ``pending`` is left untouched
    """
    if not pending:
        raise ValueError('nothing pending to seal')
    digest = EvidenceBlob.compute_digest(pending)
    signature = cert.sign(digest)
    blob = EvidenceBlob(module_id=module_id, commitments=list(pending), blob_digest=digest, signature=signature)
    pending.clear()
    return blob


def verify_blob(blob: EvidenceBlob, public_key: bytes) -> bool:
    """True iff the digest recomputes over the ordered commitments and the signature verifies"""
    if not constant_time_equal(EvidenceBlob.compute_digest(blob.commitments), blob.blob_digest):
        return False
    return Cert.verify_with(public_key, blob.blob_digest, blob.signature)


def derive_build_digest(source: Union[str, bytes]) -> str:
    """
    the deterministic "build" of a module: its binary digest is derived from its source artifact
    """
    if isinstance(source, str):
        source = source.encode('utf-8')
    return SHA256.new(b'dcmb-build\x00' + source).hexdigest()


def source_digest(source: Union[str, bytes]) -> str:
    if isinstance(source, str):
        source = source.encode('utf-8')
    return SHA256.new(source).hexdigest()


class ModuleConfig:
    """
    `Standard Object`

    how one DCMB instance is set up, ``collection_period`` in ticks (1 tick = 1 hour)
    """
    module_id: str
    owner_id: str
    collection_period: int
    batch_size: int
    mapping: IntervalMapping
    peer_id: str
    contract_id: str
    provisioning_salt: Salt
    hash_params_id: str
    stages: Tuple[str, ...]
    valid_range: Optional[Tuple[float, float]]
    source: str
    behavior: str
    audit_salt: Optional[Salt]

    def __init__(self, **kwargs):
        self.module_id = kwargs.get('module_id', '')
        self.owner_id = kwargs.get('owner_id', '')
        self.collection_period = kwargs.get('collection_period', 12)
        self.batch_size = kwargs.get('batch_size', 1)
        self.mapping = kwargs.get('mapping') or IntervalMapping([])
        self.peer_id = kwargs.get('peer_id', '')
        self.contract_id = kwargs.get('contract_id', '')
        self.provisioning_salt = Salt(kwargs.get('provisioning_salt', b''))
        self.hash_params_id = kwargs.get('hash_params_id', 'production')
        self.stages = tuple(kwargs.get('stages', DEFAULT_STAGES))
        valid_range = kwargs.get('valid_range')
        self.valid_range = tuple(valid_range) if valid_range else None
        self.source = kwargs.get('source', '')
        self.behavior = kwargs.get('behavior', 'compliant')
        # reused for every audit commitment in literal replay mode
        audit_salt = kwargs.get('audit_salt')
        self.audit_salt = Salt(audit_salt) if audit_salt is not None else None
        self.validate()

    def validate(self):
        if self.collection_period < 1 or self.batch_size < 1:
            raise ModuleConfig.InvalidConfig(f'{self.module_id}: collection_period and batch_size must be >= 1')
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ModuleConfig.InvalidConfig(f'{self.module_id}: unknown stages {sorted(unknown)}')
        if 'map' in self.stages and (not self.contract_id or not self.provisioning_salt):
            raise ModuleConfig.InvalidConfig(f'{self.module_id}: map stage needs contract_id and provisioning_salt')
        if self.behavior not in ('compliant', 'leaky'):
            raise ModuleConfig.InvalidConfig(f'{self.module_id}: unknown behavior {self.behavior!r}')

    @property
    def build_digest(self) -> str:
        return derive_build_digest(self.source)

    class InvalidConfig(DCMBException):
        category = 'config'


class TickOutput:
    """what one ``sender_tick`` hands to the network and the ledger, transactions in submission order"""
    p2p_messages: List[P2PMessage]
    transactions: List[Transaction]
    events: List[Dict]

    def __init__(self):
        self.p2p_messages = []
        self.transactions = []
        self.events = []

    def extend(self, other: 'TickOutput') -> 'TickOutput':
        self.p2p_messages.extend(other.p2p_messages)
        self.transactions.extend(other.transactions)
        self.events.extend(other.events)
        return self

    @property
    def evidence_txs(self) -> List[Transaction]:
        return [t for t in self.transactions if t.kind == TxKinds.EVIDENCE]

    @property
    def contract_txs(self) -> List[Transaction]:
        return [t for t in self.transactions if t.kind == TxKinds.CONTRACT_INPUT]

    def is_empty(self) -> bool:
        return not (self.p2p_messages or self.transactions or self.events)


class _RecordContext:
    """state one record carries through the stages"""

    def __init__(self, record: DataRecord, salt: Salt, now: int):
        self.record = record
        self.salt = salt
        self.now = now


class Stage(ABC):
    """
    one step of the module pipeline, returns False to stop the record here
    """
    name: str

    @abstractmethod
    def process(self, module: 'DataCommunicationModule', ctx: _RecordContext, out: TickOutput) -> bool:
        raise NotImplementedError


class ValidateStage(Stage):
    name = 'validate'

    def process(self, module, ctx, out):
        rng = module.config.valid_range
        if rng and not rng[0] <= ctx.record.value <= rng[1]:
            out.events.append(make_event(EventTypes.RECORD_REJECTED, ctx.now, module_id=module.module_id,
                                         source_id=ctx.record.source_id))
            log.info(f'{module.module_id} rejected a record of {ctx.record.source_id}: outside {rng}')
            return False
        return True


class ForwardStage(Stage):
    """raw pass-through over the secure channel, with the salt the receiver needs to prove it later"""
    name = 'forward'

    def process(self, module, ctx, out):
        payload = json.dumps({'module_id': module.module_id, 'source_id': ctx.record.source_id,
                              'value': ctx.record.value, 'collected_at': ctx.record.collected_at,
                              'salt': ctx.salt.hex()}, sort_keys=True).encode('utf-8')
        out.p2p_messages.append(P2PMessage(msg_id=module.next_msg_id(), type=MessageTypes.DATA,
                                           from_id=module.config.owner_id, to_id=module.config.peer_id,
                                           payload=payload, enqueued_at=ctx.now))
        return True


class EvidenceStage(Stage):
    name = 'evidence'

    def process(self, module, ctx, out):
        module.pending.append(commit(ctx.record.value, ctx.salt, module.params))
        module.pending_values.append(ctx.record.value)
        if len(module.pending) >= module.config.batch_size:
            module.emit_blob(ctx.now, out)
        return True


class MapStage(Stage):
    name = 'map'

    def process(self, module, ctx, out):
        label = map_to_interval(ctx.record.value, module.config.mapping)
        if label is None:
            out.events.append(make_event(EventTypes.UNMAPPED_VALUE, ctx.now, module_id=module.module_id,
                                         source_id=ctx.record.source_id))
            log.info(f'{module.module_id}: value of {ctx.record.source_id} matches no interval')
            return True
        digest = commit(label, module.config.provisioning_salt, module.params).hash
        tx = Transaction(kind=TxKinds.CONTRACT_INPUT, sender_id=module.config.owner_id, timestamp=ctx.now,
                         body={'contract_id': module.config.contract_id, 'module_id': module.module_id,
                               'value': digest.hex()})
        out.transactions.append(tx)
        return True


STAGES = {s.name: s for s in (ValidateStage(), ForwardStage(), EvidenceStage(), MapStage())}


class DataCommunicationModule:
    """
    Represents one running DCMB instance, it owns its pending batch and nothing else
    """
    config: ModuleConfig
    cert: Cert
    params: HashParams
    pending: List[Commitment]
    pending_values: List[Payload]

    def __init__(self, config: ModuleConfig, cert: Cert, params: HashParams, *,
                 rng: random.Random = None, paper_faithful: bool = False):
        """
        :param rng: seeded source for salts in simulation mode, None for the OS source
        :param paper_faithful: reuse ``config.audit_salt`` for every audit commitment
        """
        if paper_faithful and config.audit_salt is None:
            raise ModuleConfig.InvalidConfig(f'{config.module_id}: paper-faithful mode needs an audit_salt')
        self.config = config
        self.cert = cert
        self.params = params
        self.paper_faithful = paper_faithful
        self.pending = []
        self.pending_values = []
        self._rng = rng
        self._seq = 0
        self._stages = [STAGES[name] for name in config.stages]

    @property
    def module_id(self) -> str:
        return self.config.module_id

    @property
    def binary_digest(self) -> str:
        return self.config.build_digest

    def next_msg_id(self) -> str:
        self._seq += 1
        return f'{self.module_id}:{self._seq}'

    def _salt(self) -> Salt:
        if self.paper_faithful:
            return self.config.audit_salt
        return generate_salt(self._rng, self.params.salt_len)

    def sender_tick(self, records: List[DataRecord], now: int) -> TickOutput:
        """
        run every record through the pipeline stages

        blobs are sealed whenever the batch fills, a partial batch stays pending until ``flush``
        """
        out = TickOutput()
        for record in records:
            ctx = _RecordContext(record, self._salt(), now)
            for stage in self._stages:
                if not stage.process(self, ctx, out):
                    break
        return out

    def flush(self, now: int) -> TickOutput:
        """seal whatever is pending, called at the end of each collection period and of the run"""
        out = TickOutput()
        if self.pending:
            self.emit_blob(now, out)
        return out

    def emit_blob(self, now: int, out: TickOutput):
        values = list(self.pending_values)
        blob = seal_blob(self.pending, self.cert, self.module_id)
        self.pending_values.clear()
        body = dict(blob._repr, peer_id=self.config.peer_id)
        if self.config.behavior == 'leaky':
            # planted mutant for certification tests
            body['raw_values'] = values
        tx = Transaction(kind=TxKinds.EVIDENCE, sender_id=self.config.owner_id, timestamp=now, body=body)
        out.transactions.append(tx)
        out.events.append(make_event(EventTypes.BLOB_SEALED, now, module_id=self.module_id, size=len(blob),
                                     blob_digest=blob.blob_digest.hex()))
        log.debug(f'{self.module_id} sealed a blob of {len(blob)} commitments')

    def registration_tx(self, now: int = 0) -> Transaction:
        """records the module's public key so blobs can be verified from the ledger alone"""
        return Transaction(kind=TxKinds.CERTIFICATION, sender_id=self.config.owner_id, timestamp=now,
                           body={'record': 'module_registered', 'module_id': self.module_id,
                                 'public_key': self.cert.public_key.hex(), 'build_digest': self.binary_digest})

    class NotCertified(DCMBException):
        category = 'gate'


def attest_module(module_binary_digest: str, ledger: 'Ledger', module_id: str) -> bool:
    """
    the integrity half of a TEE: the running binary must be the one certified on-chain

    :raise DataCommunicationModule.NotCertified: no certified record for ``module_id``
    """
    from .certification import certified_build_digest

    certified = certified_build_digest(ledger, module_id)
    if certified is None:
        raise DataCommunicationModule.NotCertified(f'module {module_id} has no certification record')
    try:
        return constant_time_equal(bytes.fromhex(module_binary_digest), bytes.fromhex(certified))
    except ValueError:
        return False
