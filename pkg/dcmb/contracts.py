"""
equality-only smart contracts

the only predicate a contract knows is "input digest == stored digest", which is what is left once
qualitative labels are hashed before they reach the chain
"""
import logging
from typing import List, Tuple, Optional, Dict, Union, Iterable, TYPE_CHECKING

from .commitment import Commitment, HashParams, Payload, Salt, commit, verify, constant_time_equal
from .interface import Representable, DCMBException, ActionKinds, ImportanceTypes, CertStatus, TxKinds

if TYPE_CHECKING:
    from .ledger import Ledger

log = logging.getLogger(__name__)

# condition keys that would express an ordering or range over the input
_RANGE_KEYS = frozenset({'lower', 'upper', 'min', 'max', 'gt', 'lt', 'ge', 'le', 'gte', 'lte', 'range',
                         'between', 'op', 'operator', 'predicate'})


class ActionSpec(Representable):
    """
    what a contract (or a receiver) does on a match
    """
    kind: ActionKinds
    target_id: str
    importance: ImportanceTypes
    message: str

    def __init__(self,
                 kind: Union[ActionKinds, str],
                 target_id: str,
                 importance: Union[ImportanceTypes, str] = ImportanceTypes.NORMAL,
                 message: str = ''):
        self.kind = ActionKinds(kind)
        self.target_id = target_id
        self.importance = ImportanceTypes(importance)
        self.message = message

    @property
    def _repr(self) -> Dict:
        return {'kind': self.kind.value, 'target_id': self.target_id, 'importance': self.importance.value,
                'message': self.message}

    @staticmethod
    def from_repr(d: Dict) -> 'ActionSpec':
        return ActionSpec(d['kind'], d['target_id'], d.get('importance', 'normal'), d.get('message', ''))

    def __eq__(self, other):
        return isinstance(other, ActionSpec) and self._repr == other._repr

    def __hash__(self):
        return hash((self.kind, self.target_id, self.importance, self.message))

    def __repr__(self):
        return f'ActionSpec({self.kind.value} -> {self.target_id}, {self.importance.value})'


class EqualityContract(Representable):
    """
    Represents a deployed contract: an ordered table of (stored digest, action)

    immutable once built, so ``evaluate`` is safe to call from anywhere
    """
    contract_id: str
    owner_id: str
    _conditions: Tuple[Tuple[bytes, ActionSpec], ...]

    def __init__(self, contract_id: str, owner_id: str, conditions: Iterable[Tuple[bytes, ActionSpec]]):
        self.contract_id = contract_id
        self.owner_id = owner_id
        self._conditions = tuple((bytes(d), a) for d, a in conditions)
        digests = [d for d, _ in self._conditions]
        if len(set(digests)) != len(digests):
            raise EqualityContract.DuplicateCondition(f'contract {contract_id} stores a digest twice')

    @property
    def conditions(self) -> Tuple[Tuple[bytes, ActionSpec], ...]:
        return self._conditions

    def evaluate(self, transaction_value: bytes) -> Optional[ActionSpec]:
        """
        first action whose stored digest equals ``transaction_value``, None if no entry matches
        """
        for stored, action in self._conditions:
            if constant_time_equal(stored, transaction_value):
                return action
        return None

    @staticmethod
    def from_definition(definition: Dict, params: HashParams) -> 'EqualityContract':
        """
        build a contract from its configuration, computing the condition digests

        definition::

            {"contract_id": "maintenance", "owner_id": "manufacturer", "provisioning_salt": "fjpd7",
             "conditions": [{"label": "Maintenance imminent", "action": "notify",
                             "target": "manufacturer", "importance": "high", "message": "..."}]}

        plaintext labels stop here, only their digests go into the contract

        :raise EqualityContract.UnsupportedPredicate: a condition asks for anything but equality
        """
        salt = Salt.from_config(definition['provisioning_salt'])
        conditions = []
        for i, cond in enumerate(definition.get('conditions', [])):
            bad = _RANGE_KEYS.intersection(cond)
            if bad:
                raise EqualityContract.UnsupportedPredicate(
                    f'contract {definition["contract_id"]} condition {i}: only equality is supported, '
                    f'got {sorted(bad)}')
            if 'label' not in cond:
                raise EqualityContract.UnsupportedPredicate(
                    f'contract {definition["contract_id"]} condition {i} has no label to match')
            action = ActionSpec(cond.get('action', ActionKinds.NOTIFY), cond['target'],
                                cond.get('importance', ImportanceTypes.NORMAL), cond.get('message', ''))
            conditions.append((commit(cond['label'], salt, params).hash, action))
        return EqualityContract(definition['contract_id'], definition['owner_id'], conditions)

    @property
    def _repr(self) -> Dict:
        return {'contract_id': self.contract_id, 'owner_id': self.owner_id,
                'conditions': [{'digest': d.hex(), 'action': a._repr} for d, a in self._conditions]}

    @staticmethod
    def from_repr(d: Dict) -> 'EqualityContract':
        return EqualityContract(d['contract_id'], d['owner_id'],
                                [(bytes.fromhex(c['digest']), ActionSpec.from_repr(c['action']))
                                 for c in d['conditions']])

    class DuplicateContract(DCMBException):
        category = 'contract'

    class DuplicateCondition(DCMBException):
        category = 'config'

    class EmptyConditionTable(DCMBException):
        category = 'contract'

    class UnsupportedPredicate(DCMBException):
        category = 'config'

    class NotCertified(DCMBException):
        category = 'gate'

    class UnknownTarget(DCMBException):
        category = 'contract'


def deploy_contract(ledger: 'Ledger', contract: EqualityContract, cert_status: CertStatus, *,
                    now: int = 0) -> str:
    """
    register ``contract`` on ``ledger`` and record the deployment as a Certification transaction

    a contract whose certification round rejected it can not be deployed, pending ones can

    :raise EqualityContract.EmptyConditionTable: nothing to match
    :raise EqualityContract.DuplicateContract: the id is taken
    :raise EqualityContract.NotCertified: ``cert_status`` is rejected
    """
    from .ledger import Transaction

    if not contract.conditions:
        raise EqualityContract.EmptyConditionTable(f'contract {contract.contract_id} has no conditions')
    if contract.contract_id in ledger.contract_registry:
        raise EqualityContract.DuplicateContract(f'contract {contract.contract_id} already deployed')
    if cert_status == CertStatus.REJECTED:
        raise EqualityContract.NotCertified(f'contract {contract.contract_id} was rejected by certification')
    for _, action in contract.conditions:
        if not ledger.is_registered(action.target_id):
            raise EqualityContract.UnknownTarget(
                f'contract {contract.contract_id} targets unregistered participant {action.target_id}')

    ledger.submit_transaction(Transaction(kind=TxKinds.CERTIFICATION, sender_id=contract.owner_id, timestamp=now,
                                          body={'record': 'contract_deployed', 'contract': contract._repr,
                                                'cert_status': CertStatus(cert_status).value}))
    ledger.contract_registry[contract.contract_id] = contract
    log.info(f'contract {contract.contract_id} deployed by {contract.owner_id} ({CertStatus(cert_status).value})')
    return contract.contract_id


def receiver_dispatch(evidence: Commitment,
                      known_candidates: List[Tuple[Payload, ActionSpec]],
                      params: HashParams) -> Optional[ActionSpec]:
    """
    the off-chain counterpart of ``evaluate``: the receiving partner tries the payloads it already
    knows against a commitment and acts on the first that opens it
    """
    for payload, action in known_candidates:
        if verify(evidence, payload, params):
            return action
    return None
