"""
the audit act: an auditor holding a ledger learns nothing until a partner discloses (payload, salt)
"""
import json
import logging
from typing import List, Tuple, Union, Dict

from ..commitment import HashParams, Payload, Salt, commit
from ..interface import Representable, TxKinds
from ..ledger import Ledger, AuditEntry

log = logging.getLogger(__name__)

Disclosure = Tuple[Payload, bytes]


class AuditResult(Representable):
    payload: Payload
    salt: Salt
    entries: List[AuditEntry]

    def __init__(self, payload: Payload, salt: bytes, entries: List[AuditEntry]):
        self.payload = payload
        self.salt = Salt(salt)
        self.entries = entries

    @property
    def verified(self) -> bool:
        return bool(self.entries)

    @property
    def _repr(self) -> Dict:
        return {'payload': self.payload, 'salt': self.salt.hex(),
                'result': 'verified' if self.verified else 'unverified',
                'blocks': [e.block_height for e in self.entries]}


def _params_by_salt(ledger: Ledger) -> Dict[bytes, List[str]]:
    """every params_id used with each salt on-chain"""
    ret = {}
    for _, tx in ledger.transactions(TxKinds.EVIDENCE):
        for c in tx.body.get('commitments', []):
            ids = ret.setdefault(bytes.fromhex(c['salt']), [])
            if c['params_id'] not in ids:
                ids.append(c['params_id'])
    return ret


def verify_audit(ledger: Union[Ledger, str], disclosures: List[Disclosure]) -> List[AuditResult]:
    """
    for each disclosed ``(payload, salt)`` find the Evidence commitments it opens

    only parameter sets actually used with the disclosed salt are tried, so each disclosure costs one
    hash per distinct parameter set

    :param ledger: a ledger or the path of a ledger file
    :raise Ledger.ChainInvalid: the chain does not verify
    """
    if isinstance(ledger, str):
        ledger = Ledger.load(ledger)
    valid, broken_at = ledger.verify_chain()
    if not valid:
        raise Ledger.ChainInvalid(f'chain broken at height {broken_at}, refusing to audit', height=broken_at)

    known = _params_by_salt(ledger)
    results = []
    for payload, salt in disclosures:
        entries = []
        for params_id in known.get(bytes(salt), []):
            digest = commit(payload, salt, HashParams.from_id(params_id)).hash
            entries.extend(ledger.audit_lookup(digest))
        results.append(AuditResult(payload, salt, entries))
        log.debug(f'audit of {salt.hex()}: {"verified" if entries else "unverified"}')
    return results


def load_disclosures(path: str) -> List[Disclosure]:
    """
    ``[{"payload": 5367, "salt": "fjpd7"}, {"payload": "5368", "salt": {"hex": "666a706437"}}]``
    """
    with open(path, 'r', encoding='utf-8') as f:
        entries = json.load(f)
    return [(e['payload'], Salt.from_config(e['salt'])) for e in entries]
