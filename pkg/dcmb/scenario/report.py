import logging
import os
from typing import List, Dict, Optional

from ..interface import Representable, EventTypes, TxKinds, canonical_json
from ..ledger import Ledger

log = logging.getLogger(__name__)

EVENT_LOG_FILE = 'events.ndjson'
LEDGER_FILE = 'ledger.ndjson'
REPORT_FILE = 'report.json'
SUMMARY_FILE = 'report.txt'


class RunLog:
    """
    every event of a run in the order it happened, written as one JSON object per line
    """
    records: List[Dict]

    def __init__(self):
        self.records = []

    def record(self, event: Dict):
        self.records.append(event)

    def extend(self, events: List[Dict]):
        self.records.extend(events)

    def of_type(self, type: EventTypes, **match) -> List[Dict]:
        return [e for e in self.records
                if e['type'] == type.value and all(e.get(k) == v for k, v in match.items())]

    def count(self, type: EventTypes, **match) -> int:
        return len(self.of_type(type, **match))

    def dumps(self) -> str:
        return ''.join(canonical_json(e).decode('utf-8') + '\n' for e in self.records)

    def dump(self, path: str):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.dumps())

    def __len__(self):
        return len(self.records)


class RunReport(Representable):
    """
    `Standard Object`

    what a run did, every count here is derived from the ledger or the run log
    """

    def __init__(self, **kwargs):
        self.ticks: int = kwargs.get('ticks', 0)
        self.blocks: int = kwargs.get('blocks', 0)
        self.delivered: int = kwargs.get('delivered', 0)
        self.dropped: Dict[str, int] = kwargs.get('dropped', {})
        self.evidence_txs: int = kwargs.get('evidence_txs', 0)
        self.contract_inputs: int = kwargs.get('contract_inputs', 0)
        self.contract_events: List[Dict] = kwargs.get('contract_events', [])
        self.notifications: List[Dict] = kwargs.get('notifications', [])
        self.actions_triggered: List[Dict] = kwargs.get('actions_triggered', [])
        self.unmapped: int = kwargs.get('unmapped', 0)
        self.rejected_records: int = kwargs.get('rejected_records', 0)
        self.audit: Dict[str, int] = kwargs.get('audit', {'disclosed': 0, 'verified': 0})
        self.chain_valid: bool = kwargs.get('chain_valid', True)
        self.chain_broken_at: Optional[int] = kwargs.get('chain_broken_at')
        self.ledger_file: str = kwargs.get('ledger_file', LEDGER_FILE)
        self.event_log: str = kwargs.get('event_log', EVENT_LOG_FILE)

    @staticmethod
    def build(ticks: int, ledger: Ledger, run_log: RunLog, audit: Dict[str, int]) -> 'RunReport':
        valid, broken_at = ledger.verify_chain()
        dropped = {}
        for e in run_log.of_type(EventTypes.MESSAGE_DROPPED):
            dropped[e['outcome']] = dropped.get(e['outcome'], 0) + 1
        contract_events = []
        for height, tx in ledger.transactions(TxKinds.CONTRACT_EVENT):
            action = tx.body['action']
            contract_events.append({'contract_id': tx.body['contract_id'], 'kind': action['kind'],
                                    'target_id': action['target_id'], 'importance': action['importance'],
                                    'block': height, 'tick': tx.timestamp})
        strip = ('type',)
        return RunReport(
            ticks=ticks,
            blocks=ledger.height,
            delivered=run_log.count(EventTypes.MESSAGE_DELIVERED),
            dropped=dropped,
            evidence_txs=sum(1 for _ in ledger.transactions(TxKinds.EVIDENCE)),
            contract_inputs=sum(1 for _ in ledger.transactions(TxKinds.CONTRACT_INPUT)),
            contract_events=contract_events,
            notifications=[{k: v for k, v in e.items() if k not in strip}
                           for e in run_log.of_type(EventTypes.NOTIFICATION_DELIVERED)],
            actions_triggered=[{k: v for k, v in e.items() if k not in strip}
                               for e in run_log.of_type(EventTypes.ACTION_TRIGGERED)],
            unmapped=run_log.count(EventTypes.UNMAPPED_VALUE),
            rejected_records=run_log.count(EventTypes.RECORD_REJECTED),
            audit=audit,
            chain_valid=valid,
            chain_broken_at=broken_at)

    @property
    def messages(self) -> int:
        """messages that reached a terminal state"""
        return self.delivered + sum(self.dropped.values())

    @property
    def _repr(self) -> Dict:
        return {'ticks': self.ticks, 'blocks': self.blocks, 'delivered': self.delivered, 'dropped': self.dropped,
                'evidence_txs': self.evidence_txs, 'contract_inputs': self.contract_inputs,
                'contract_events': self.contract_events, 'notifications': self.notifications,
                'actions_triggered': self.actions_triggered, 'unmapped': self.unmapped,
                'rejected_records': self.rejected_records, 'audit': self.audit, 'chain_valid': self.chain_valid,
                'chain_broken_at': self.chain_broken_at, 'ledger_file': self.ledger_file,
                'event_log': self.event_log}

    def to_text(self) -> str:
        lines = [f'ticks             {self.ticks}',
                 f'blocks            {self.blocks}',
                 f'chain             {"valid" if self.chain_valid else f"BROKEN at height {self.chain_broken_at}"}',
                 f'messages          {self.delivered} delivered, '
                 + (', '.join(f'{n} {k}' for k, n in sorted(self.dropped.items())) or '0 dropped'),
                 f'evidence txs      {self.evidence_txs}',
                 f'contract inputs   {self.contract_inputs}',
                 f'unmapped values   {self.unmapped}',
                 f'audit             {self.audit.get("verified", 0)}/{self.audit.get("disclosed", 0)} verified',
                 f'contract events   {len(self.contract_events)}']
        for e in self.contract_events:
            lines.append(f'  {e["contract_id"]}: {e["kind"]} -> {e["target_id"]} ({e["importance"]}) '
                         f'at tick {e["tick"]}')
        lines.append(f'notifications     {len(self.notifications)}')
        for n in self.notifications:
            lines.append(f'  -> {n["target_id"]} ({n["importance"]}) at tick {n["tick"]}')
        if self.actions_triggered:
            lines.append(f'receiver actions  {len(self.actions_triggered)}')
        lines.append(f'event log         {self.event_log}')
        return '\n'.join(lines) + '\n'

    def dump(self, out_dir: str):
        with open(os.path.join(out_dir, REPORT_FILE), 'wb') as f:
            f.write(canonical_json(self) + b'\n')
        with open(os.path.join(out_dir, SUMMARY_FILE), 'w', encoding='utf-8') as f:
            f.write(self.to_text())
        log.info(f'report written to {out_dir}')
