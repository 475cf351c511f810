import asyncio
import logging
import os
import random
from typing import Dict, List, Callable, Optional

from .audit import verify_audit
from .config import ScenarioConfig, SENDER_ROLES
from .report import RunLog, RunReport, EVENT_LOG_FILE, LEDGER_FILE
from ..cert import Cert
from ..certification import CertificationAuthority, QuorumRule, ValidationSubmission, CHECKS, DEFAULT_CHECKS, \
    CertificationRecord, deployment_gate
from ..commitment import HashParams, Commitment, encode_payload
from ..contracts import ActionSpec, deploy_contract, receiver_dispatch
from ..interface import AsyncRunnable, DCMBException, EventTypes, MessageTypes, ActionKinds, TxKinds, CertStatus, \
    make_event, canonical_json
from ..ledger import Ledger, Transaction, Block
from ..module import DataCommunicationModule, DataRecord, ModuleConfig, TickOutput, attest_module
from ..p2p import Network, P2PMessage
from ..partner import Partner

log = logging.getLogger(__name__)

TypeEventHandler = Callable[[Dict], None]


class Simulator(AsyncRunnable):
    """
    Drives one scenario on a virtual clock, 1 tick = 1 simulated hour

    every tick: partitions, channel caches, data injection, modules on their period, block sealing,
    partner inboxes, receiver dispatch. Nothing here reads a wall clock, so a seed fixes the whole run
    """
    config: ScenarioConfig
    ledger: Ledger
    network: Network
    authority: Optional[CertificationAuthority]
    partners: Dict[str, Partner]
    modules: Dict[str, DataCommunicationModule]
    certs: Dict[str, Cert]
    run_log: RunLog
    out_dir: Optional[str]

    _inbox: Dict[str, List[DataRecord]]
    _event_index: Dict[str, List[TypeEventHandler]]
    _dispatched: int
    _now: int

    def __init__(self, config: ScenarioConfig, *, out_dir: str = None):
        """
        :param out_dir: where ledger, event log and report are written, nothing is written if None
        """
        self.config = config
        self.out_dir = out_dir
        self.run_log = RunLog()
        self.ledger = Ledger(capacity=config.block_capacity, sequencer_id=config.sequencer_id)
        self.network = Network(self.run_log.records)
        self.authority = None
        self.partners = {}
        self.modules = {}
        self.certs = {}

        self._inbox = {}
        self._event_index = {}
        self._dispatched = 0
        self._now = 0
        self._data_rng = self._rng('data')
        self._is_running = False

        self.ledger.on_contract_event(self._on_contract_event)

    # ------------------------------------------------------------------
    # user hooks
    # ------------------------------------------------------------------

    def add_event_handler(self, type: EventTypes, handler: TypeEventHandler):
        self._event_index.setdefault(type.value, []).append(handler)
        log.debug(f'event_handler {handler.__qualname__} for {type} added')
        return handler

    def on_event(self, type: EventTypes):
        """
        decorator, register a function to see run log events of the type, called once per event
        """
        return lambda func: self.add_event_handler(type, func)

    def _dispatch_events(self):
        while self._dispatched < len(self.run_log.records):
            event = self.run_log.records[self._dispatched]
            self._dispatched += 1
            for handler in self._event_index.get(event['type'], []):
                try:
                    handler(event)
                except Exception as e:
                    log.exception(f'error raised during event handling', exc_info=e)

    def _rng(self, *scope: str) -> random.Random:
        return random.Random(':'.join([str(self.config.rng_seed), *scope]))

    # ------------------------------------------------------------------
    # setup, everything before tick 0
    # ------------------------------------------------------------------

    def setup(self):
        """
        :raise Simulator.GateDenied: a module may not be deployed
        """
        c = self.config
        self._register_participants()

        for from_id, to_id, policy in c.channels:
            self._add_channel(from_id, to_id, policy)
        for contract in c.contracts:
            for _, action in contract.conditions:
                if action.kind == ActionKinds.NOTIFY and not self.network.has_channel(c.sequencer_id,
                                                                                      action.target_id):
                    self._add_channel(c.sequencer_id, action.target_id)

        self._certify()
        for m in c.modules:
            self._deploy_module(m)
        for contract in c.contracts:
            deploy_contract(self.ledger, contract, CertStatus(c.contract_status[contract.contract_id]))
        for module in self.modules.values():
            self.ledger.submit_transaction(module.registration_tx(0))
        self._seal_all(0)
        self._dispatch_events()
        log.info(f'[ init ] {len(self.modules)} modules deployed, {len(c.contracts)} contracts, '
                 f'{len(self.network.channels)} channels')

    def _register_participants(self):
        for pid, role in self.config.participants.items():
            self.ledger.register_participant(pid, role)
            self.certs[pid] = Cert.generate(pid, self._rng('cert', pid))
            if role in SENDER_ROLES:
                self.partners[pid] = Partner(pid, role)
                self._register_partner_handlers(self.partners[pid])
        for m in self.config.modules:
            for label in m.mapping.labels:
                self.ledger.register_leak_pattern(label)
        self.ledger.seal_block(0)

    def _add_channel(self, from_id: str, to_id: str, policy=None):
        partner = self.partners.get(to_id)
        self.network.add_channel(from_id, to_id, policy, partner.deliver if partner else None)

    def _certify(self, module_id: str = None) -> List[CertificationRecord]:
        """run the configured rounds, or only the one for ``module_id``"""
        c = self.config
        rounds = [r for r in c.rounds if module_id is None or r.module_id == module_id]
        if not rounds:
            return []
        self.authority = CertificationAuthority(self.ledger, c.validators, quorum=QuorumRule(c.quorum_threshold),
                                                window=c.voting_window)
        records = []
        for r in rounds:
            module = c.module(r.module_id)
            submission = ValidationSubmission(config=module, validation_dataset_id=r.dataset_id,
                                              requirements_id=r.requirements_id, visibility=r.visibility,
                                              params=c.params(module.hash_params_id))
            dataset = [DataRecord(f'{r.dataset_id}', v, 0) for v in r.dataset]
            checks = [CHECKS[i] for i in r.checks] or DEFAULT_CHECKS
            record = self.authority.certify(submission, self.certs[r.submitter_id], dataset, checks)
            log.info(f'[ cert ] {r.module_id}: {record.status.value}')
            records.append(record)
        self.run_log.extend(self.authority.events)
        return records

    def _deploy_module(self, m: ModuleConfig):
        runtime = ModuleConfig(**dict(vars(m), source=self.config.runtime_sources.get(m.module_id, m.source)))
        module = DataCommunicationModule(runtime, Cert.generate(m.module_id, self._rng('module-key', m.module_id)),
                                         self.config.params(m.hash_params_id), rng=self._rng('salt', m.module_id),
                                         paper_faithful=self.config.paper_faithful)
        decision = deployment_gate(self.ledger, m.module_id, module.binary_digest)
        if not decision:
            self.run_log.record(make_event(EventTypes.GATE_DENIED, 0, module_id=m.module_id, reason=decision.reason))
            self._dispatch_events()
            raise Simulator.GateDenied(f'{m.module_id} may not be deployed: {decision.reason}')
        self.run_log.record(make_event(EventTypes.GATE_ALLOWED, 0, module_id=m.module_id))

        attested = attest_module(module.binary_digest, self.ledger, m.module_id)
        self.run_log.record(make_event(EventTypes.ATTESTED, 0, module_id=m.module_id, result=attested))
        if not attested:
            raise Simulator.GateDenied(f'{m.module_id} failed attestation')
        self.modules[m.module_id] = module
        self._inbox[m.module_id] = []
        log.info(f'[ gate ] {m.module_id} allowed and attested')

    # ------------------------------------------------------------------
    # the tick loop
    # ------------------------------------------------------------------

    def _apply_partitions(self, now: int):
        down = {(p.from_id, p.to_id) for p in self.config.partitions if p.active(now)}
        for channel in self.network.channels:
            channel.set_availability('partitioned' if (channel.from_id, channel.to_id) in down else 'available')

    def _inject(self, now: int):
        for module_id, source in self.config.data.items():
            records = source.records_at(now, self._data_rng)
            for r in records:
                self.ledger.register_leak_pattern(encode_payload(r.value))
            self._inbox[module_id].extend(records)

    def _fire(self, module: DataCommunicationModule, now: int):
        records, self._inbox[module.module_id] = self._inbox[module.module_id], []
        out = module.sender_tick(records, now).extend(module.flush(now))
        self._route(out, now)

    def _route(self, out: TickOutput, now: int):
        self.run_log.extend(out.events)
        for tx in out.transactions:
            self.ledger.submit_transaction(tx)
        for msg in out.p2p_messages:
            self.network.send(msg, now)

    def _seal_all(self, now: int) -> List[Block]:
        blocks = []
        while self.ledger.pending:
            block = self.ledger.seal_block(now)
            blocks.append(block)
            self.run_log.record(make_event(EventTypes.BLOCK_SEALED, now, height=block.height, txs=len(block.txs),
                                           block_hash=block.block_hash))
        return blocks

    def _on_contract_event(self, event: Transaction, action: ActionSpec):
        contract_id = event.body['contract_id']
        self.run_log.record(make_event(EventTypes.CONTRACT_FIRED, event.timestamp, contract_id=contract_id,
                                       kind=action.kind.value, target_id=action.target_id,
                                       importance=action.importance.value))
        if action.kind != ActionKinds.NOTIFY:
            return
        payload = P2PMessage(msg_id=f'notify:{event.tx_id[:16]}', type=MessageTypes.NOTIFY,
                             from_id=self.ledger.sequencer_id, to_id=action.target_id,
                             payload=canonical_json({'contract_id': contract_id, 'event_tx_id': event.tx_id,
                                                  'action': action._repr}))
        self.network.send(payload, event.timestamp)

    def _register_partner_handlers(self, partner: Partner):
        @partner.on_message(MessageTypes.NOTIFY)
        async def notified(msg: P2PMessage):
            body = msg.body
            action = ActionSpec.from_repr(body['action'])
            self.run_log.record(make_event(EventTypes.NOTIFICATION_DELIVERED, self._now,
                                           contract_id=body['contract_id'], target_id=partner.participant_id,
                                           importance=action.importance.value, message=action.message))
            log.info(f'{partner.participant_id} notified by {body["contract_id"]} ({action.importance.value})')

    def _receiver_dispatch(self, blocks: List[Block], now: int):
        for block in blocks:
            for tx in block.txs:
                if tx.kind != TxKinds.EVIDENCE:
                    continue
                candidates = self.config.receivers.get(tx.body.get('peer_id'), [])
                if not candidates:
                    continue
                for c in tx.body['commitments']:
                    commitment = Commitment.from_repr(c)
                    action = receiver_dispatch(commitment, candidates, HashParams.from_id(commitment.params_id))
                    if action is None:
                        continue
                    self.run_log.record(make_event(EventTypes.ACTION_TRIGGERED, now, partner_id=tx.body['peer_id'],
                                                   kind=action.kind.value, target_id=action.target_id,
                                                   importance=action.importance.value, evidence_tx_id=tx.tx_id))

    async def _step(self, now: int):
        self._now = now
        log.debug(f'[ tick ] {now}')
        self._apply_partitions(now)
        self.network.tick(now)
        self._inject(now)
        for module in self.modules.values():
            if (now + 1) % module.config.collection_period == 0:
                self._fire(module, now)
        blocks = self._seal_all(now) if (now + 1) % self.config.tick_period == 0 else []
        await self._drain_partners()
        self._receiver_dispatch(blocks, now)
        self._dispatch_events()

    async def _finish(self, now: int):
        """last period: whatever was collected is processed, every cache drained"""
        self._now = now
        self._apply_partitions(now)
        for module in self.modules.values():
            if self._inbox[module.module_id] or module.pending:
                self._fire(module, now)
        blocks = self._seal_all(now)
        self.network.drain(now)
        await self._drain_partners()
        self._receiver_dispatch(blocks, now)
        self._dispatch_events()

    async def _drain_partners(self):
        for partner in self.partners.values():
            await partner.start()

    def _self_audit(self) -> Dict[str, int]:
        """every partner discloses everything it received"""
        disclosures = [d for p in self.partners.values() for d in p.disclosures()]
        results = verify_audit(self.ledger, disclosures)
        return {'disclosed': len(results), 'verified': sum(1 for r in results if r.verified)}

    async def start(self) -> RunReport:
        if self._is_running:
            raise RuntimeError('this simulator is already running')
        self._is_running = True
        self.setup()
        for now in range(self.config.total_ticks):
            await self._step(now)
        await self._finish(self.config.total_ticks)

        report = RunReport.build(self.config.total_ticks, self.ledger, self.run_log, self._self_audit())
        if self.out_dir:
            os.makedirs(self.out_dir, exist_ok=True)
            self.ledger.dump(os.path.join(self.out_dir, LEDGER_FILE))
            self.run_log.dump(os.path.join(self.out_dir, EVENT_LOG_FILE))
            report.dump(self.out_dir)
        log.info(f'run finished: {report.blocks} blocks, {report.delivered} delivered, '
                 f'{len(report.contract_events)} contract events')
        return report

    def run(self) -> RunReport:
        if not self.loop:
            self.loop = asyncio.new_event_loop()
        return self.loop.run_until_complete(self.start())

    def certify(self, module_id: str) -> CertificationRecord:
        """
        only register participants and run the certification round of ``module_id``

        :raise ScenarioConfig.ConfigInvalid: no round configured for the module
        """
        self._register_participants()
        records = self._certify(module_id)
        if not records:
            raise ScenarioConfig.ConfigInvalid(f'certification: no round configured for {module_id!r}')
        self._dispatch_events()
        return records[-1]

    class GateDenied(DCMBException):
        category = 'gate'


def run(config: ScenarioConfig, *, out_dir: str = None) -> RunReport:
    """replay ``config`` and return its report"""
    return Simulator(config, out_dir=out_dir).run()
