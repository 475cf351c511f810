import json
import pathlib
import random

import pytest

from dcmb import EventTypes, Ledger, Salt, ScenarioConfig, Simulator, TxKinds, run, verify_audit, load_disclosures
from dcmb.certification import GateDecision
from dcmb.ledger import find_leaks
from dcmb.scenario.report import LEDGER_FILE, EVENT_LOG_FILE, REPORT_FILE, SUMMARY_FILE

from conftest import MAINTENANCE


def simulate(d: dict, **kwargs) -> Simulator:
    sim = Simulator(ScenarioConfig.from_dict(d), **kwargs)
    sim.report = sim.run()
    return sim


def test_maintenance_scenario(maintenance_scenario):
    sim = simulate(maintenance_scenario)
    report = sim.report

    data = sim.run_log.of_type(EventTypes.MESSAGE_DELIVERED, channel='owner->manufacturer')
    assert [e['msg_id'] for e in data] == ['dcmb-owner:1']
    assert data[0]['tick'] == 11
    assert report.evidence_txs >= 1
    assert report.contract_inputs == 1
    assert [(e['contract_id'], e['kind'], e['target_id'], e['importance']) for e in report.contract_events] == \
           [('maintenance', 'notify', 'manufacturer', 'high')]
    assert [(n['target_id'], n['importance'], n['message']) for n in report.notifications] == \
           [('manufacturer', 'high', 'schedule a service visit')]
    assert report.chain_valid and report.chain_broken_at is None
    assert report.audit == {'disclosed': 1, 'verified': 1}
    assert report.unmapped == 0 and report.dropped == {}


def test_nothing_confidential_reaches_the_ledger(maintenance_scenario):
    sim = simulate(maintenance_scenario)
    for _, tx in sim.ledger.transactions():
        if tx.kind in (TxKinds.EVIDENCE, TxKinds.CONTRACT_INPUT):
            assert find_leaks(tx.body, [b'5367', MAINTENANCE.encode()]) == []
    assert MAINTENANCE not in sim.ledger.dumps()


def test_unmapped_value(maintenance_scenario):
    maintenance_scenario['data']['dcmb-owner']['series'][0]['value'] = 5120
    report = simulate(maintenance_scenario).report
    assert report.unmapped == 1
    assert report.contract_inputs == 0 and report.contract_events == [] and report.notifications == []
    assert report.evidence_txs == 1


def test_no_data(maintenance_scenario):
    maintenance_scenario['data'] = {}
    sim = simulate(maintenance_scenario)
    report = sim.report
    assert report.evidence_txs == 0 and report.contract_inputs == 0
    assert report.notifications == [] and report.delivered == 0
    assert report.chain_valid and report.blocks >= 1
    assert report.audit == {'disclosed': 0, 'verified': 0}


def test_same_seed_same_run(maintenance_scenario):
    first, second = simulate(maintenance_scenario), simulate(maintenance_scenario)
    assert first.ledger.dumps() == second.ledger.dumps()
    assert first.run_log.dumps() == second.run_log.dumps()

    maintenance_scenario['rng_seed'] = 8
    assert simulate(maintenance_scenario).ledger.dumps() != first.ledger.dumps()


def test_partition(partition_scenario):
    sim = simulate(partition_scenario)
    report = sim.report
    on_channel = [e for e in sim.run_log.records
                  if e.get('channel') == 'owner->manufacturer' and e['type'] in ('message_delivered',
                                                                                  'message_dropped')]
    assert len(on_channel) == 8
    assert [e['msg_id'] for e in on_channel if e['type'] == 'message_delivered'] == \
           [f'dcmb-sensor:{n}' for n in (1, 2, 4, 5, 8)]
    assert report.delivered == 5
    assert report.dropped == {'dropped_full': 2, 'dropped_timeout': 1}
    assert report.messages == 8
    # evidence does not depend on the channel
    assert report.evidence_txs == 8
    assert report.audit == {'disclosed': 5, 'verified': 5}


def test_records_left_at_the_end_are_processed(maintenance_scenario):
    maintenance_scenario['data']['dcmb-owner']['series'].append({'tick': 11, 'value': 5391})
    maintenance_scenario['modules'][0]['collection_period'] = 24
    report = simulate(maintenance_scenario).report
    assert report.evidence_txs == 2 and report.contract_inputs == 2
    assert len(report.notifications) == 2


def test_random_walk(maintenance_scenario):
    maintenance_scenario['modules'][0]['collection_period'] = 1
    maintenance_scenario['data'] = {'dcmb-owner': {'random_walk': {'start': 5350, 'step': 5, 'every': 2}}}
    report = simulate(maintenance_scenario).report
    assert report.evidence_txs == 6
    assert report.audit == {'disclosed': 6, 'verified': 6}


def test_receiver_acts_on_evidence(maintenance_scenario):
    maintenance_scenario['receivers'] = {'manufacturer': [
        {'payload': 5120, 'action': {'kind': 'emit_event'}},
        {'payload': 5367, 'action': {'kind': 'initiate_order', 'importance': 'high', 'message': 'spare parts'}},
    ]}
    report = simulate(maintenance_scenario).report
    assert [(a['partner_id'], a['kind'], a['target_id']) for a in report.actions_triggered] == \
           [('manufacturer', 'initiate_order', 'manufacturer')]


def test_literal_replay_is_auditable(maintenance_scenario, tmp_path):
    maintenance_scenario['paper_faithful'] = True
    simulate(maintenance_scenario, out_dir=str(tmp_path))
    for name in (LEDGER_FILE, EVENT_LOG_FILE, REPORT_FILE, SUMMARY_FILE):
        assert (tmp_path / name).exists()

    (tmp_path / 'disclosures.json').write_text(json.dumps([{'payload': '5367', 'salt': 'fjpd7'},
                                                           {'payload': '5368', 'salt': 'fjpd7'}]))
    results = verify_audit(str(tmp_path / LEDGER_FILE), load_disclosures(str(tmp_path / 'disclosures.json')))
    assert [r.verified for r in results] == [True, False]
    assert results[0].salt == Salt.from_text('fjpd7')

    report = json.loads((tmp_path / REPORT_FILE).read_text())
    assert report['ledger_file'] == LEDGER_FILE and report['chain_valid']


def test_every_delivered_value_is_auditable(maintenance_scenario):
    rng = random.Random(100)
    values = [rng.randint(0, 10 ** 6) for _ in range(100)]
    maintenance_scenario['data']['dcmb-owner']['series'] = \
        [{'tick': i % 12, 'source_id': f'machine-{i % 3}', 'value': v} for i, v in enumerate(values)]
    sim = simulate(maintenance_scenario)

    disclosed = sim.partners['manufacturer'].disclosures()
    assert sorted(p for p, _ in disclosed) == sorted(values)
    on_chain = [c for _, tx in sim.ledger.transactions(TxKinds.EVIDENCE) for c in tx.body['commitments']]
    assert len(on_chain) == len(disclosed)

    results = verify_audit(sim.ledger, disclosed)
    assert all(len(r.entries) == 1 for r in results)
    assert sorted(e.tx_id for r in results for e in r.entries) == \
           sorted(tx.tx_id for _, tx in sim.ledger.transactions(TxKinds.EVIDENCE) for _ in tx.body['commitments'])

    wrong = verify_audit(sim.ledger, [(p + 1, s) for p, s in disclosed])
    assert not any(r.verified for r in wrong)
    assert not any(r.verified for r in verify_audit(sim.ledger, [(p, s[::-1]) for p, s in disclosed]))


def test_audit_refuses_a_broken_chain(maintenance_scenario):
    ledger = simulate(maintenance_scenario).ledger
    ledger.blocks[1].sealed_at += 1
    with pytest.raises(Ledger.ChainInvalid):
        verify_audit(ledger, [(5367, b'fjpd7')])


def test_uncertified_module_is_not_deployed(maintenance_scenario):
    maintenance_scenario['modules'][0]['behavior'] = 'leaky'
    sim = Simulator(ScenarioConfig.from_dict(maintenance_scenario))
    with pytest.raises(Simulator.GateDenied):
        sim.run()
    denied = sim.run_log.of_type(EventTypes.GATE_DENIED)
    assert denied == [{'type': 'gate_denied', 'tick': 0, 'module_id': 'dcmb-owner',
                       'reason': GateDecision.NOT_CERTIFIED}]
    assert sim.run_log.of_type(EventTypes.MESSAGE_DELIVERED) == []


def test_running_something_else_than_what_was_certified(maintenance_scenario):
    maintenance_scenario['modules'][0]['runtime_source'] = 'dcmb-owner 0.1.0 with a backdoor'
    sim = Simulator(ScenarioConfig.from_dict(maintenance_scenario))
    with pytest.raises(Simulator.GateDenied):
        sim.run()
    assert sim.run_log.of_type(EventTypes.GATE_DENIED)[0]['reason'] == GateDecision.DIGEST_MISMATCH


def test_no_certification_round(maintenance_scenario):
    maintenance_scenario['certification']['rounds'] = []
    with pytest.raises(Simulator.GateDenied):
        run(ScenarioConfig.from_dict(maintenance_scenario))


def test_certify_only(maintenance_scenario):
    record = Simulator(ScenarioConfig.from_dict(maintenance_scenario)).certify('dcmb-owner')
    assert record.status.value == 'certified' and len(record.votes) == 3
    with pytest.raises(ScenarioConfig.ConfigInvalid):
        Simulator(ScenarioConfig.from_dict(maintenance_scenario)).certify('dcmb-other')


def test_event_hooks(maintenance_scenario):
    sim = Simulator(ScenarioConfig.from_dict(maintenance_scenario))
    fired = []

    @sim.on_event(EventTypes.CONTRACT_FIRED)
    def on_fired(event):
        fired.append(event['contract_id'])

    @sim.on_event(EventTypes.BLOCK_SEALED)
    def broken(event):
        raise RuntimeError('boom')

    sim.run()
    assert fired == ['maintenance']


def test_report_text(maintenance_scenario):
    text = simulate(maintenance_scenario).report.to_text()
    assert 'chain             valid' in text
    assert '-> manufacturer (high) at tick 11' in text


@pytest.mark.parametrize('mutate', [
    lambda d: d.update(total_ticks=0),
    lambda d: d['participants'].append({'id': 'owner', 'role': 'validator'}),
    lambda d: d['participants'].append({'id': 'someone', 'role': 'auditor'}),
    lambda d: d['modules'][0].update(owner_id='validator-a'),
    lambda d: d['modules'][0].update(peer_id='nobody'),
    lambda d: d['modules'][0].update(contract_id='other'),
    lambda d: d['modules'][0].update(hash_params_id='test'),
    lambda d: d['modules'][0].update(mapping=[[5400, 5300, 'backwards']]),
    lambda d: d['modules'].append(dict(d['modules'][0])),
    lambda d: d['contracts'][0]['conditions'][0].update(lower=5300),
    lambda d: d['contracts'][0].update(hash_params_id='fast'),
    lambda d: d['contracts'].append(dict(d['contracts'][0])),
    lambda d: d['certification']['rounds'][0].update(checks=['no_raw_payload', 'vibes']),
    lambda d: d['certification'].update(validators=['owner']),
    lambda d: d.update(partitions=[{'from': 'manufacturer', 'to': 'owner', 'start': 0, 'end': 2}]),
    lambda d: d.update(partitions=[{'from': 'owner', 'to': 'manufacturer', 'start': 3, 'end': 3}]),
    lambda d: d['data']['dcmb-owner']['series'][0].update(tick=12),
    lambda d: d['data']['dcmb-owner']['series'][0].update(value='lots'),
    lambda d: d['modules'][0].pop('owner_id'),
])
def test_bad_configs(maintenance_scenario, mutate):
    mutate(maintenance_scenario)
    with pytest.raises(ScenarioConfig.ConfigInvalid):
        ScenarioConfig.from_dict(maintenance_scenario)


def test_config_file_errors(tmp_path):
    with pytest.raises(ScenarioConfig.ConfigInvalid):
        ScenarioConfig.load(str(tmp_path / 'missing.json'))
    (tmp_path / 'broken.json').write_text('{"rng_seed": ')
    with pytest.raises(ScenarioConfig.ConfigInvalid):
        ScenarioConfig.load(str(tmp_path / 'broken.json'))


EXAMPLES = pathlib.Path(__file__).parent.parent / 'example'


@pytest.mark.parametrize('name', ['ex01_maintenance', 'ex02_partition', 'ex03_certification'])
def test_example_configs_load(name):
    config = ScenarioConfig.load(str(EXAMPLES / name / 'config.json'))
    assert config.modules and config.rounds


def test_partition_example_matches_its_readme():
    report = run(ScenarioConfig.load(str(EXAMPLES / 'ex02_partition' / 'config.json')))
    assert (report.delivered, report.dropped, report.evidence_txs) == \
           (5, {'dropped_full': 2, 'dropped_timeout': 1}, 8)
