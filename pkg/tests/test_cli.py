import json

import pytest

from dcmb.cli import main


@pytest.fixture
def scenario_file(tmp_path, maintenance_scenario):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(maintenance_scenario))
    return str(path)


@pytest.fixture
def leaky_file(tmp_path, maintenance_scenario):
    maintenance_scenario['modules'][0]['behavior'] = 'leaky'
    path = tmp_path / 'leaky.json'
    path.write_text(json.dumps(maintenance_scenario))
    return str(path)


def test_run_then_verify(scenario_file, tmp_path, capsys):
    out = tmp_path / 'out'
    assert main(['run', scenario_file, '--out', str(out), '--paper-faithful']) == 0
    assert 'notifications     1' in capsys.readouterr().out

    ledger = str(out / 'ledger.ndjson')
    assert main(['verify-chain', ledger]) == 0
    assert main(['inspect-ledger', ledger]) == 0
    assert 'contracts: maintenance' in capsys.readouterr().out

    good = tmp_path / 'good.json'
    good.write_text(json.dumps([{'payload': 5367, 'salt': 'fjpd7'}]))
    assert main(['verify-audit', ledger, str(good)]) == 0
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps([{'payload': 5367, 'salt': 'fjpd7'}, {'payload': 5368, 'salt': 'fjpd7'}]))
    assert main(['verify-audit', ledger, str(bad)]) == 5
    assert 'unverified' in capsys.readouterr().out
    assert main(['verify-audit', ledger, str(tmp_path / 'missing.json')]) == 2

    assert main(['audit-lookup', ledger, 'ab' * 32]) == 5
    assert main(['lookup', ledger, 'ab' * 32]) == 5
    assert main(['inspect', ledger]) == 0


def test_tampered_ledger(scenario_file, tmp_path):
    out = tmp_path / 'out'
    assert main(['run', scenario_file, '--out', str(out), '--seed', '3']) == 0
    path = out / 'ledger.ndjson'
    lines = path.read_text().splitlines()
    block = json.loads(lines[1])
    block['sealed_at'] += 1
    lines[1] = json.dumps(block)
    path.write_text('\n'.join(lines) + '\n')
    assert main(['verify-chain', str(path)]) == 3

    path.write_text('not a ledger\n')
    assert main(['verify-chain', str(path)]) == 3


def test_certify(scenario_file, leaky_file, capsys):
    assert main(['certify', scenario_file, 'dcmb-owner']) == 0
    assert json.loads(capsys.readouterr().out)['status'] == 'certified'
    assert main(['certify', leaky_file, 'dcmb-owner']) == 4
    assert main(['certify', scenario_file, 'dcmb-other']) == 2


def test_gate_denied_run(leaky_file, tmp_path):
    assert main(['run', leaky_file, '--out', str(tmp_path / 'out')]) == 4


def test_usage_errors(scenario_file, tmp_path, capsys):
    assert main([]) == 2
    assert main(['help']) == 0
    assert 'verify-audit' in capsys.readouterr().out
    assert main(['frobnicate']) == 2
    assert main(['run']) == 2
    assert main(['run', scenario_file, '--colour', 'blue']) == 2
    assert main(['run', str(tmp_path / 'missing.json')]) == 2
    assert main(['verify-chain', str(tmp_path / 'missing.ndjson')]) == 2
    assert main(['run', scenario_file, 'extra']) == 2
    assert main(['run', scenario_file, '--seed', 'seven']) == 2


def test_help_for_one_command(capsys):
    assert main(['help', 'audit-lookup']) == 0
    manual = capsys.readouterr().out
    assert manual.startswith('usage: dcmb audit-lookup <ledger> <commitment_hash>')
    assert 'find the Evidence commitments' in manual and 'exit code 5' in manual
    assert main(['help', 'verify-chain']) == 0
    assert main(['help', 'frobnicate']) == 2
