import copy
import random

import pytest

from dcmb import Cert, HashParams, IntervalMapping, Ledger, ModuleConfig, Roles, Salt

# smallest argon2id cost that still validates, keeps thousand-commitment tests fast
TINY = HashParams(memory_cost=64, iterations=1)

MAINTENANCE = 'Maintenance imminent'

MAINTENANCE_SCENARIO = {
    'rng_seed': 7,
    'total_ticks': 12,
    'hash_params': {'tiny': {'memory_cost': 64, 'iterations': 1}},
    'participants': [
        {'id': 'owner', 'role': 'machine_owner'},
        {'id': 'manufacturer', 'role': 'machine_manufacturer'},
        {'id': 'validator-a', 'role': 'validator'},
        {'id': 'validator-b', 'role': 'validator'},
        {'id': 'validator-c', 'role': 'validator'},
    ],
    'contracts': [{
        'contract_id': 'maintenance',
        'owner_id': 'manufacturer',
        'provisioning_salt': 'fjpd7',
        'hash_params_id': 'tiny',
        'conditions': [{'label': MAINTENANCE, 'action': 'notify', 'target': 'manufacturer',
                        'importance': 'high', 'message': 'schedule a service visit'}],
    }],
    'modules': [{
        'module_id': 'dcmb-owner',
        'owner_id': 'owner',
        'peer_id': 'manufacturer',
        'contract_id': 'maintenance',
        'collection_period': 12,
        'batch_size': 1,
        'hash_params_id': 'tiny',
        'mapping': [[5300, 5400, MAINTENANCE]],
        'source': 'dcmb-owner 0.1.0',
    }],
    'certification': {
        'validators': ['validator-a', 'validator-b', 'validator-c'],
        'rounds': [{'module_id': 'dcmb-owner', 'dataset': [5367, 5120, 5450, 5391]}],
    },
    'data': {'dcmb-owner': {'series': [{'tick': 0, 'source_id': 'machine-1', 'value': 5367}]}},
}

PARTITION_SCENARIO = {
    'rng_seed': 11,
    'total_ticks': 12,
    'hash_params': {'tiny': {'memory_cost': 64, 'iterations': 1}},
    'participants': [
        {'id': 'owner', 'role': 'machine_owner'},
        {'id': 'manufacturer', 'role': 'machine_manufacturer'},
        {'id': 'validator-a', 'role': 'validator'},
    ],
    'modules': [{
        'module_id': 'dcmb-sensor',
        'owner_id': 'owner',
        'peer_id': 'manufacturer',
        'collection_period': 1,
        'hash_params_id': 'tiny',
        'stages': ['validate', 'forward', 'evidence'],
        'valid_range': [0, 10000],
        'source': 'dcmb-sensor 0.1.0',
    }],
    'channels': [{'from': 'owner', 'to': 'manufacturer', 'cache': {'capacity': 3, 'timeout': 4}}],
    'partitions': [{'from': 'owner', 'to': 'manufacturer', 'start': 2, 'end': 7}],
    'certification': {
        'validators': ['validator-a'],
        'rounds': [{'module_id': 'dcmb-sensor', 'dataset': [1200, 1210, 1190]}],
    },
    'data': {'dcmb-sensor': {'series': [1201, 1202, 1203, 1204, 1205, 1206, 1207, 1208]}},
}


@pytest.fixture
def tiny() -> HashParams:
    return TINY


@pytest.fixture
def maintenance_scenario() -> dict:
    return copy.deepcopy(MAINTENANCE_SCENARIO)


@pytest.fixture
def partition_scenario() -> dict:
    return copy.deepcopy(PARTITION_SCENARIO)


@pytest.fixture
def ledger() -> Ledger:
    ledger = Ledger()
    ledger.register_participant('owner', Roles.MACHINE_OWNER)
    ledger.register_participant('manufacturer', Roles.MACHINE_MANUFACTURER)
    for v in ('validator-a', 'validator-b', 'validator-c'):
        ledger.register_participant(v, Roles.VALIDATOR)
    ledger.seal_block(0)
    return ledger


def make_config(**kwargs) -> ModuleConfig:
    defaults = dict(module_id='dcmb-owner', owner_id='owner', peer_id='manufacturer',
                    contract_id='maintenance', provisioning_salt=Salt.from_text('fjpd7'),
                    mapping=IntervalMapping([(5300, 5400, MAINTENANCE)]), hash_params_id=TINY.params_id,
                    source='dcmb-owner 0.1.0')
    defaults.update(kwargs)
    return ModuleConfig(**defaults)


def make_cert(owner_id: str, seed: int = 0) -> Cert:
    return Cert.generate(owner_id, random.Random(f'{owner_id}:{seed}'))
