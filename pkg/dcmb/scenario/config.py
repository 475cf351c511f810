import json
import logging
import random
from typing import Dict, List, Optional, Tuple, Union

from ..certification import CHECKS
from ..commitment import HashParams, PROFILES, Salt
from ..contracts import EqualityContract, ActionSpec
from ..interface import DCMBException, Roles, Visibility
from ..module import ModuleConfig, IntervalMapping, DataRecord
from ..p2p import CachePolicy

log = logging.getLogger(__name__)

SENDER_ROLES = (Roles.MACHINE_OWNER, Roles.MACHINE_MANUFACTURER)


class Partition:
    """channel ``from_id -> to_id`` is down for ticks ``start <= t < end``"""
    from_id: str
    to_id: str
    start: int
    end: int

    def __init__(self, from_id: str, to_id: str, start: int, end: int):
        self.from_id = from_id
        self.to_id = to_id
        self.start = start
        self.end = end

    def active(self, tick: int) -> bool:
        return self.start <= tick < self.end


class DataSource:
    """where a module's records come from, scripted or a seeded random walk"""
    module_id: str
    series: Dict[int, List[DataRecord]]
    walk: Optional[Dict]

    def __init__(self, module_id: str, series: Dict[int, List[DataRecord]] = None,
                 walk: Dict = None):
        self.module_id = module_id
        self.series = series or {}
        self.walk = walk
        self._last = walk['start'] if walk else None

    def records_at(self, tick: int, rng: random.Random) -> List[DataRecord]:
        if self.walk is None:
            return list(self.series.get(tick, []))
        if tick < self.walk.get('from', 0) or tick >= self.walk.get('until', tick + 1) \
                or tick % self.walk.get('every', 1):
            return []
        value = self._last
        self._last = self._last + rng.randint(-self.walk['step'], self.walk['step'])
        return [DataRecord(self.walk.get('source_id', 'sensor'), value, tick)]

    @property
    def count(self) -> Optional[int]:
        """number of scripted records, None for a random walk"""
        return None if self.walk else sum(len(v) for v in self.series.values())


class CertificationRound:
    module_id: str
    submitter_id: str
    visibility: Visibility
    dataset: List[Union[int, float]]
    checks: List[str]
    dataset_id: str
    requirements_id: str

    def __init__(self, **kwargs):
        self.module_id = kwargs['module_id']
        self.submitter_id = kwargs.get('submitter_id', '')
        self.visibility = Visibility(kwargs.get('visibility', Visibility.PRIVATE))
        self.dataset = list(kwargs.get('dataset', []))
        self.checks = list(kwargs.get('checks', []))
        self.dataset_id = kwargs.get('dataset_id', 'default')
        self.requirements_id = kwargs.get('requirements_id', 'confidentiality')


class ScenarioConfig:
    """
    a whole scenario, every cross reference resolved at load

    see ``example/ex01_maintenance/config.json`` for the layout
    """
    rng_seed: int
    total_ticks: int
    paper_faithful: bool
    hash_params: Dict[str, HashParams]
    block_capacity: int
    tick_period: int
    sequencer_id: str
    participants: Dict[str, Roles]
    modules: List[ModuleConfig]
    runtime_sources: Dict[str, str]
    contracts: List[EqualityContract]
    contract_status: Dict[str, str]
    channels: List[Tuple[str, str, CachePolicy]]
    partitions: List[Partition]
    validators: List[str]
    quorum_threshold: float
    voting_window: int
    rounds: List[CertificationRound]
    data: Dict[str, DataSource]
    receivers: Dict[str, List[Tuple[Union[int, float, str], ActionSpec]]]

    _provisioning: Dict[str, Tuple[Salt, str]]

    def __init__(self):
        self.rng_seed = 0
        self.total_ticks = 1
        self.paper_faithful = False
        self.hash_params = dict(PROFILES)
        self.block_capacity = 100
        self.tick_period = 1
        self.sequencer_id = 'sequencer'
        self.participants = {}
        self.modules = []
        self.runtime_sources = {}
        self.contracts = []
        self.contract_status = {}
        self.channels = []
        self.partitions = []
        self.validators = []
        self.quorum_threshold = 0.5
        self.voting_window = 10
        self.rounds = []
        self.data = {}
        self.receivers = {}
        self._provisioning = {}

    @staticmethod
    def load(path: str) -> 'ScenarioConfig':
        """
        :raise ScenarioConfig.ConfigInvalid: unreadable file or a bad reference inside it
        """
        try:
            with open(path, 'r', encoding='utf-8') as f:
                d = json.load(f)
        except (OSError, ValueError) as e:
            raise ScenarioConfig.ConfigInvalid(f'{path}: {e}') from e
        log.info(f'[ init ] scenario config loaded from {path}')
        return ScenarioConfig.from_dict(d)

    @staticmethod
    def from_dict(d: Dict) -> 'ScenarioConfig':
        c = ScenarioConfig()
        try:
            c._load_globals(d)
            c._load_participants(d.get('participants', []))
            c._load_contracts(d.get('contracts', []))
            c._load_modules(d.get('modules', []))
            c._load_network(d.get('channels', []), d.get('partitions', []))
            c._load_certification(d.get('certification', {}))
            c._load_data(d.get('data', {}))
            c._load_receivers(d.get('receivers', {}))
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioConfig.ConfigInvalid(f'malformed scenario config: {e!r}') from e
        except DCMBException as e:
            if isinstance(e, ScenarioConfig.ConfigInvalid) or e.category != 'config':
                raise
            raise ScenarioConfig.ConfigInvalid(f'{type(e).__qualname__}: {e}') from e
        return c

    def params(self, params_id: str, path: str = 'hash_params_id') -> HashParams:
        if params_id not in self.hash_params:
            raise ScenarioConfig.ConfigInvalid(f'{path}: unknown hash params {params_id!r}')
        return self.hash_params[params_id]

    def module(self, module_id: str) -> ModuleConfig:
        for m in self.modules:
            if m.module_id == module_id:
                return m
        raise ScenarioConfig.ConfigInvalid(f'unknown module {module_id!r}')

    def contract(self, contract_id: str) -> Optional[EqualityContract]:
        return next((c for c in self.contracts if c.contract_id == contract_id), None)

    def _require(self, participant_id: str, path: str, *roles: Roles):
        role = self.participants.get(participant_id)
        if role is None:
            raise ScenarioConfig.ConfigInvalid(f'{path}: unknown participant {participant_id!r}')
        if roles and role not in roles:
            raise ScenarioConfig.ConfigInvalid(f'{path}: {participant_id} is a {role.value}, '
                                               f'expected {"/".join(r.value for r in roles)}')

    def _load_globals(self, d: Dict):
        self.rng_seed = int(d.get('rng_seed', 0))
        self.total_ticks = int(d.get('total_ticks', 1))
        if self.total_ticks < 1:
            raise ScenarioConfig.ConfigInvalid(f'total_ticks: must be >= 1, got {self.total_ticks}')
        self.paper_faithful = bool(d.get('paper_faithful', False))
        for params_id, entry in d.get('hash_params', {}).items():
            self.hash_params[params_id] = HashParams(**entry)
        ledger = d.get('ledger', {})
        self.block_capacity = int(ledger.get('block_capacity', 100))
        self.tick_period = int(ledger.get('tick_period', 1))
        self.sequencer_id = ledger.get('sequencer_id', 'sequencer')
        if self.block_capacity < 1 or self.tick_period < 1:
            raise ScenarioConfig.ConfigInvalid('ledger: block_capacity and tick_period must be >= 1')

    def _load_participants(self, entries: List[Dict]):
        self.participants = {self.sequencer_id: Roles.SEQUENCER}
        for i, p in enumerate(entries):
            if p['id'] in self.participants and self.participants[p['id']] != Roles(p['role']):
                raise ScenarioConfig.ConfigInvalid(f'participants[{i}]: {p["id"]} registered twice')
            self.participants[p['id']] = Roles(p['role'])

    def _load_contracts(self, entries: List[Dict]):
        for i, definition in enumerate(entries):
            path = f'contracts[{i}]'
            self._require(definition['owner_id'], f'{path}.owner_id')
            if self.contract(definition['contract_id']):
                raise ScenarioConfig.ConfigInvalid(f'{path}: contract {definition["contract_id"]} defined twice')
            params = self.params(definition.get('hash_params_id', 'production'), f'{path}.hash_params_id')
            contract = EqualityContract.from_definition(definition, params)
            for j, (_, action) in enumerate(contract.conditions):
                self._require(action.target_id, f'{path}.conditions[{j}].target')
            self.contracts.append(contract)
            self.contract_status[contract.contract_id] = definition.get('cert_status', 'certified')
            self._provisioning[contract.contract_id] = (Salt.from_config(definition['provisioning_salt']),
                                                        params.params_id)

    def _load_modules(self, entries: List[Dict]):
        for i, m in enumerate(entries):
            path = f'modules[{i}]'
            self._require(m['owner_id'], f'{path}.owner_id', *SENDER_ROLES)
            self._require(m['peer_id'], f'{path}.peer_id', *SENDER_ROLES)
            params_id = m.get('hash_params_id', 'production')
            params = self.params(params_id, f'{path}.hash_params_id')
            kwargs = dict(m, mapping=IntervalMapping.from_config(m.get('mapping', [])), hash_params_id=params_id)
            kwargs.pop('runtime_source', None)

            contract_id = m.get('contract_id', '')
            if contract_id:
                if contract_id not in self._provisioning:
                    raise ScenarioConfig.ConfigInvalid(f'{path}.contract_id: unknown contract {contract_id!r}')
                salt, contract_params = self._provisioning[contract_id]
                if contract_params != params.params_id:
                    raise ScenarioConfig.ConfigInvalid(
                        f'{path}: module hashes with {params.params_id}, contract {contract_id} with {contract_params}')
                kwargs['provisioning_salt'] = salt
            if 'audit_salt' in m:
                kwargs['audit_salt'] = Salt.from_config(m['audit_salt'])
            elif contract_id:
                # a literal replay uses the provisioning salt for audit commitments too
                kwargs['audit_salt'] = kwargs['provisioning_salt']
            if any(x.module_id == m['module_id'] for x in self.modules):
                raise ScenarioConfig.ConfigInvalid(f'{path}: module {m["module_id"]} defined twice')
            self.modules.append(ModuleConfig(**kwargs))
            self.runtime_sources[m['module_id']] = m.get('runtime_source', m.get('source', ''))

    def _load_network(self, channels: List[Dict], partitions: List[Dict]):
        for i, ch in enumerate(channels):
            self._require(ch['from'], f'channels[{i}].from')
            self._require(ch['to'], f'channels[{i}].to')
            cache = ch.get('cache', {})
            self.channels.append((ch['from'], ch['to'], CachePolicy(cache.get('capacity', 100),
                                                                    cache.get('timeout', 24))))
        for m in self.modules:
            if not any(f == m.owner_id and t == m.peer_id for f, t, _ in self.channels):
                self.channels.append((m.owner_id, m.peer_id, CachePolicy()))
        for i, p in enumerate(partitions):
            if not any(f == p['from'] and t == p['to'] for f, t, _ in self.channels):
                raise ScenarioConfig.ConfigInvalid(f'partitions[{i}]: no channel {p["from"]}->{p["to"]}')
            if p['start'] >= p['end']:
                raise ScenarioConfig.ConfigInvalid(f'partitions[{i}]: start must be before end')
            self.partitions.append(Partition(p['from'], p['to'], int(p['start']), int(p['end'])))

    def _load_certification(self, d: Dict):
        self.validators = list(d.get('validators', []))
        for i, v in enumerate(self.validators):
            self._require(v, f'certification.validators[{i}]', Roles.VALIDATOR)
        self.quorum_threshold = float(d.get('quorum_threshold', 0.5))
        self.voting_window = int(d.get('window', 10))
        for i, r in enumerate(d.get('rounds', [])):
            round_ = CertificationRound(**r)
            unknown = [c for c in round_.checks if c not in CHECKS]
            if unknown:
                raise ScenarioConfig.ConfigInvalid(f'certification.rounds[{i}].checks: unknown checks {unknown}')
            module = self.module(round_.module_id)
            round_.submitter_id = round_.submitter_id or module.owner_id
            self._require(round_.submitter_id, f'certification.rounds[{i}].submitter_id')
            if not self.validators:
                raise ScenarioConfig.ConfigInvalid(f'certification.rounds[{i}]: no validators configured')
            self.rounds.append(round_)

    def _load_data(self, d: Dict):
        for module_id, entry in d.items():
            module = self.module(module_id)
            if 'random_walk' in entry:
                walk = dict(entry['random_walk'])
                walk.setdefault('every', module.collection_period)
                self.data[module_id] = DataSource(module_id, walk=walk)
                continue
            series = {}
            for i, item in enumerate(entry.get('series', [])):
                if isinstance(item, dict):
                    tick, source_id, value = int(item.get('tick', 0)), item.get('source_id', 'sensor'), item['value']
                else:
                    tick, source_id, value = i, 'sensor', item
                if not 0 <= tick < self.total_ticks:
                    raise ScenarioConfig.ConfigInvalid(f'data.{module_id}.series[{i}]: tick {tick} outside the run')
                series.setdefault(tick, []).append(DataRecord(source_id, value, tick))
            self.data[module_id] = DataSource(module_id, series=series)

    def _load_receivers(self, d: Dict):
        for partner_id, candidates in d.items():
            self._require(partner_id, f'receivers.{partner_id}', *SENDER_ROLES)
            ret = []
            for c in candidates:
                action = c['action']
                ret.append((c['payload'], ActionSpec(action['kind'], action.get('target_id', partner_id),
                                                     action.get('importance', 'normal'),
                                                     action.get('message', ''))))
            self.receivers[partner_id] = ret

    class ConfigInvalid(DCMBException):
        category = 'config'
