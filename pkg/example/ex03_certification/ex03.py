import json
import logging

from dcmb import ScenarioConfig, Simulator

logging.basicConfig(level='INFO')

config = ScenarioConfig.load('./ex03_certification/config.json')

# only the certification round, the record is rebuilt from the ledger
sim = Simulator(config)
record = sim.certify('dcmb-leaky')
print(json.dumps(record._repr, indent=2))

# the source was submitted as shared, so the receiving partner may read it
print(sim.authority.fetch_source('dcmb-leaky', 'manufacturer'))

# a full run stops before tick 0: the gate denies a module that is not certified
try:
    Simulator(ScenarioConfig.load('./ex03_certification/config.json')).run()
except Simulator.GateDenied as e:
    print(f'refused: {e}')
