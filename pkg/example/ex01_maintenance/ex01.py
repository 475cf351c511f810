import logging

from dcmb import ScenarioConfig, Simulator, EventTypes, verify_audit

logging.basicConfig(level='INFO')

# load the scenario, run from the `example` folder
config = ScenarioConfig.load('./ex01_maintenance/config.json')

# init Simulator, ledger, event log and report land in `out_dir`
sim = Simulator(config, out_dir='./out/ex01')


# register an event handler
# called once for every notification a partner receives
@sim.on_event(EventTypes.NOTIFICATION_DELIVERED)
def notified(event: dict):
    print(f'{event["target_id"]} got a {event["importance"]} notification at tick {event["tick"]}')


# everything done, go ahead now!
report = sim.run()
print(report.to_text())

# the manufacturer proves what it received, the auditor needs nothing but the ledger
disclosures = sim.partners['manufacturer'].disclosures()
for result in verify_audit(sim.ledger, disclosures):
    print(result.payload, 'verified' if result.verified else 'unverified')
