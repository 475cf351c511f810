import logging

from dcmb import ScenarioConfig, Simulator, EventTypes

logging.basicConfig(level='INFO')

config = ScenarioConfig.load('./ex02_partition/config.json')
sim = Simulator(config, out_dir='./out/ex02')


@sim.on_event(EventTypes.MESSAGE_DROPPED)
def dropped(event: dict):
    print(f'tick {event["tick"]}: {event["msg_id"]} {event["outcome"]} ({event["reason"]})')


report = sim.run()

# every message ends delivered or dropped, exactly once
assert report.messages == 8
print(report.to_text())
