from .config import ScenarioConfig, Partition, DataSource, CertificationRound
from .report import RunLog, RunReport
from .audit import AuditResult, verify_audit, load_disclosures
from .simulator import Simulator, run
