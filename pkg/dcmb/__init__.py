# infra
from .interface import AsyncRunnable, Representable, DCMBException
from .interface import HashVariants, TxKinds, ActionKinds, ImportanceTypes, Roles, Verdicts, CertStatus, Visibility, \
    ChannelStates, SendOutcomes, MessageTypes, EventTypes
from .cert import Cert
from .commitment import HashParams, Salt, Commitment, PRODUCTION, TEST, commit, verify, generate_salt

# concepts
from .ledger import Ledger, Transaction, Block, Receipt, AuditEntry
from .contracts import ActionSpec, EqualityContract, deploy_contract, receiver_dispatch
from .module import DataRecord, IntervalMapping, EvidenceBlob, ModuleConfig, TickOutput, DataCommunicationModule, \
    map_to_interval, seal_blob, verify_blob, attest_module
from .p2p import P2PMessage, CachePolicy, Channel, Network
from .partner import Partner
from .certification import ValidationSubmission, Vote, CertificationRecord, ValidationCheck, QuorumRule, \
    CertificationAuthority, GateDecision, run_validation, deployment_gate

# extensions
from .scenario import *
