"""
the Module Certification Authority

validators independently build and validate a submitted module, vote through Certification
transactions, and the decided status on the ledger is what the deployment gate reads
"""
import logging
import random
from typing import List, Dict, Optional, Tuple, Callable, Iterator, Union


from .cert import Cert
from .commitment import HashParams, TEST, encode_payload
from .interface import Representable, DCMBException, TxKinds, Roles, Verdicts, CertStatus, Visibility, EventTypes, \
    make_event, canonical_json, sha256_hex, ZERO_DIGEST
from .ledger import Ledger, Transaction, Receipt, find_leaks
from .module import DataCommunicationModule, DataRecord, ModuleConfig, TickOutput, EvidenceBlob, verify_blob, \
    derive_build_digest, source_digest

log = logging.getLogger(__name__)

DEFAULT_VOTING_WINDOW = 10

# certification record kinds, the ``record`` field of a Certification transaction body
ROUND_OPENED = 'round_opened'
VOTE = 'vote'
STATUS_DECIDED = 'status_decided'


class ValidationSubmission(Representable):
    """
    `Standard Object`

    what a module developer hands the validator group: the module (its config carries source and
    declared behavior) and the ids of the dataset and requirements to validate against
    """
    config: ModuleConfig
    validation_dataset_id: str
    requirements_id: str
    visibility: Visibility
    sender_id: str
    receiver_id: str
    params: HashParams

    def __init__(self, **kwargs):
        self.config = kwargs['config']
        self.params = kwargs.get('params') or TEST
        self.validation_dataset_id = kwargs.get('validation_dataset_id', 'default')
        self.requirements_id = kwargs.get('requirements_id', 'confidentiality')
        self.visibility = Visibility(kwargs.get('visibility', Visibility.PRIVATE))
        self.sender_id = kwargs.get('sender_id') or self.config.owner_id
        self.receiver_id = kwargs.get('receiver_id') or self.config.peer_id

    @property
    def module_id(self) -> str:
        return self.config.module_id

    @property
    def source(self) -> str:
        return self.config.source

    @property
    def source_digest(self) -> str:
        return source_digest(self.config.source)

    @property
    def build_digest(self) -> str:
        return derive_build_digest(self.config.source)

    @property
    def _repr(self) -> Dict:
        # the source itself never goes on-chain
        return {'module_id': self.module_id, 'source_digest': self.source_digest,
                'build_digest': self.build_digest, 'validation_dataset_id': self.validation_dataset_id,
                'requirements_id': self.requirements_id, 'visibility': self.visibility.value,
                'sender_id': self.sender_id, 'receiver_id': self.receiver_id}


class Vote(Representable):
    validator_id: str
    module_id: str
    verdict: Verdicts
    validation_log_digest: str
    cast_at: int

    def __init__(self, validator_id: str, module_id: str, verdict: Union[Verdicts, str],
                 validation_log_digest: str, cast_at: int = 0):
        self.validator_id = validator_id
        self.module_id = module_id
        self.verdict = Verdicts(verdict)
        self.validation_log_digest = validation_log_digest
        self.cast_at = cast_at

    @property
    def _repr(self) -> Dict:
        return {'validator_id': self.validator_id, 'module_id': self.module_id, 'verdict': self.verdict.value,
                'validation_log_digest': self.validation_log_digest, 'cast_at': self.cast_at}

    @staticmethod
    def from_repr(d: Dict) -> 'Vote':
        return Vote(d['validator_id'], d['module_id'], d['verdict'], d['validation_log_digest'], d.get('cast_at', 0))

    def __repr__(self):
        return f'Vote({self.validator_id}: {self.verdict.value} {self.module_id})'


class CertificationRecord(Representable):
    """
    the on-chain trail of one module's latest certification round
    """
    module_id: str
    source_digest: str
    build_digest: str
    votes: List[Vote]
    status: CertStatus
    decided_at: Optional[int]

    def __init__(self, **kwargs):
        self.module_id = kwargs.get('module_id', '')
        self.source_digest = kwargs.get('source_digest', '')
        self.build_digest = kwargs.get('build_digest', '')
        self.votes = list(kwargs.get('votes', []))
        self.status = CertStatus(kwargs.get('status', CertStatus.PENDING))
        self.decided_at = kwargs.get('decided_at')

    @property
    def _repr(self) -> Dict:
        return {'module_id': self.module_id, 'source_digest': self.source_digest,
                'build_digest': self.build_digest, 'votes': [v._repr for v in self.votes],
                'status': self.status.value, 'decided_at': self.decided_at}


class ValidationRun:
    """what a validator observed running a module over the dataset"""
    module: DataCommunicationModule
    dataset: List[DataRecord]
    output: TickOutput

    def __init__(self, module: DataCommunicationModule, dataset: List[DataRecord], output: TickOutput):
        self.module = module
        self.dataset = dataset
        self.output = output

    @property
    def blobs(self) -> List[EvidenceBlob]:
        return [EvidenceBlob.from_repr(tx.body) for tx in self.output.evidence_txs]


TypeCheck = Callable[[ValidationRun], Tuple[bool, str]]


class ValidationCheck:
    """
    one confidentiality requirement, ``predicate`` must only depend on the run it is given
    """
    check_id: str
    description: str
    predicate: TypeCheck

    def __init__(self, check_id: str, description: str, predicate: TypeCheck):
        self.check_id = check_id
        self.description = description
        self.predicate = predicate

    def __call__(self, run: ValidationRun) -> Tuple[bool, str]:
        return self.predicate(run)

    def __repr__(self):
        return f'ValidationCheck({self.check_id})'


def _no_raw_payload(run: ValidationRun) -> Tuple[bool, str]:
    patterns = [encode_payload(r.value) for r in run.dataset]
    patterns.extend(label.encode('utf-8') for label in run.module.config.mapping.labels)
    for tx in run.output.transactions:
        leaks = find_leaks(tx.body, patterns)
        if leaks:
            return False, f'{tx.kind.value} tx carries {len(leaks)} raw pattern(s)'
    return True, f'{len(run.output.transactions)} txs clean'


def _fresh_salt(run: ValidationRun) -> Tuple[bool, str]:
    salts = [bytes(c.salt) for blob in run.blobs for c in blob.commitments]
    if len(set(salts)) != len(salts):
        return False, f'{len(salts) - len(set(salts))} reused salt(s)'
    return True, f'{len(salts)} distinct salts'


def _blob_signature(run: ValidationRun) -> Tuple[bool, str]:
    blobs = run.blobs
    bad = [i for i, b in enumerate(blobs) if not verify_blob(b, run.module.cert.public_key)]
    if bad:
        return False, f'blobs {bad} fail verification'
    return True, f'{len(blobs)} blobs verify'


NO_RAW_PAYLOAD = ValidationCheck('no_raw_payload', 'no raw value or plaintext label inside any emitted transaction',
                                 _no_raw_payload)
FRESH_SALT = ValidationCheck('fresh_salt', 'every audit commitment uses its own salt', _fresh_salt)
BLOB_SIGNATURE = ValidationCheck('blob_signature', 'every evidence blob verifies under the module key',
                                 _blob_signature)

DEFAULT_CHECKS: List[ValidationCheck] = [NO_RAW_PAYLOAD, FRESH_SALT, BLOB_SIGNATURE]
CHECKS: Dict[str, ValidationCheck] = {c.check_id: c for c in DEFAULT_CHECKS}


def run_validation(module_under_test: DataCommunicationModule,
                   dataset: List[DataRecord],
                   checks: List[ValidationCheck]) -> Tuple[Verdicts, List[Dict]]:
    """
    run the module over the dataset in one collection period and apply every check

    :return: (certify iff all checks pass, one log entry per check)
    :raise CertificationAuthority.DatasetMissing: no data or no checks
    """
    if not dataset or not checks:
        raise CertificationAuthority.DatasetMissing('validation needs a non-empty dataset and check list')
    output = module_under_test.sender_tick(dataset, 0)
    output.extend(module_under_test.flush(0))
    run = ValidationRun(module_under_test, dataset, output)

    validation_log = []
    for check in checks:
        passed, detail = check(run)
        validation_log.append({'check_id': check.check_id, 'passed': passed, 'detail': detail})
    verdict = Verdicts.CERTIFY if all(e['passed'] for e in validation_log) else Verdicts.REJECT
    return verdict, validation_log


def log_digest(validation_log: List[Dict]) -> str:
    return sha256_hex(canonical_json(validation_log))


class QuorumRule:
    """
    ``certified`` iff certify votes are strictly more than ``threshold`` of the round's validators

    ties reject
    """
    threshold: float

    def __init__(self, threshold: float = 0.5):
        if not 0 <= threshold < 1:
            raise ValueError(f'quorum threshold must be in [0, 1), got {threshold}')
        self.threshold = threshold

    def decide(self, votes: List[Vote], n_validators: int) -> CertStatus:
        certify = sum(1 for v in votes if v.verdict == Verdicts.CERTIFY)
        return CertStatus.CERTIFIED if certify > self.threshold * n_validators else CertStatus.REJECTED


class GateDecision:
    """the answer of ``deployment_gate``, truthy iff allowed"""
    DIGEST_MISMATCH = 'DigestMismatch'
    NOT_CERTIFIED = 'NotCertified'

    allowed: bool
    reason: Optional[str]

    def __init__(self, allowed: bool, reason: str = None):
        self.allowed = allowed
        self.reason = reason

    def __bool__(self):
        return self.allowed

    def __repr__(self):
        return 'allow' if self.allowed else f'deny({self.reason})'


def _records(ledger: Ledger, module_id: str) -> Iterator[Tuple[Optional[int], Transaction]]:
    for height, tx in ledger.transactions(TxKinds.CERTIFICATION, include_pending=True):
        if tx.body.get('module_id') == module_id and tx.body.get('record') in (ROUND_OPENED, VOTE, STATUS_DECIDED):
            yield height, tx


def _latest_round(ledger: Ledger, module_id: str) -> Tuple[Optional[Transaction], List[Transaction]]:
    """the last round_opened record and every record that follows it"""
    opened, after = None, []
    for _, tx in _records(ledger, module_id):
        if tx.body['record'] == ROUND_OPENED:
            opened, after = tx, []
        elif opened is not None:
            after.append(tx)
    return opened, after


def certification_record(ledger: Ledger, module_id: str) -> Optional[CertificationRecord]:
    """
    rebuild the latest round of ``module_id`` from ledger data alone, None if it was never submitted
    """
    opened, after = _latest_round(ledger, module_id)
    if opened is None:
        return None
    votes = [Vote.from_repr(tx.body) for tx in after if tx.body['record'] == VOTE]
    decided = [tx for tx in after if tx.body['record'] == STATUS_DECIDED]
    status, decided_at = CertStatus.PENDING, None
    if decided:
        status, decided_at = CertStatus(decided[-1].body['status']), decided[-1].body['decided_at']
    return CertificationRecord(module_id=module_id, source_digest=opened.body['source_digest'],
                               build_digest=opened.body['build_digest'], votes=votes, status=status,
                               decided_at=decided_at)


def certified_build_digest(ledger: Ledger, module_id: str) -> Optional[str]:
    record = certification_record(ledger, module_id)
    if record is None or record.status != CertStatus.CERTIFIED:
        return None
    return record.build_digest


def deployment_gate(ledger: Ledger, module_id: str, build_digest: str) -> GateDecision:
    """
    allow iff the latest round certified the module and ``build_digest`` is the certified one
    """
    record = certification_record(ledger, module_id)
    if record is None or record.status != CertStatus.CERTIFIED:
        return GateDecision(False, GateDecision.NOT_CERTIFIED)
    if record.build_digest != build_digest:
        return GateDecision(False, GateDecision.DIGEST_MISMATCH)
    return GateDecision(True)


class CertificationAuthority:
    """
    Represents the validator group, bound to one ledger

    reminder: each validator validates in its own sandbox, the authority only sequences their votes
    """
    ledger: Ledger
    validators: List[str]
    quorum: QuorumRule
    window: int
    events: List[Dict]

    _submissions: Dict[str, ValidationSubmission]

    def __init__(self, ledger: Ledger, validators: List[str], *, quorum: QuorumRule = None,
                 window: int = DEFAULT_VOTING_WINDOW):
        if not validators:
            raise ValueError('a certification authority needs at least one validator')
        self.ledger = ledger
        self.validators = list(validators)
        self.quorum = quorum or QuorumRule()
        self.window = window
        self.events = []
        self._submissions = {}

    def open_round(self, submission: ValidationSubmission, submitter: Cert, *, now: int = 0) -> Receipt:
        """
        publish the signed source and build digests, the source itself stays with the authority

        :raise Cert.SigningKeyUnavailable: ``submitter`` can not sign
        """
        if submission.source_digest == ZERO_DIGEST or submission.build_digest == ZERO_DIGEST:
            raise ValueError('source and build digests must be non-zero')
        for v in self.validators:
            if self.ledger.role_of(v) != Roles.VALIDATOR:
                raise CertificationAuthority.UnknownValidator(f'{v} is not a registered validator')
        body = dict(submission._repr,
                    record=ROUND_OPENED,
                    source_signature=submitter.sign(bytes.fromhex(submission.source_digest)).hex(),
                    build_signature=submitter.sign(bytes.fromhex(submission.build_digest)).hex(),
                    submitter_key=submitter.public_key.hex(),
                    validators=self.validators,
                    opened_at=now,
                    window=self.window)
        self._submissions[submission.module_id] = submission
        log.info(f'[ cert ] round opened for {submission.module_id} with {len(self.validators)} validators')
        return self.ledger.submit_transaction(Transaction(kind=TxKinds.CERTIFICATION, sender_id=submitter.owner_id,
                                                          timestamp=now, body=body))

    def fetch_source(self, module_id: str, requester_id: str) -> str:
        """
        :raise CertificationAuthority.AccessDenied: the requester may not see this module's source
        """
        submission = self._submission(module_id)
        allowed = set(self.validators)
        if submission.visibility == Visibility.SHARED:
            allowed.update((submission.sender_id, submission.receiver_id))
        if requester_id not in allowed:
            raise CertificationAuthority.AccessDenied(f'{requester_id} may not fetch the source of {module_id}')
        return submission.source

    def validate(self, validator_id: str, module_id: str, dataset: List[DataRecord],
                 checks: List[ValidationCheck] = None) -> Tuple[Verdicts, List[Dict]]:
        """
        one validator's independent pass: check the signed binding, rebuild, run the checks

        the sandbox module is seeded from the build digest, so equal inputs give equal logs
        """
        opened, _ = _latest_round(self.ledger, module_id)
        if opened is None:
            raise CertificationAuthority.DatasetMissing(f'no open round for {module_id}')
        source = self.fetch_source(module_id, validator_id)
        submission = self._submissions[module_id]

        key = bytes.fromhex(opened.body['submitter_key'])
        binding = Cert.verify_with(key, bytes.fromhex(opened.body['source_digest']),
                                   bytes.fromhex(opened.body['source_signature'])) \
            and Cert.verify_with(key, bytes.fromhex(opened.body['build_digest']),
                                 bytes.fromhex(opened.body['build_signature'])) \
            and source_digest(source) == opened.body['source_digest'] \
            and derive_build_digest(source) == opened.body['build_digest']
        if not binding:
            log.warning(f'{validator_id}: signed binding of {module_id} does not hold')
            return Verdicts.REJECT, [{'check_id': 'signed_binding', 'passed': False,
                                      'detail': 'source or build digest does not match its signature'}]

        sandbox = random.Random(opened.body['build_digest'])
        module = DataCommunicationModule(submission.config, Cert.generate(f'{module_id}@sandbox', sandbox),
                                         submission.params, rng=sandbox)
        verdict, validation_log = run_validation(module, dataset, checks or DEFAULT_CHECKS)
        validation_log.insert(0, {'check_id': 'signed_binding', 'passed': True, 'detail': 'digests verify'})
        log.info(f'{validator_id} validated {module_id}: {verdict.value}')
        return verdict, validation_log

    def cast_vote(self, vote: Vote) -> Receipt:
        """
        :raise CertificationAuthority.UnknownValidator: voter is not a validator of the round
        :raise CertificationAuthority.DuplicateVote: voter already voted this round
        """
        opened, after = _latest_round(self.ledger, vote.module_id)
        if opened is None:
            raise CertificationAuthority.UnknownValidator(f'no open round for {vote.module_id}')
        if self.ledger.role_of(vote.validator_id) != Roles.VALIDATOR \
                or vote.validator_id not in opened.body['validators']:
            raise CertificationAuthority.UnknownValidator(f'{vote.validator_id} is not a validator of this round')
        if any(tx.body['record'] == STATUS_DECIDED for tx in after):
            raise CertificationAuthority.VotingOpen(f'round for {vote.module_id} is already decided')
        if any(tx.body['record'] == VOTE and tx.body['validator_id'] == vote.validator_id for tx in after):
            raise CertificationAuthority.DuplicateVote(f'{vote.validator_id} already voted on {vote.module_id}')

        receipt = self.ledger.submit_transaction(Transaction(kind=TxKinds.CERTIFICATION, sender_id=vote.validator_id,
                                                             timestamp=vote.cast_at,
                                                             body=dict(vote._repr, record=VOTE)))
        self.events.append(make_event(EventTypes.VOTE_CAST, vote.cast_at, module_id=vote.module_id,
                                      validator_id=vote.validator_id, verdict=vote.verdict.value))
        return receipt

    def tally(self, module_id: str, *, now: int = 0) -> CertStatus:
        """
        decide the round and persist the status

        :raise CertificationAuthority.VotingOpen: votes are missing and the window is still open
        """
        opened, after = _latest_round(self.ledger, module_id)
        if opened is None:
            raise CertificationAuthority.VotingOpen(f'no round opened for {module_id}')
        decided = [tx for tx in after if tx.body['record'] == STATUS_DECIDED]
        if decided:
            return CertStatus(decided[-1].body['status'])

        validators = opened.body['validators']
        votes = [Vote.from_repr(tx.body) for tx in after if tx.body['record'] == VOTE]
        if len(votes) < len(validators) and now < opened.body['opened_at'] + opened.body['window']:
            raise CertificationAuthority.VotingOpen(
                f'{len(votes)}/{len(validators)} votes for {module_id}, window open until '
                f'{opened.body["opened_at"] + opened.body["window"]}')

        status = self.quorum.decide(votes, len(validators))
        self.ledger.submit_transaction(Transaction(
            kind=TxKinds.CERTIFICATION, sender_id=self.ledger.sequencer_id, timestamp=now,
            body={'record': STATUS_DECIDED, 'module_id': module_id, 'status': status.value,
                  'source_digest': opened.body['source_digest'], 'build_digest': opened.body['build_digest'],
                  'certify': sum(1 for v in votes if v.verdict == Verdicts.CERTIFY),
                  'validators': len(validators), 'decided_at': now}))
        self.events.append(make_event(EventTypes.STATUS_DECIDED, now, module_id=module_id, status=status.value))
        log.info(f'[ cert ] {module_id} {status.value} ({len(votes)}/{len(validators)} votes)')
        return status

    def record(self, module_id: str) -> Optional[CertificationRecord]:
        return certification_record(self.ledger, module_id)

    def certify(self, submission: ValidationSubmission, submitter: Cert, dataset: List[DataRecord],
                checks: List[ValidationCheck] = None, *, now: int = 0) -> CertificationRecord:
        """
        a full round: open, every validator validates and votes, tally, seal
        """
        self.open_round(submission, submitter, now=now)
        for validator_id in self.validators:
            verdict, validation_log = self.validate(validator_id, submission.module_id, dataset, checks)
            self.cast_vote(Vote(validator_id, submission.module_id, verdict, log_digest(validation_log), now))
        self.tally(submission.module_id, now=now)
        while self.ledger.pending:
            self.ledger.seal_block(now)
        return self.record(submission.module_id)

    def _submission(self, module_id: str) -> ValidationSubmission:
        try:
            return self._submissions[module_id]
        except KeyError:
            raise CertificationAuthority.DatasetMissing(f'no submission for {module_id}')

    class DatasetMissing(DCMBException):
        category = 'config'

    class DuplicateVote(DCMBException):
        category = 'certification'

    class UnknownValidator(DCMBException):
        category = 'certification'

    class VotingOpen(DCMBException):
        category = 'certification'

    class AccessDenied(DCMBException):
        category = 'certification'
