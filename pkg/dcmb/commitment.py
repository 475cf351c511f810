"""
salted hash commitments, the evidence unit of the audit trail

a commitment is ``argon2(len(payload) || payload || salt)`` together with the salt and the id of the
parameter set, so anyone holding ``(payload, salt)`` can re-derive it and nobody else can
"""
import hmac
import logging
import random
import struct
from typing import Union, Optional, Dict

from argon2.low_level import Type, hash_secret_raw
from Cryptodome.Hash import SHA256
from Cryptodome.Random import get_random_bytes

from .interface import Representable, DCMBException, HashVariants

log = logging.getLogger(__name__)

DEFAULT_SALT_LEN = 16
DEFAULT_DIGEST_LEN = 32

Payload = Union[bytes, str, int, float]

_ARGON2_TYPES = {
    HashVariants.ARGON2ID: Type.ID,
    HashVariants.ARGON2I: Type.I,
    HashVariants.ARGON2D: Type.D,
}


class HashParams(Representable):
    """
    one memory-hard hash parameter set

    ``memory_cost`` in kibibytes, ``iterations`` is argon2's time cost
    """
    memory_cost: int
    iterations: int
    parallelism: int
    digest_len: int
    salt_len: int
    variant: HashVariants

    def __init__(self,
                 *,
                 memory_cost: int,
                 iterations: int,
                 parallelism: int = 1,
                 digest_len: int = DEFAULT_DIGEST_LEN,
                 salt_len: int = DEFAULT_SALT_LEN,
                 variant: Union[HashVariants, str] = HashVariants.ARGON2ID):
        self.memory_cost = memory_cost
        self.iterations = iterations
        self.parallelism = parallelism
        self.digest_len = digest_len
        self.salt_len = salt_len
        self.variant = HashVariants(variant)
        self.validate()

    def validate(self):
        for name in ('memory_cost', 'iterations', 'parallelism', 'digest_len', 'salt_len'):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise HashParams.InvalidParams(f'{name} must be a positive int, got {value!r}')
        if self.memory_cost < 8 * self.parallelism:
            raise HashParams.InvalidParams(f'memory_cost must be at least 8 KiB per lane')

    @property
    def params_id(self) -> str:
        return f'{self.variant.value}:m={self.memory_cost},t={self.iterations},' \
               f'p={self.parallelism},l={self.digest_len}'

    @staticmethod
    def from_id(params_id: str) -> 'HashParams':
        """rebuild the parameter set a ``params_id`` names, used when verifying from a ledger file"""
        try:
            variant, rest = params_id.split(':', 1)
            fields = dict(kv.split('=', 1) for kv in rest.split(','))
            return HashParams(memory_cost=int(fields['m']),
                              iterations=int(fields['t']),
                              parallelism=int(fields['p']),
                              digest_len=int(fields['l']),
                              variant=variant)
        except (ValueError, KeyError) as e:
            raise HashParams.InvalidParams(f'malformed params_id: {params_id!r}') from e

    @property
    def _repr(self) -> Dict:
        return {'memory_cost': self.memory_cost, 'iterations': self.iterations, 'parallelism': self.parallelism,
                'digest_len': self.digest_len, 'salt_len': self.salt_len, 'variant': self.variant.value}

    def __eq__(self, other):
        return isinstance(other, HashParams) and self._repr == other._repr

    def __hash__(self):
        return hash(self.params_id)

    def __repr__(self):
        return f'HashParams({self.params_id})'

    class InvalidParams(DCMBException):
        category = 'config'


PRODUCTION = HashParams(memory_cost=64 * 1024, iterations=3)
TEST = HashParams(memory_cost=8 * 1024, iterations=1)

PROFILES: Dict[str, HashParams] = {'production': PRODUCTION, 'test': TEST}


class Salt(bytes):
    """
    raw salt bytes

    configs may give a salt as text (used byte-for-byte) or as hex
    """

    @classmethod
    def from_text(cls, text: str) -> 'Salt':
        return cls(text.encode('utf-8'))

    @classmethod
    def from_hex(cls, h: str) -> 'Salt':
        return cls(bytes.fromhex(h))

    @classmethod
    def from_config(cls, value: Union[str, Dict]) -> 'Salt':
        """``"fjpd7"``, ``{"text": "fjpd7"}`` or ``{"hex": "666a706437"}``"""
        if isinstance(value, str):
            return cls.from_text(value)
        if 'hex' in value:
            return cls.from_hex(value['hex'])
        return cls.from_text(value['text'])


def generate_salt(rng: Optional[random.Random] = None, length: int = DEFAULT_SALT_LEN) -> Salt:
    """
    draw a fresh salt

    :param rng: seeded source for simulation mode, ``None`` to use the OS source
    """
    if rng is None:
        return Salt(get_random_bytes(length))
    return Salt(rng.getrandbits(8 * length).to_bytes(length, 'big'))


def encode_payload(payload: Payload) -> bytes:
    """numbers as UTF-8 decimal strings, labels as UTF-8, bytes as-is"""
    if isinstance(payload, bool):
        raise TypeError('bool is not a payload')
    if isinstance(payload, bytes):
        return payload
    if isinstance(payload, str):
        return payload.encode('utf-8')
    if isinstance(payload, float) and payload.is_integer():
        payload = int(payload)
    if isinstance(payload, (int, float)):
        return str(payload).encode('utf-8')
    raise TypeError(f'unsupported payload type: {type(payload).__name__}')


def canonical_encoding(payload: bytes, salt: bytes) -> bytes:
    # length prefix keeps "53"+"67" apart from "5367"
    return struct.pack('>I', len(payload)) + payload + salt


class Commitment(Representable):
    """
    `Standard Object`

    salted memory-hard digest of a payload, with the salt needed to re-derive it
    """
    hash: bytes
    salt: Salt
    params_id: str

    def __init__(self, **kwargs):
        self.hash = kwargs.get('hash', b'')
        self.salt = Salt(kwargs.get('salt', b''))
        self.params_id = kwargs.get('params_id', '')

    @property
    def hash_hex(self) -> str:
        return self.hash.hex()

    @property
    def _repr(self) -> Dict:
        return {'hash': self.hash.hex(), 'salt': self.salt.hex(), 'params_id': self.params_id}

    @staticmethod
    def from_repr(d: Dict) -> 'Commitment':
        return Commitment(hash=bytes.fromhex(d['hash']), salt=bytes.fromhex(d['salt']), params_id=d['params_id'])

    def __eq__(self, other):
        return isinstance(other, Commitment) and self._repr == other._repr

    def __hash__(self):
        return hash((self.hash, bytes(self.salt), self.params_id))

    def __repr__(self):
        return f'Commitment({self.hash.hex()[:8]}..., salt={self.salt.hex()})'

    class EmptyPayload(DCMBException):
        category = 'input'


def _digest(payload: bytes, salt: bytes, params: HashParams) -> bytes:
    return hash_secret_raw(secret=canonical_encoding(payload, salt),
                           salt=SHA256.new(salt).digest(),
                           time_cost=params.iterations,
                           memory_cost=params.memory_cost,
                           parallelism=params.parallelism,
                           hash_len=params.digest_len,
                           type=_ARGON2_TYPES[params.variant])


def commit(payload: Payload, salt: bytes, params: HashParams) -> Commitment:
    """
    commit to ``payload`` under ``salt``

    :raise HashParams.InvalidParams: params fail validation
    :raise Commitment.EmptyPayload: payload encodes to nothing
    """
    params.validate()
    data = encode_payload(payload)
    if not data:
        raise Commitment.EmptyPayload('payload is empty after canonical encoding')
    return Commitment(hash=_digest(data, salt, params), salt=salt, params_id=params.params_id)


def verify(commitment: Commitment, candidate: Payload, params: HashParams) -> bool:
    """
    check if ``candidate`` is the payload behind ``commitment``, mismatch is a False, not an error
    """
    try:
        data = encode_payload(candidate)
    except TypeError:
        return False
    if not data or commitment.params_id != params.params_id:
        return False
    return constant_time_equal(_digest(data, commitment.salt, params), commitment.hash)


def constant_time_equal(a: bytes, b: bytes) -> bool:
    """the only digest comparison used for commitments and contract inputs"""
    return hmac.compare_digest(a, b)
