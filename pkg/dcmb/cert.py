import logging
import random
from typing import Optional

from Cryptodome.PublicKey import ECC
from Cryptodome.Random import get_random_bytes
from Cryptodome.Signature import eddsa

from .interface import DCMBException

log = logging.getLogger(__name__)

SEED_LEN = 32


class Cert:
    """
    signing identity of a participant or a module

    used in blob signing and certification submissions, Ed25519 so that signatures are deterministic
    """
    owner_id: str
    _key: Optional[ECC.EccKey]
    _public_key: bytes

    def __init__(self,
                 *,
                 owner_id: str,
                 key: ECC.EccKey = None,
                 public_key: bytes = b''):
        """
        a cert built from a public key only can verify but not sign
        """
        self.owner_id = owner_id
        self._key = key
        if key is not None:
            self._public_key = key.public_key().export_key(format='raw')
        else:
            self._public_key = public_key

    @staticmethod
    def generate(owner_id: str, rng: random.Random = None) -> 'Cert':
        """
        make a new key pair, from ``rng`` in simulation mode else from the OS source
        """
        seed = rng.getrandbits(8 * SEED_LEN).to_bytes(SEED_LEN, 'big') if rng else get_random_bytes(SEED_LEN)
        return Cert(owner_id=owner_id, key=eddsa.import_private_key(seed))

    @property
    def public_key(self) -> bytes:
        """raw 32-byte Ed25519 public key"""
        return self._public_key

    @property
    def can_sign(self) -> bool:
        return self._key is not None and self._key.has_private()

    def sign(self, data: bytes) -> bytes:
        """ sign data

        :param data: message bytes, usually a digest
        :return: 64-byte signature
        """
        if not self.can_sign:
            raise Cert.SigningKeyUnavailable(f'no signing key loaded for {self.owner_id}')
        return eddsa.new(self._key, 'rfc8032').sign(data)

    def verify(self, data: bytes, signature: bytes) -> bool:
        return Cert.verify_with(self._public_key, data, signature)

    @staticmethod
    def verify_with(public_key: bytes, data: bytes, signature: bytes) -> bool:
        try:
            eddsa.new(eddsa.import_public_key(public_key), 'rfc8032').verify(data, signature)
            return True
        except ValueError:
            return False

    def public_only(self) -> 'Cert':
        return Cert(owner_id=self.owner_id, public_key=self._public_key)

    class SigningKeyUnavailable(DCMBException):
        category = 'key'
