import logging
from abc import ABC, abstractmethod
from typing import List, Set

from ..interface import DCMBException

log = logging.getLogger(__name__)


class Lexer(ABC):
    """
    deal with argv, check if it is meant for a command and strip the trigger off
    """

    @abstractmethod
    def lex(self, argv: List[str]) -> List[str]:
        """
        read argv, and get a list of tokens as List[str] for following parser.parse()

        :param argv: the command line, program name excluded
        :return: the tokens after the trigger
        :raise Lexer.NotMatched: argv is not for this command
        """
        raise NotImplementedError

    class LexerException(DCMBException):
        category = 'config'

        def __init__(self, argv: List[str]):
            super().__init__(' '.join(argv))
            self.argv = argv

    class NotMatched(LexerException):
        pass


class DefaultLexer(Lexer):
    """
    the first token names the command, e.g. ``verify-chain`` or one of its aliases
    """
    triggers: Set[str]

    def __init__(self, triggers: Set[str]):
        self.triggers = triggers

    def lex(self, argv: List[str]) -> List[str]:
        if not argv or argv[0] not in self.triggers:
            raise Lexer.NotMatched(argv)
        return argv[1:]  # argv[0] is trigger
