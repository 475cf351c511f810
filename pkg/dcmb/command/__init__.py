from .command import Command
from .lexer import Lexer, DefaultLexer
from .manager import CommandManager
from .parser import Parser
