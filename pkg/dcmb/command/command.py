import asyncio
import inspect
import logging
from typing import Callable, Coroutine, List, Optional

from .lexer import Lexer, DefaultLexer
from .parser import Parser

log = logging.getLogger(__name__)

TypeHandler = Callable[..., Coroutine]


class Command:
    """
    Receive argv, parse it with `lexer` and `parser`, execute `handler` if successfully parsed else skip it
    """
    name: str
    handler: TypeHandler
    help: str
    desc: str

    lexer: Lexer
    parser: Parser

    def __init__(self, name: str, handler: TypeHandler, help: str, desc: str, lexer: Lexer, parser: Parser):
        if not asyncio.iscoroutinefunction(handler):
            raise TypeError('handler must be a coroutine.')
        self.handler = handler

        self.name = name or handler.__name__
        if not isinstance(self.name, str):
            raise TypeError('Name of a command must be a string.')

        self.help = help
        self.desc = desc

        self.lexer = lexer
        self.parser = parser

    @staticmethod
    def command(name: str = '', *, help: str = '', desc: str = '', aliases: List[str] = (),
                lexer: Lexer = None, parser: Parser = None) -> Callable[[TypeHandler], 'Command']:
        """
        decorator, to wrap a func into a Command

        :param name: the name of this Command, also used to trigger command in DefaultLexer
        :param aliases: (DefaultLexer only) you can also trigger the command with aliases
        :param help: detailed manual
        :param desc: short introduction
        :param lexer: (Advanced) explicitly set the lexer
        :param parser: (Advanced) explicitly set the parser
        :return: wrapped Command
        """
        parser = parser or Parser()

        def decorator(handler: TypeHandler):
            default_lexer = DefaultLexer(set([name or handler.__name__] + list(aliases)))
            return Command(name, handler, help, desc, lexer or default_lexer, parser)

        return decorator

    async def handle(self, argv: List[str]) -> Optional[int]:
        """
        :return: the handler's exit code, None if argv is not for this command
        :raise Parser.ParserException: argv is for this command but does not parse
        """
        try:
            tokens = self.lexer.lex(argv)
        except Lexer.NotMatched:
            return None
        params = list(inspect.signature(self.handler).parameters.values())
        args, kwargs = self.parser.parse(tokens, params)
        return await self.execute(*args, **kwargs)

    async def execute(self, *args, **kwargs) -> int:
        log.info(f'command {self.name} was triggered with {list(args)} {kwargs}')
        return (await self.handler(*args, **kwargs)) or 0

    @property
    def manual(self) -> str:
        """usage line, then the short introduction and the detailed manual if given"""
        return '\n\n'.join(part for part in (self.usage, self.desc, self.help) if part)

    @property
    def usage(self) -> str:
        parts = [self.name]
        for p in inspect.signature(self.handler).parameters.values():
            if p.kind == p.KEYWORD_ONLY:
                flag = f'--{p.name.replace("_", "-")}'
                parts.append(f'[{flag}]' if p.annotation is bool else f'[{flag} {p.name.upper()}]')
            else:
                parts.append(f'<{p.name}>')
        return ' '.join(parts)
