import asyncio
import copy
import inspect
import logging
from typing import Dict, Any, Callable, List, Tuple

from ..interface import DCMBException

log = logging.getLogger(__name__)


class Parser:
    """
    deal with a list of tokens made from Lexer, convert their type to match the command.handler

    positional params take positional tokens, keyword-only params are options: ``--out DIR`` for
    ``out: str``, a bare ``--paper-faithful`` for ``paper_faithful: bool``
    """
    _parse_funcs: Dict[Any, Callable] = {
        str: lambda token: token,
        int: lambda token: int(token),
        float: lambda token: float(token)
    }

    def __init__(self):
        self._parse_funcs = copy.copy(Parser._parse_funcs)

    def parse(self, tokens: List[str], params: List[inspect.Parameter]) -> Tuple[List[Any], Dict[str, Any]]:
        """
        parse tokens into args that types corresponding to handler's requirement

        :param tokens: output of Lexer.lex()
        :param params: command handlers parameters
        :return: (positional args, keyword args)
        :raise Parser.TooMuchArgs: more positional tokens than positional params
        :raise Parser.ParseException: a token does not convert, or an option is unknown
        """
        positional = [p for p in params if p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD)]
        options = {p.name.replace('_', '-'): p for p in params if p.kind == p.KEYWORD_ONLY}

        args, kwargs = [], {}
        i = 0
        while i < len(tokens):
            token = tokens[i]
            if token.startswith('--'):
                param = options.get(token[2:])
                if param is None:
                    raise Parser.ParseException(ValueError(f'unknown option {token}'))
                if param.annotation is bool:
                    kwargs[param.name] = True
                else:
                    if i + 1 >= len(tokens):
                        raise Parser.ParseException(ValueError(f'option {token} needs a value'))
                    i += 1
                    kwargs[param.name] = self._convert(param, tokens[i])
            else:
                if len(args) >= len(positional):
                    raise Parser.TooMuchArgs(len(positional), len(args) + 1, token)
                args.append(self._convert(positional[len(args)], token))
            i += 1

        missing = [p.name for p in positional[len(args):] if p.default is inspect.Parameter.empty]
        if missing:
            raise Parser.ParseException(ValueError(f'missing arguments: {", ".join(missing)}'))
        return args, kwargs

    def _convert(self, param: inspect.Parameter, token: str) -> Any:
        arg_type = param.annotation

        # no type hint for t
        if arg_type == inspect.Parameter.empty:
            return token

        if arg_type not in self._parse_funcs:
            raise Parser.ParseFuncNotExists(param)

        try:
            return self._parse_funcs[arg_type](token)
        except DCMBException:
            raise
        except Exception as e:
            raise Parser.ParseException(e) from e

    def register(self, func):
        """
        decorator, register the func into object restricted _parse_funcs()

        checks if parse func for that type exists, and insert if not
        :param func: parse func
        """
        s = inspect.signature(func)

        # check: 1. not coroutine, 2. len matches
        if asyncio.iscoroutinefunction(func):
            raise TypeError('parse function should not be async')
        if len(s.parameters) != 1 or list(s.parameters.values())[0].annotation != str:
            raise TypeError('parse function should own only one param, and the param type is str')

        # insert, remember this is a replacement
        self._parse_funcs[s.return_annotation] = func
        return func

    class ParserException(DCMBException):
        category = 'config'

    class TooMuchArgs(ParserException):
        def __init__(self, expected: int, exact: int, token: str):
            super().__init__(f'expected at most {expected} arguments, got {exact} (at {token!r})')
            self.expected = expected
            self.exact = exact

    class ParseFuncNotExists(ParserException):
        def __init__(self, expected: inspect.Parameter):
            super().__init__(f'no parse function for {expected.name}: {expected.annotation}')
            self.expected = expected

    class ParseException(ParserException):
        def __init__(self, err: Exception):
            super().__init__(str(err))
            self.err = err
