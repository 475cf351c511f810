import asyncio
import inspect

import pytest

from dcmb.command import Command, CommandManager, DefaultLexer, Lexer, Parser


def run(coro):
    loop = asyncio.new_event_loop()
    try:
        return loop.run_until_complete(coro)
    finally:
        loop.close()


def test_default_lexer():
    lexer = DefaultLexer({'verify-chain', 'vc'})
    assert lexer.lex(['vc', 'ledger.ndjson']) == ['ledger.ndjson']
    with pytest.raises(Lexer.NotMatched):
        lexer.lex(['run'])
    with pytest.raises(Lexer.NotMatched):
        lexer.lex([])


def test_parser_options_and_flags():
    async def handler(path: str, count: int, *, seed: int = None, paper_faithful: bool = False, out: str = 'out'):
        pass

    params = list(inspect.signature(handler).parameters.values())
    parser = Parser()
    assert parser.parse(['a', '3'], params) == (['a', 3], {})
    assert parser.parse(['--paper-faithful', 'a', '--seed', '5', '3'], params) == \
           (['a', 3], {'paper_faithful': True, 'seed': 5})
    with pytest.raises(Parser.TooMuchArgs):
        parser.parse(['a', '3', '4'], params)
    with pytest.raises(Parser.ParseException):
        parser.parse(['a'], params)
    with pytest.raises(Parser.ParseException):
        parser.parse(['a', '3', '--out'], params)
    with pytest.raises(Parser.ParseException):
        parser.parse(['a', 'three'], params)


def test_parser_register():
    parser = Parser()

    class Point:
        def __init__(self, x, y):
            self.x, self.y = x, y

    @parser.register
    def _point(token: str) -> Point:
        return Point(*map(int, token.split(',')))

    async def handler(p: Point):
        pass

    args, _ = parser.parse(['1,2'], list(inspect.signature(handler).parameters.values()))
    assert (args[0].x, args[0].y) == (1, 2)

    with pytest.raises(TypeError):
        parser.register(lambda token, extra: None)

    async def async_parse(token: str) -> int:
        return 0

    with pytest.raises(TypeError):
        parser.register(async_parse)

    async def needs_point(p: Point):
        pass

    with pytest.raises(Parser.ParseFuncNotExists):
        Parser().parse(['1,2'], list(inspect.signature(needs_point).parameters.values()))


def test_manager():
    cli = CommandManager()
    calls = []

    @cli('greet', desc='say hello', aliases=['hi'])
    async def greet(name: str, *, loud: bool = False):
        calls.append((name, loud))
        return 7

    assert cli['greet'] is greet and cli.get('nothing') is None
    assert run(cli.handle(['hi', 'owner', '--loud'])) == 7
    assert run(cli.handle(['bye'])) is None
    assert calls == [('owner', True)]
    assert 'greet <name> [--loud]' in cli.usage() and 'say hello' in cli.usage()

    with pytest.raises(ValueError):
        cli.add(Command.command('greet')(greet.handler))


def test_command_needs_a_coroutine():
    with pytest.raises(TypeError):
        Command.command('sync')(lambda: None)


def test_execute_defaults_to_zero():
    @Command.command()
    async def quiet():
        pass

    assert quiet.name == 'quiet'
    assert run(quiet.handle(['quiet'])) == 0
