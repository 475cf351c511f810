"""
the ``dcmb`` command line

    dcmb run <config> [--seed N] [--paper-faithful] [--out DIR]
    dcmb verify-audit <ledger> <disclosures>
    dcmb verify-chain <ledger>
    dcmb certify <config> <module-id>
    dcmb inspect-ledger <ledger>
    dcmb audit-lookup <ledger> <hash>
"""
import asyncio
import json
import logging
import sys
from typing import List

from .command import CommandManager, Parser
from .interface import DCMBException, TxKinds, _get_repr
from .ledger import Ledger
from .scenario import ScenarioConfig, Simulator, verify_audit, load_disclosures

log = logging.getLogger(__name__)

EXIT_CODES = {'config': 2, 'chain': 3, 'gate': 4, 'audit': 5}

parser = Parser()
cli = CommandManager()


@parser.register
def _scenario_config(path: str) -> ScenarioConfig:
    return ScenarioConfig.load(path)


@parser.register
def _ledger(path: str) -> Ledger:
    try:
        return Ledger.load(path)
    except OSError as e:
        raise Parser.ParseException(e) from e


@cli('run', desc='replay a scenario, write ledger, event log and report', parser=parser,
     help='--seed replaces rng_seed, --paper-faithful reuses one salt for every audit commitment,\n'
          '--out names the output directory. exit code 4 if a module fails the deployment gate')
async def run_scenario(config: ScenarioConfig, *, seed: int = None, paper_faithful: bool = False,
                       out: str = 'out'):
    if seed is not None:
        config.rng_seed = seed
    if paper_faithful:
        config.paper_faithful = True
    report = await Simulator(config, out_dir=out).start()
    print(report.to_text(), end='')
    return 0


@cli('verify-audit', desc='check disclosed (payload, salt) pairs against a ledger', parser=parser,
     help='disclosures: a JSON list of {"payload": ..., "salt": "text" or {"hex": ...}}.\n'
          'exit code 5 if any pair is unverified, 3 if the chain does not verify')
async def verify_audit_cmd(ledger: Ledger, disclosures: str):
    try:
        pairs = load_disclosures(disclosures)
    except (OSError, ValueError, KeyError) as e:
        raise Parser.ParseException(e) from e
    results = verify_audit(ledger, pairs)
    for r in results:
        where = f' (blocks {", ".join(str(e.block_height) for e in r.entries)})' if r.verified else ''
        print(f'{str(r.payload):>16}  {r.salt.hex()}  {"verified" if r.verified else "unverified"}{where}')
    return 0 if all(r.verified for r in results) else EXIT_CODES['audit']


@cli('verify-chain', desc='recompute every hash and link of a ledger', parser=parser)
async def verify_chain_cmd(ledger: Ledger):
    valid, height = ledger.verify_chain()
    if not valid:
        raise Ledger.ChainInvalid(f'chain broken at height {height}', height=height)
    print(f'chain valid: {ledger.height} blocks')
    return 0


@cli('certify', desc='run the certification round of one module and print the on-chain record', parser=parser)
async def certify_cmd(config: ScenarioConfig, module_id: str):
    record = Simulator(config).certify(module_id)
    print(json.dumps(_get_repr(record), indent=2, sort_keys=True))
    return 0 if record.status.value == 'certified' else EXIT_CODES['gate']


@cli('inspect-ledger', desc='summarize blocks, registries and transaction kinds', parser=parser,
     aliases=['inspect'])
async def inspect_ledger_cmd(ledger: Ledger):
    valid, height = ledger.verify_chain()
    print(f'blocks: {ledger.height}, chain {"valid" if valid else f"broken at height {height}"}')
    for block in ledger.blocks:
        kinds = {}
        for tx in block.txs:
            kinds[tx.kind.value] = kinds.get(tx.kind.value, 0) + 1
        summary = ', '.join(f'{n} {k}' for k, n in sorted(kinds.items())) or 'empty'
        print(f'  #{block.height:<4} {block.block_hash[:16]}  tick {block.sealed_at:<5} {summary}')
    print(f'participants: {", ".join(f"{p} ({ledger.role_of(p).value})" for p in ledger.participants())}')
    print(f'contracts: {", ".join(ledger.contract_registry) or "none"}')
    print(f'modules: {", ".join(ledger.module_keys) or "none"}')
    print(f'evidence txs: {sum(1 for _ in ledger.transactions(TxKinds.EVIDENCE))}')
    return 0


@cli('audit-lookup', desc='find the Evidence commitments with a given hash', parser=parser,
     aliases=['lookup'], help='the hash is hex, exit code 5 if no commitment has it')
async def audit_lookup_cmd(ledger: Ledger, commitment_hash: str):
    entries = ledger.audit_lookup(commitment_hash)
    for e in entries:
        print(f'block {e.block_height}  tx {e.tx_id}  module {e.module_id}  salt {e.salt.hex()}')
    return 0 if entries else EXIT_CODES['audit']


def usage() -> str:
    return f'usage: dcmb [--verbose] <command> ...\n       dcmb help <command>\n\ncommands:\n{cli.usage()}\n'


def main(argv: List[str] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    verbose = '--verbose' in argv
    argv = [a for a in argv if a != '--verbose']
    logging.basicConfig(level='DEBUG' if verbose else 'INFO',
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    if not argv or argv[0] in ('-h', '--help', 'help'):
        if len(argv) > 1:
            cmd = cli.get(argv[1])
            if cmd is None:
                print(f'unknown command: {argv[1]}\n\n{usage()}', file=sys.stderr, end='')
                return 2
            print(f'usage: dcmb {cmd.manual}')
            return 0
        print(usage(), end='')
        return 0 if argv else 2

    loop = asyncio.new_event_loop()
    try:
        code = loop.run_until_complete(cli.handle(argv))
    except DCMBException as e:
        log.debug('command failed', exc_info=e)
        print(f'error ({e.category}): {e}', file=sys.stderr)
        return EXIT_CODES.get(e.category, 1)
    finally:
        loop.close()

    if code is None:
        print(f'unknown command: {argv[0]}\n\n{usage()}', file=sys.stderr, end='')
        return 2
    return code


if __name__ == '__main__':
    sys.exit(main())
