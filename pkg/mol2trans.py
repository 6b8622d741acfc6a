#!/usr/bin/env python3
"""
Mol2Trans - Matched Molecular Pair Transformation Toolkit
Mines matched pairs, trains a molecule-to-transformation model and evaluates
its suggestions from one command line
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence

import torch

from mmp_beam_search import SearchConfig, decode_sources, write_generation
from mmp_config import Config, RunConfig, parse_float_list, parse_int_list, setup_logging
from mmp_errors import EmptyResult, MoleculeError, Mol2TransError, UsageError
from mmp_eval import (
    COVERAGE_KS,
    DEFAULT_KS,
    SWEEP_KS,
    AccuracyRow,
    CoverageRow,
    EvalReport,
    KnownSet,
    SweepRow,
    ValidExistRow,
    build_coverage_groups,
    columns_of,
    coverage_by_group,
    load_known_set,
    score_external_predictions,
    search_size_sweep,
    select_sweep_subset,
    sibling_split_paths,
    task_accuracy,
    unique_sources,
    valid_exist_table,
    write_report,
)
from mmp_fragmenter import FragmentationConstraints, attachment_site
from mmp_miner import (
    MiningConfig,
    check_ratios,
    mine_corpus,
    read_index,
    read_pairs,
    sample_and_split,
    write_index,
    write_pairs,
    write_splits,
)
from mmp_molgraph import parse_smiles, read_corpus
from mmp_seq2seq import (
    CHECKPOINT_FORMAT_VERSION,
    ModelConfig,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = '1.0.0'

logger = logging.getLogger('mol2trans')


def parse_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off', ''):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def parse_path_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(',') if part.strip()]


class Setting(NamedTuple):
    default: Any
    convert: Callable[[str], Any]
    help: str
    flag: bool = False


RUNTIME = {
    'threads': Setting(1, int, 'Worker threads / processes (default: machine parallelism)'),
    'log_level': Setting('INFO', str, 'Logging level'),
}

BOUNDS = {
    'max_core': Setting(50, int, 'Max heavy atoms in the core (default: 50)'),
    'max_rgroup': Setting(13, int, 'Max heavy atoms in the R-group (default: 13)'),
    'max_ratio': Setting(0.33, float, 'R-group / parent heavy-atom ratio, strict (default: 0.33)'),
}

SETTINGS: Dict[str, Dict[str, Setting]] = {
    'mine': {
        'input': Setting(None, str, 'Corpus file: <smiles>[TAB<id>] per line'),
        'out': Setting(None, str, 'Pairs TSV (default: standard output)'),
        'index_out': Setting(None, str, 'Also write the fragment index here'),
        **BOUNDS,
        'per_mol_cap': Setting(10, int, 'Max records per source molecule (default: 10)'),
        'per_rule_cap': Setting(10, int, 'Max records per transformation (default: 10)'),
        'sample': Setting(None, int, 'Uniformly sample this many records after capping'),
        'seed': Setting(0, int, 'Random seed'),
    },
    'split': {
        'pairs': Setting(None, str, 'Pairs TSV to split'),
        'ratios': Setting([0.8, 0.1, 0.1], parse_float_list, 'train,valid,test ratios (default: 0.8,0.1,0.1)'),
        'seed': Setting(0, int, 'Random seed'),
        'out_prefix': Setting(None, str, 'Writes <prefix>.{train,valid,test}.tsv'),
    },
    'train': {
        'train': Setting(None, str, 'Training pairs TSV'),
        'valid': Setting(None, str, 'Validation pairs TSV'),
        'out_ckpt': Setting(None, str, 'Checkpoint to write; the epoch log goes to <ckpt>.log'),
        'resume': Setting(None, str, 'Continue training from this checkpoint'),
        'd_model': Setting(64, int, 'Model width (default: 64)'),
        'n_heads': Setting(4, int, 'Attention heads (default: 4)'),
        'encoder_layers': Setting(2, int, 'Encoder blocks (default: 2)'),
        'decoder_layers': Setting(2, int, 'Decoder blocks (default: 2)'),
        'd_ffn': Setting(256, int, 'Feed-forward width (default: 256)'),
        'max_src_len': Setting(160, int, 'Max source tokens incl. BOS/EOS (default: 160)'),
        'max_tgt_len': Setting(96, int, 'Max target tokens incl. BOS/EOS (default: 96)'),
        'dropout': Setting(0.1, float, 'Dropout (default: 0.1)'),
        'batch_size': Setting(64, int, 'Batch size (default: 64)'),
        'learning_rate': Setting(5e-4, float, 'Adam learning rate (default: 5e-4)'),
        'patience': Setting(2, int, 'Early-stopping patience in epochs (default: 2)'),
        'max_epochs': Setting(100, int, 'Epoch limit (default: 100)'),
        'seed': Setting(0, int, 'Random seed'),
    },
    'generate': {
        'ckpt': Setting(None, str, 'Checkpoint file'),
        'source': Setting(None, str, 'Source molecule SMILES'),
        'input': Setting(None, str, 'Corpus file of source molecules'),
        'k': Setting(100, int, 'Candidates per source (default: 100)'),
        'beam': Setting(100, int, 'Beam size (default: 100)'),
        'temperature': Setting(0.3, float, 'Softmax temperature (default: 0.3)'),
        'replace': Setting(None, str, 'Fragment to replace, e.g. "[*:1]O"'),
        'permissive': Setting(False, parse_bool, 'Apply rules without size bounds', flag=True),
        **BOUNDS,
    },
    'eval': {
        'ckpt': Setting(None, str, 'Checkpoint file'),
        'test': Setting(None, str, 'Test pairs TSV'),
        'pairs': Setting(None, parse_path_list, 'Pairs TSVs forming the known set (default: split files next to --test)'),
        'ks': Setting(list(DEFAULT_KS), parse_int_list, 'Search sizes (default: 1,10,20,50,100)'),
        'beam': Setting(200, int, 'Beam size (default: 200)'),
        'temperature': Setting(0.3, float, 'Softmax temperature (default: 0.3)'),
        'out': Setting(None, str, 'Metrics CSV (default: standard output)'),
    },
    'sweep': {
        'ckpt': Setting(None, str, 'Checkpoint file'),
        'subset': Setting(None, str, 'Pairs TSV the sweep sources are drawn from'),
        'pairs': Setting(None, parse_path_list, 'Pairs TSVs forming the known set (default: split files next to --subset)'),
        'ks': Setting(list(SWEEP_KS), parse_int_list, 'Search sizes (default: 1,5,10,50,100,200,500,1000)'),
        'beam': Setting(None, int, 'Beam size (default: largest k)'),
        'n_targets': Setting(50, int, 'Use sources with exactly this many known targets (default: 50)'),
        'temperature': Setting(0.3, float, 'Softmax temperature (default: 0.3)'),
        'out': Setting(None, str, 'Sweep CSV (default: standard output)'),
    },
    'coverage': {
        'ckpt': Setting(None, str, 'Checkpoint file'),
        'test': Setting(None, str, 'Test pairs TSV'),
        'pairs': Setting(None, parse_path_list, 'Pairs TSVs forming the known set (default: split files next to --test)'),
        'index': Setting(None, str, 'Fragment index from `mine --index-out`; gives uncapped known targets'),
        'ks': Setting(list(COVERAGE_KS), parse_int_list, 'Known-target group sizes (default: 1,10,20,30,40,50)'),
        'per_group': Setting(100, int, 'Sources per group (default: 100)'),
        'beam': Setting(200, int, 'Beam size (default: 200)'),
        'temperature': Setting(0.3, float, 'Softmax temperature (default: 0.3)'),
        'seed': Setting(0, int, 'Random seed for group sampling'),
        'out': Setting(None, str, 'Coverage CSV (default: standard output)'),
    },
    'score': {
        'predictions': Setting(None, str, 'TSV with header source, rank, prediction'),
        'pairs': Setting(None, parse_path_list, 'Pairs TSVs forming the known set'),
        'ks': Setting(list(DEFAULT_KS), parse_int_list, 'Search sizes (default: 1,10,20,50,100)'),
        'out': Setting(None, str, 'Metrics CSV (default: standard output)'),
    },
    'accuracy': {
        'ckpt': Setting(None, str, 'Checkpoint file'),
        'test': Setting(None, str, 'Test pairs TSV'),
        'ks': Setting([1, 10, 20, 50, 100], parse_int_list, 'Search sizes (default: 1,10,20,50,100)'),
        'beam': Setting(100, int, 'Beam size (default: 100)'),
        'temperature': Setting(0.3, float, 'Softmax temperature (default: 0.3)'),
        'out': Setting(None, str, 'Accuracy CSV (default: standard output)'),
    },
}

DESCRIPTIONS = {
    'mine': 'Mine matched molecular pairs from a corpus',
    'split': 'Split a pairs file into train/valid/test by source molecule',
    'train': 'Train a molecule-to-transformation model',
    'generate': 'Suggest transformations and products for source molecules',
    'eval': 'Validity and existence metrics at several search sizes',
    'sweep': 'Existing vs novel products as the search size grows',
    'coverage': 'Coverage of known matched targets by known-target group',
    'score': 'Validity and existence metrics of an external predictions file',
    'accuracy': 'Fragment removal, replacement and overall accuracy',
}

REQUIRED = {
    'mine': ['input'],
    'split': ['pairs', 'out_prefix'],
    'train': ['train', 'valid', 'out_ckpt'],
    'generate': ['ckpt'],
    'eval': ['ckpt', 'test'],
    'sweep': ['ckpt', 'subset'],
    'coverage': ['ckpt', 'test'],
    'score': ['predictions', 'pairs'],
    'accuracy': ['ckpt', 'test'],
}


class CommandLineParser(argparse.ArgumentParser):
    """argparse with usage errors raised instead of exiting with status 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def version_text() -> str:
    return f"mol2trans {__version__} (checkpoint format {CHECKPOINT_FORMAT_VERSION})"


def build_parser() -> argparse.ArgumentParser:
    common = CommandLineParser(add_help=False)
    common.add_argument('--log-level', dest='log_level', default=argparse.SUPPRESS,
                        help='Logging level (default: LOG_LEVEL or INFO)')
    common.add_argument('--threads', type=int, default=argparse.SUPPRESS,
                        help='Worker threads / processes (default: MOL2TRANS_THREADS or CPU count)')
    common.add_argument('--config', default=argparse.SUPPRESS,
                        help='key=value file of settings for the command')

    parser = CommandLineParser(
        prog='mol2trans',
        description='Matched molecular pair transformation toolkit',
        parents=[common],
    )
    parser.add_argument('--version', action='version', version=version_text())
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    for command, settings in SETTINGS.items():
        sub = subparsers.add_parser(command, help=DESCRIPTIONS[command],
                                    description=DESCRIPTIONS[command], parents=[common])
        for key, setting in settings.items():
            flag = '--' + key.replace('_', '-')
            if setting.flag:
                sub.add_argument(flag, dest=key, action='store_true', default=None, help=setting.help)
            else:
                sub.add_argument(flag, dest=key, type=setting.convert, default=None, help=setting.help)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    settings = {**SETTINGS[args.command], **RUNTIME}
    flags = {key: getattr(args, key, None) for key in settings}
    config = RunConfig.resolve(
        args.command,
        flags,
        defaults={key: s.default for key, s in settings.items()},
        converters={key: s.convert for key, s in settings.items()},
        config_file=getattr(args, 'config', None),
    )
    missing = [key for key in REQUIRED[args.command] if not config[key]]
    if missing:
        flags_text = ', '.join('--' + key.replace('_', '-') for key in missing)
        raise UsageError(f"{args.command} requires {flags_text}")
    if config['threads'] < 1:
        raise UsageError("--threads must be at least 1")
    return config


def build(factory: Callable, *args, **kwargs):
    """Construct a config object, turning invalid values into usage errors"""
    try:
        return factory(*args, **kwargs)
    except ValueError as e:
        raise UsageError(str(e))


def bounds(config: RunConfig) -> FragmentationConstraints:
    if config.get('permissive'):
        return FragmentationConstraints.permissive()
    return build(FragmentationConstraints, config['max_core'], config['max_rgroup'], config['max_ratio'])


def output_target(path: Optional[str]):
    if not path:
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return path


def check_ks(ks: Sequence[int], beam: int) -> None:
    if any(k < 1 for k in ks):
        raise UsageError("search sizes must be at least 1")
    if beam < 1:
        raise UsageError("beam size must be at least 1")
    if max(ks) > beam:
        raise UsageError(f"largest k ({max(ks)}) exceeds the beam size ({beam})")


def known_set_for(config: RunConfig, records_path: str) -> KnownSet:
    paths = config.get('pairs') or sibling_split_paths(records_path)
    if not config.get('pairs'):
        logger.info(f"Known set from {', '.join(paths)}")
    return load_known_set(paths)


def log_provenance(config: RunConfig) -> None:
    for line in config.provenance_lines():
        logger.info(line)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_mine(config: RunConfig) -> int:
    mining = build(MiningConfig, bounds(config), config['per_mol_cap'], config['per_rule_cap'],
                   config['sample'], config['seed'])
    log_provenance(config)
    entries = read_corpus(config['input'])
    result = mine_corpus(entries, mining, config['threads'])

    for line in result.stats.lines():
        print(line, file=sys.stderr)
    if not result.records:
        raise EmptyResult("no matched molecular pairs found")

    write_pairs(result.records, output_target(config['out']))
    if config['index_out']:
        write_index(result.index, output_target(config['index_out']))
        logger.info(f"Fragment index written to {config['index_out']}")
    return 0


def cmd_split(config: RunConfig) -> int:
    ratios = config['ratios']
    try:
        check_ratios(ratios)
    except ValueError as e:
        raise UsageError(str(e))
    log_provenance(config)
    records = read_pairs(config['pairs'])
    splits = sample_and_split(records, MiningConfig(seed=config['seed']), ratios)
    for path, records in zip(write_splits(splits, config['out_prefix']), splits):
        logger.info(f"Wrote {len(records)} records to {path}")
    return 0


def cmd_train(config: RunConfig) -> int:
    model_config = build(
        ModelConfig,
        d_model=config['d_model'],
        n_heads=config['n_heads'],
        n_encoder_layers=config['encoder_layers'],
        n_decoder_layers=config['decoder_layers'],
        d_ffn=config['d_ffn'],
        max_src_len=config['max_src_len'],
        max_tgt_len=config['max_tgt_len'],
        dropout=config['dropout'],
    )
    train_config = build(
        TrainConfig,
        batch_size=config['batch_size'],
        learning_rate=config['learning_rate'],
        early_stop_patience_epochs=config['patience'],
        max_epochs=config['max_epochs'],
        seed=config['seed'],
    )
    log_provenance(config)
    torch.set_num_threads(config['threads'])

    resume = load_checkpoint(config['resume']) if config['resume'] else None
    train_records = read_pairs(config['train'])
    valid_records = read_pairs(config['valid'])
    out_ckpt = config['out_ckpt']
    Path(out_ckpt).parent.mkdir(parents=True, exist_ok=True)
    checkpoint = train(train_records, valid_records, model_config, train_config,
                       resume=resume, log_path=out_ckpt + '.log')
    save_checkpoint(out_ckpt, checkpoint)
    logger.info(f"Checkpoint written to {out_ckpt} (epoch {checkpoint.epoch}, "
                f"valid loss {checkpoint.best_valid_loss:.6f})")
    return 0


def cmd_generate(config: RunConfig) -> int:
    if bool(config['source']) == bool(config['input']):
        raise UsageError("generate needs exactly one of --source or --input")
    check_ks([config['k']], config['beam'])
    constraints = bounds(config)

    fragment = None
    if config['replace']:
        try:
            fragment = parse_smiles(config['replace'])
            attachment_site(fragment, 'fragment')
        except MoleculeError as e:
            raise UsageError(f"--replace: {e}")

    if config['source']:
        try:
            sources = [parse_smiles(config['source'])]
        except MoleculeError as e:
            raise UsageError(f"--source: {e}")
    else:
        sources = []
        for entry in read_corpus(config['input']):
            if entry.ok:
                sources.append(entry.molecule)
            else:
                logger.warning(f"Line {entry.line_number}: skipped ({entry.error})")
        if not sources:
            raise EmptyResult(f"no usable source molecules in {config['input']}")

    checkpoint = load_checkpoint(config['ckpt'])
    search = build(SearchConfig, beam_size=config['beam'], temperature=config['temperature'],
                   top_k=config['k'], max_steps=checkpoint.model_config.max_tgt_len)
    log_provenance(config)
    torch.set_num_threads(config['threads'])

    results = decode_sources(checkpoint, sources, search, constraints, config['threads'], fragment)
    write_generation([(mol.canonical, candidates) for mol, candidates in zip(sources, results)], sys.stdout)
    return 0


def cmd_eval(config: RunConfig) -> int:
    ks, beam = config['ks'], config['beam']
    check_ks(ks, beam)
    checkpoint = load_checkpoint(config['ckpt'])
    test_records = read_pairs(config['test'])
    known = known_set_for(config, config['test'])
    torch.set_num_threads(config['threads'])

    rows = valid_exist_table(checkpoint, unique_sources(test_records), ks, beam, known,
                             config['temperature'], threads=config['threads'])
    EvalReport(rows, [], []).check()
    write_report(rows, columns_of(ValidExistRow), output_target(config['out']), config.provenance_lines())
    return 0


def cmd_sweep(config: RunConfig) -> int:
    ks = sorted(config['ks'])
    beam = config['beam'] or max(ks)
    check_ks(ks, beam)
    checkpoint = load_checkpoint(config['ckpt'])
    subset_records = read_pairs(config['subset'])
    known = known_set_for(config, config['subset'])
    sources = select_sweep_subset(unique_sources(subset_records), known, config['n_targets'])
    torch.set_num_threads(config['threads'])

    rows = search_size_sweep(checkpoint, sources, ks, beam, known, config['temperature'],
                             threads=config['threads'])
    EvalReport([], [], rows).check()
    write_report(rows, columns_of(SweepRow), output_target(config['out']), config.provenance_lines())
    return 0


def cmd_coverage(config: RunConfig) -> int:
    checkpoint = load_checkpoint(config['ckpt'])
    test_records = read_pairs(config['test'])
    if config['index']:
        known = KnownSet.from_index(read_index(config['index']))
    else:
        known = known_set_for(config, config['test'])
    groups = build_coverage_groups(unique_sources(test_records), known, config['ks'],
                                   config['per_group'], config['seed'])
    if not any(groups.values()):
        raise EmptyResult("no test source falls in any known-target group")
    torch.set_num_threads(config['threads'])

    rows = coverage_by_group(checkpoint, groups, config['beam'], known, config['temperature'],
                             threads=config['threads'])
    EvalReport([], rows, []).check()
    write_report(rows, columns_of(CoverageRow), output_target(config['out']), config.provenance_lines())
    return 0


def cmd_score(config: RunConfig) -> int:
    check_ks(config['ks'], max(config['ks']))
    known = load_known_set(config['pairs'])
    rows = score_external_predictions(config['predictions'], known, config['ks'])
    EvalReport(rows, [], []).check()
    write_report(rows, columns_of(ValidExistRow), output_target(config['out']), config.provenance_lines())
    return 0


def cmd_accuracy(config: RunConfig) -> int:
    ks, beam = config['ks'], config['beam']
    check_ks(ks, beam)
    checkpoint = load_checkpoint(config['ckpt'])
    test_records = read_pairs(config['test'])
    torch.set_num_threads(config['threads'])

    rows = task_accuracy(checkpoint, test_records, ks, beam, config['temperature'],
                         threads=config['threads'])
    write_report(rows, columns_of(AccuracyRow), output_target(config['out']), config.provenance_lines())
    return 0


COMMANDS = {
    'mine': cmd_mine,
    'split': cmd_split,
    'train': cmd_train,
    'generate': cmd_generate,
    'eval': cmd_eval,
    'sweep': cmd_sweep,
    'coverage': cmd_coverage,
    'score': cmd_score,
    'accuracy': cmd_accuracy,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        setup_logging(Config.LOG_LEVEL)
        args = parser.parse_args(argv)
        config = resolve_config(args)
        setup_logging(config['log_level'])
        return COMMANDS[args.command](config)
    except Mol2TransError as e:
        print(f"Error: {e}", file=sys.stderr)
        logger.debug("Command failed", exc_info=True)
        return e.exit_code
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        logger.debug("Command failed", exc_info=True)
        return 2


if __name__ == "__main__":
    exit(main())
