"""Command-line surface: keygen, send, scan, simulate, bench, counts."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from dotenv import load_dotenv

from stealthkit import ConfigError, Toolkit, create_toolkit
from stealthkit.backends import POINT_ENCODINGS, available_backends
from stealthkit.dksap import DksapAuditor, DksapReceiver, DksapSender, keygen
from stealthkit.dksap_iot import IotAuditor, IotReceiver, IotSender
from stealthkit.events import get_logger, log_event
from stealthkit.group import EntropyError, GroupError, deterministic_entropy
from stealthkit.ledger import LedgerError, TrafficSpec, TrafficSpecError, scan_range
from stealthkit.services.bench_service import (
    SCHEMES,
    SIDES,
    BenchValidationError,
    CountMismatchError,
    TimerResolutionError,
    check_half_cost_claim,
    expected_counts,
    expected_wire_savings,
    measure_cost_model,
    rows_to_csv,
    run_comparison,
    verify_formula_agreement,
    wire_savings,
    write_csv,
)
from stealthkit.services.keyfile_service import (
    ServiceError,
    auditor_bundle_payload,
    key_bundle_payload,
    load_bundle,
    load_ledger,
    load_state,
    public_bundle_payload,
    save_state,
    write_json,
)
from stealthkit.services.plot_service import write_plot_files
from stealthkit.services.simulate_service import run_simulation
from stealthkit.wire import MalformedTxError


EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_MISMATCH = 3

logger = get_logger("cli")


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _entropy(args):
    # Seeded entropy is for reproducible runs only; reusing a seed reuses r_A.
    if args.seed is None:
        return None
    return deterministic_entropy(f"{args.seed}:{args.command}")


def cmd_backends(args, toolkit: Toolkit) -> int:
    _emit({'backends': available_backends(), 'selected': toolkit.config.backend})
    return 0


def cmd_keygen(args, toolkit: Toolkit) -> int:
    group = toolkit.group
    keys = keygen(group.session(_entropy(args)))
    write_json(args.out, key_bundle_payload(group, keys))
    public = public_bundle_payload(group, keys.public())
    if args.public_out:
        write_json(args.public_out, public)
    if args.auditor_out:
        write_json(args.auditor_out, auditor_bundle_payload(group, keys.auditor()))
    _emit(public)
    return 0


def cmd_send(args, toolkit: Toolkit) -> int:
    group = toolkit.group
    recipient = load_bundle(group, args.to, 'public')
    ledger = load_ledger(group, args.ledger_file)
    entropy = _entropy(args)
    if args.scheme == 'dksap':
        sender = DksapSender(group, entropy)
        txs = [sender.send(recipient, args.amount) for _ in range(args.count)]
    else:
        if not args.state_file:
            raise ServiceError('dksap-iot sends need --state-file to keep the epoch state', EXIT_INPUT)
        table = load_state(group, args.state_file, 'sender', toolkit.epoch)
        sender = IotSender(group, table.config, entropy, table)
        txs = [sender.send(args.peer, recipient, args.amount) for _ in range(args.count)]
        save_state(group, args.state_file, table)
    height = ledger.append_block(txs)
    if args.ledger_file:
        ledger.save(args.ledger_file)
    _emit(
        {
            'scheme': args.scheme,
            'height': height,
            'txs': [
                {'cold': tx.carries_ephemeral, 'destination': tx.destination.encode().hex(), 'bytes': len(tx.encode())}
                for tx in txs
            ],
            'counters': sender.session.counters_snapshot().as_dict(),
        }
    )
    return 0


def _scan_actor(args, toolkit: Toolkit):
    group = toolkit.group
    kind = 'auditor' if args.auditor else 'keys'
    bundle = load_bundle(group, args.keys, kind)
    if args.scheme == 'dksap':
        actor = DksapAuditor(group, bundle) if args.auditor else DksapReceiver(group, bundle)
        return actor, None
    role = 'auditor' if args.auditor else 'receiver'
    table = load_state(group, args.state_file, role, toolkit.epoch)
    if args.auditor:
        return IotAuditor(group, bundle, table.config, table), table
    return IotReceiver(group, bundle, table.config, table), table


def cmd_scan(args, toolkit: Toolkit) -> int:
    group = toolkit.group
    ledger = load_ledger(group, args.ledger_file, must_exist=True)
    actor, table = _scan_actor(args, toolkit)
    report = scan_range(actor, ledger, args.from_height, args.to_height)
    pruned = 0
    if table is not None:
        if args.prune_exhausted:
            pruned = table.prune_exhausted()
        save_state(group, args.state_file, table)
    matches = []
    for match in report.matches:
        record = {
            'height': match.height,
            'tx_index': match.tx_index,
            'destination': match.destination.encode().hex(),
        }
        if args.reveal_keys and not args.auditor:
            record['spend_key'] = match.spend_key.to_bytes().hex()
        matches.append(record)
    _emit(
        {
            'role': actor.role,
            'scheme': args.scheme,
            'txs_scanned': report.txs_scanned,
            'matches': matches,
            'counters': report.counters.as_dict(),
            'pruned_slots': pruned,
        }
    )
    return 0


def cmd_simulate(args, toolkit: Toolkit) -> int:
    spec = TrafficSpec(
        senders=args.senders,
        receivers=args.receivers,
        txs_per_pair=args.txs_per_pair,
        seed=args.seed or 0,
        epoch_n=toolkit.config.epoch_n,
        scheme=args.scheme,
        regular_txs=args.regular_txs,
        txs_per_block=args.txs_per_block,
        lookahead=toolkit.config.lookahead,
    )
    summary = run_simulation(toolkit.group, spec, workers=args.workers)
    _emit(summary)
    if summary['complete'] and summary['isolated'] and summary['auditor_parity']:
        return 0
    return EXIT_MISMATCH


def cmd_bench(args, toolkit: Toolkit) -> int:
    group = toolkit.group
    iterations = args.iterations or toolkit.config.bench_iterations
    seed = args.seed or 0
    cost_model = measure_cost_model(group, iterations)
    rows = run_comparison(group, args.n, cost_model, seed=seed)

    savings = {n: wire_savings(rows, n) for n in args.n}
    wrong = {n: value for n, value in savings.items() if value != expected_wire_savings(group, n)}
    if wrong:
        raise ServiceError(f'wire savings disagree with point_length x (N-1) for N in {sorted(wrong)}', EXIT_MISMATCH)

    claim = check_half_cost_claim(rows, cost_model, args.n)
    if args.csv_out:
        write_csv(rows, args.csv_out)
    else:
        sys.stdout.write(rows_to_csv(rows))
    plots = write_plot_files(rows, group, args.plot_dir) if args.plot_dir else []

    summary = {
        'backend': group.params.backend,
        'encoding': group.params.encoding,
        'cost_model': cost_model.as_dict(),
        'warnings': cost_model.sanity_warnings(),
        'wire_savings': savings,
        'half_cost_claim': {'status': claim.status, 'reason': claim.reason, 'ratios': claim.ratios},
        'csv': args.csv_out,
        'plots': plots,
    }
    # CSV owns stdout when no file was given.
    if args.csv_out:
        _emit(summary)
    else:
        print(json.dumps(summary, sort_keys=True, default=str), file=sys.stderr)
    return 0 if claim.status != 'failed' else EXIT_FAILURE


def cmd_counts(args, toolkit: Toolkit) -> int:
    table = [
        {'scheme': scheme, 'side': side, 'N': n, **expected_counts(scheme, side, n).as_dict()}
        for n in args.n
        for scheme in SCHEMES
        for side in SIDES
    ]
    payload = {'expected': table}
    if args.verify:
        mismatches = verify_formula_agreement(toolkit.group, args.n, seed=args.seed or 0)
        payload['mismatches'] = mismatches
        _emit(payload)
        if mismatches:
            for mismatch in mismatches:
                log_event(logger, 'error', 'bench.counts.mismatch', **mismatch)
            return EXIT_MISMATCH
        return 0
    _emit(payload)
    return 0


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f'{raw!r} is not an integer') from exc
    if value < 1:
        raise argparse.ArgumentTypeError('value must be >= 1')
    return value


def _amount(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f'{raw!r} is not an integer') from exc
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError('amount must fit in 64 bits')
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='stealthkit', description='Stealth address toolkit')
    parser.add_argument('--backend', help='group backend (see the backends command)')
    parser.add_argument('--encoding', choices=POINT_ENCODINGS, help='point encoding')
    parser.add_argument('--hash', dest='hash_name', help='hashlib algorithm name')
    parser.add_argument('--epoch-n', type=_positive_int, help='transactions per DKSAP-IoT epoch')
    parser.add_argument('--lookahead', type=_positive_int, help='receiver lookahead window')
    parser.add_argument('--seed', type=int, help='deterministic entropy seed (testing only)')
    parser.add_argument('--state-file', help='DKSAP-IoT state table file')
    parser.add_argument('--ledger-file', help='ledger file to read and append to')
    parser.add_argument('--csv-out', help='write bench CSV here instead of stdout')
    parser.add_argument('--log-level', help='logging level (default from STEALTH_LOG_LEVEL)')
    sub = parser.add_subparsers(dest='command', required=True)

    backends = sub.add_parser('backends', help='list group backends')
    backends.set_defaults(func=cmd_backends)

    gen = sub.add_parser('keygen', help='generate a receiver key bundle')
    gen.add_argument('--out', required=True, help='private key file')
    gen.add_argument('--public-out', help='public bundle file to hand to senders')
    gen.add_argument('--auditor-out', help='auditor bundle file (scan private + spend public)')
    gen.set_defaults(func=cmd_keygen)

    send = sub.add_parser('send', help='append stealth payments to the ledger')
    send.add_argument('--to', required=True, help='recipient public bundle file')
    send.add_argument('--amount', type=_amount, required=True)
    send.add_argument('--count', type=_positive_int, default=1)
    send.add_argument('--peer', default='default', help='local label for the recipient')
    send.add_argument('--scheme', choices=SCHEMES, default='dksap-iot')
    send.set_defaults(func=cmd_send)

    scan = sub.add_parser('scan', help='scan the ledger for incoming payments')
    scan.add_argument('--keys', required=True, help='key file (private or auditor bundle)')
    scan.add_argument('--auditor', action='store_true', help='scan as an auditor')
    scan.add_argument('--scheme', choices=SCHEMES, default='dksap-iot')
    scan.add_argument('--from-height', type=int, default=0)
    scan.add_argument('--to-height', type=int)
    scan.add_argument('--reveal-keys', action='store_true', help='print recovered spend keys')
    scan.add_argument(
        '--prune-exhausted',
        action='store_true',
        help='drop finished epochs from the state file (a later rescan of them matches again)',
    )
    scan.set_defaults(func=cmd_scan)

    sim = sub.add_parser('simulate', help='multi-party traffic simulation')
    sim.add_argument('--scheme', choices=SCHEMES, default='dksap-iot')
    sim.add_argument('--senders', type=_positive_int, default=2)
    sim.add_argument('--receivers', type=_positive_int, default=3)
    sim.add_argument('--txs-per-pair', type=_positive_int, default=5)
    sim.add_argument('--regular-txs', type=int, default=0)
    sim.add_argument('--txs-per-block', type=_positive_int, default=16)
    sim.add_argument('--workers', type=_positive_int, default=4)
    sim.set_defaults(func=cmd_simulate)

    bench = sub.add_parser('bench', help='cost comparison of both schemes')
    bench.add_argument('--n', type=_positive_int, nargs='+', default=[10, 20, 30])
    bench.add_argument('--iterations', type=int, help='timing iterations (>= 100)')
    bench.add_argument('--plot-dir', help='write gnuplot data and script here')
    bench.set_defaults(func=cmd_bench)

    counts = sub.add_parser('counts', help='closed-form operation counts')
    counts.add_argument('--n', type=_positive_int, nargs='+', default=[1, 10, 20, 30])
    counts.add_argument('--verify', action='store_true', help='check against instrumented runs')
    counts.set_defaults(func=cmd_counts)
    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format='%(asctime)s %(levelname)s %(name)s %(message)s',
        stream=sys.stderr,
    )


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        toolkit = create_toolkit(
            {
                'backend': args.backend,
                'encoding': args.encoding,
                'hash_name': args.hash_name,
                'epoch_n': args.epoch_n,
                'lookahead': args.lookahead,
                'log_level': args.log_level,
            }
        )
    except ConfigError as exc:
        log_event(logger, 'error', 'cli.command.failed', command=args.command, field=exc.field, error=exc.message)
        print(f'error: {exc.message}', file=sys.stderr)
        return EXIT_INPUT
    _configure_logging(toolkit.config.log_level)

    try:
        return args.func(args, toolkit)
    except CountMismatchError as exc:
        error = ServiceError(str(exc), EXIT_MISMATCH)
    except ServiceError as exc:
        error = exc
    except (BenchValidationError, TrafficSpecError, LedgerError, MalformedTxError) as exc:
        error = ServiceError(str(exc), EXIT_INPUT)
    except (TimerResolutionError, EntropyError, GroupError) as exc:
        error = ServiceError(str(exc), EXIT_FAILURE)
    log_event(logger, 'error', 'cli.command.failed', command=args.command, exit_code=error.exit_code, error=error.message)
    print(f'error: {error.message}', file=sys.stderr)
    return error.exit_code
