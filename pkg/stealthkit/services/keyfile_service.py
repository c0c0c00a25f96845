"""Service layer for key, state and ledger files used by the CLI."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

from stealthkit.dksap import AuditorBundle, KeyBundle, PublicBundle
from stealthkit.dksap_iot import (
    EpochConfig,
    ReceiverStateTable,
    SenderStateTable,
    StateFormatError,
    state_export,
    state_import,
)
from stealthkit.group import DecodeError, Group, GroupError
from stealthkit.ledger import Ledger
from stealthkit.wire import LedgerFormatError


KEYFILE_VERSION = 1


@dataclass
class ServiceError(Exception):
    """Typed service error mapped to CLI exit codes."""
    message: str
    exit_code: int = 1

    def __str__(self) -> str:
        return self.message


def _group_header(group: Group) -> dict:
    return {
        'version': KEYFILE_VERSION,
        'backend': group.params.backend,
        'encoding': group.params.encoding,
    }


def _check_group(payload: dict, group: Group) -> None:
    if payload.get('version') != KEYFILE_VERSION:
        raise ServiceError('unsupported key file version', 2)
    if (payload.get('backend'), payload.get('encoding')) != (group.params.backend, group.params.encoding):
        raise ServiceError(
            f"key file is for {payload.get('backend')}/{payload.get('encoding')}, "
            f"toolkit uses {group.params.backend}/{group.params.encoding}",
            2,
        )


def key_bundle_payload(group: Group, keys: KeyBundle) -> dict:
    return {
        **_group_header(group),
        'kind': 'keys',
        'scan_private': keys.scan_private.to_bytes().hex(),
        'scan_public': keys.scan_public.encode().hex(),
        'spend_private': keys.spend_private.to_bytes().hex(),
        'spend_public': keys.spend_public.encode().hex(),
    }


def public_bundle_payload(group: Group, bundle: PublicBundle) -> dict:
    return {
        **_group_header(group),
        'kind': 'public',
        'scan_public': bundle.scan_public.encode().hex(),
        'spend_public': bundle.spend_public.encode().hex(),
    }


def auditor_bundle_payload(group: Group, bundle: AuditorBundle) -> dict:
    return {
        **_group_header(group),
        'kind': 'auditor',
        'scan_private': bundle.scan_private.to_bytes().hex(),
        'spend_public': bundle.spend_public.encode().hex(),
    }


def _read_json(path: str) -> dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except FileNotFoundError as exc:
        raise ServiceError(f'file not found: {path}', 2) from exc
    except json.JSONDecodeError as exc:
        raise ServiceError(f'{path} is not valid JSON', 2) from exc
    if not isinstance(payload, dict):
        raise ServiceError(f'{path} must hold a JSON object', 2)
    return payload


def _hex_field(payload: dict, name: str) -> bytes:
    try:
        return bytes.fromhex(str(payload[name]))
    except KeyError as exc:
        raise ServiceError(f'key file is missing {name}', 2) from exc
    except ValueError as exc:
        raise ServiceError(f'key file field {name} is not hex', 2) from exc


def load_bundle(group: Group, path: str, expected_kind: str) -> KeyBundle | PublicBundle | AuditorBundle:
    """Load a key file; a full key file also serves where a public or auditor bundle is wanted."""
    payload = _read_json(path)
    _check_group(payload, group)
    kind = payload.get('kind')
    try:
        if expected_kind == 'keys':
            if kind != 'keys':
                raise ServiceError(f'{path} holds a {kind} bundle, private keys required', 2)
            return KeyBundle(
                scan_private=group.decode_scalar(_hex_field(payload, 'scan_private')),
                scan_public=group.decode_point(_hex_field(payload, 'scan_public')),
                spend_private=group.decode_scalar(_hex_field(payload, 'spend_private')),
                spend_public=group.decode_point(_hex_field(payload, 'spend_public')),
            )
        if expected_kind == 'public':
            return PublicBundle(
                group.decode_point(_hex_field(payload, 'scan_public')),
                group.decode_point(_hex_field(payload, 'spend_public')),
            )
        if expected_kind == 'auditor':
            if kind not in ('auditor', 'keys'):
                raise ServiceError(f'{path} holds a {kind} bundle, auditor keys required', 2)
            return AuditorBundle(
                group.decode_scalar(_hex_field(payload, 'scan_private')),
                group.decode_point(_hex_field(payload, 'spend_public')),
            )
    except (DecodeError, GroupError) as exc:
        raise ServiceError(f'{path}: {exc}', 2) from exc
    raise ServiceError(f'unknown bundle kind {expected_kind}', 2)


def write_json(path: str, payload: dict) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2)
        f.write('\n')


def load_state(group: Group, path: str | None, kind: str, config: EpochConfig):
    """Load a state table from ``path`` or start an empty one of ``kind``."""
    if path and os.path.exists(path):
        with open(path, 'rb') as f:
            try:
                table = state_import(f.read(), group)
            except StateFormatError as exc:
                raise ServiceError(f'{path}: {exc}', 2) from exc
        if table.kind != kind:
            raise ServiceError(f'{path} holds a {table.kind} table, {kind} table required', 2)
        return table
    if kind == 'sender':
        return SenderStateTable(config)
    return ReceiverStateTable(config, kind)


def save_state(group: Group, path: str | None, table) -> None:
    if not path:
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(state_export(table, group))


def load_ledger(group: Group, path: str | None, *, must_exist: bool = False) -> Ledger:
    if path and os.path.exists(path):
        try:
            return Ledger.load(group, path)
        except LedgerFormatError as exc:
            raise ServiceError(f'{path}: {exc}', 2) from exc
    if must_exist:
        raise ServiceError(f'ledger file not found: {path}', 2)
    return Ledger(group)
