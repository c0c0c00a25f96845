"""Multi-party simulation: generate traffic, scan it with every receiver and auditor."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from stealthkit.dksap import DksapAuditor, DksapReceiver
from stealthkit.dksap_iot import EpochConfig, IotAuditor, IotReceiver
from stealthkit.events import get_logger, log_event
from stealthkit.group import Group, OpCounters
from stealthkit.ledger import Party, Traffic, TrafficSpec, generate_traffic, scan_range


logger = get_logger("simulate")


def _actors(group: Group, spec: TrafficSpec, party: Party):
    if spec.scheme == "dksap":
        return DksapReceiver(group, party.keys), DksapAuditor(group, party.keys.auditor())
    config = EpochConfig(spec.epoch_n, spec.lookahead)
    return (
        IotReceiver(group, party.keys, config),
        IotAuditor(group, party.keys.auditor(), config),
    )


def _scan_party(group: Group, spec: TrafficSpec, traffic: Traffic, party: Party) -> dict:
    # Each party gets its own actors, sessions and state tables.
    receiver, auditor = _actors(group, spec, party)
    if len(traffic.ledger) == 0:
        return {"label": party.label, "found": set(), "sighted": set(),
                "receiver_counts": OpCounters(), "auditor_counts": OpCounters()}
    report = scan_range(receiver, traffic.ledger)
    audit = scan_range(auditor, traffic.ledger)
    return {
        "label": party.label,
        "found": report.positions(),
        "sighted": audit.positions(),
        "receiver_counts": report.counters,
        "auditor_counts": audit.counters,
    }


def run_simulation(group: Group, spec: TrafficSpec, *, workers: int = 4) -> dict:
    """Scan generated traffic once per receiver and report completeness and isolation."""
    traffic = generate_traffic(group, spec)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda party: _scan_party(group, spec, traffic, party), traffic.receivers))

    parties = []
    for result in results:
        owned = traffic.owned_by(result["label"])
        found = result["found"]
        parties.append(
            {
                "label": result["label"],
                "owned": len(owned),
                "found": len(found),
                "missed": len(owned - found),
                "cross_matches": len(found - owned),
                "regular_matches": len(found & traffic.regular),
                "auditor_parity": result["sighted"] == found,
                "receiver_counts": result["receiver_counts"].as_dict(),
                "auditor_counts": result["auditor_counts"].as_dict(),
            }
        )

    summary = {
        "scheme": spec.scheme,
        "seed": spec.seed,
        "blocks": len(traffic.ledger),
        "txs": traffic.ledger.tx_count(),
        "regular_txs": len(traffic.regular),
        "complete": all(p["missed"] == 0 for p in parties),
        "isolated": all(p["cross_matches"] == 0 and p["regular_matches"] == 0 for p in parties),
        "auditor_parity": all(p["auditor_parity"] for p in parties),
        "parties": parties,
    }
    log_event(
        logger,
        "info",
        "simulate.completed",
        scheme=spec.scheme,
        txs=summary["txs"],
        complete=summary["complete"],
        isolated=summary["isolated"],
        auditor_parity=summary["auditor_parity"],
    )
    return summary
