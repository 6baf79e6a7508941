"""Command line entry point (``pqpt``).

Exit codes: 0 success, 1 usage or input error, 2 validation targets unmet,
3 ledger corrupt.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import analytics, ledger as ledger_mod
from .core import Methodology, Prng
from .errors import LedgerCorrupt, PqptError
from .orchestrator import (
    PAPER_SEED,
    PipelineConfig,
    paper_config,
    replay_paper_scenario,
    run_pipeline,
    write_artifacts,
)
from .pqcrypto.attack import simulate_quantum_attack
from .pqcrypto.payload import decrypt_payload, encrypt_payload
from .pqcrypto.rlwe import PARAM_SETS, encrypt, get_params, keygen, keypair_to_dict, keys_from_dict
from .redteam import load_scenarios, run_simulation
from .scanners import ingest_report, merge, paper_profile, simulate_scan

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TARGETS_UNMET = 2
EXIT_LEDGER_CORRUPT = 3
SEED_ENV = "PQPT_SEED"

log = logging.getLogger("pqpt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed_arg(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _env_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return _seed_arg(raw)
    except (ValueError, argparse.ArgumentTypeError):
        raise UsageError(f"{SEED_ENV}={raw!r} is not a valid seed") from None


def _resolve_seed(cli_seed, default: int) -> int:
    """``--seed`` beats ``PQPT_SEED``, which beats the configured seed."""
    if cli_seed is not None:
        return cli_seed
    env = _env_seed()
    return env if env is not None else default


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(data)


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_scan(args) -> int:
    if args.ingest:
        findings = ingest_report(_read(args.ingest))
    else:
        seed = _resolve_seed(args.seed, PAPER_SEED)
        root = Prng(seed, b"scan")
        methods = args.methodology or ["DAST", "SAST", "IAST"]
        sets = [simulate_scan(paper_profile(Methodology(m)), root.derive(f"{i}/{m}")) for i, m in enumerate(methods)]
        findings = merge(sets)
    _write(args.out, findings.to_json() + b"\n")
    sys.stderr.write(analytics.severity_csv(analytics.severity_summary([findings])).decode("utf-8"))
    return EXIT_OK


def cmd_ledger_verify(args) -> int:
    chain = ledger_mod.import_audit(_read(args.file))
    outcome = ledger_mod.verify_chain(chain)
    counts = ledger_mod.summarize_events(chain)
    print(f"entries={len(chain)} " + " ".join(f"{k.name}={v}" for k, v in counts.items()))
    print(outcome)
    return EXIT_OK if outcome is ledger_mod.VALID else EXIT_LEDGER_CORRUPT


def cmd_ledger_export(args) -> int:
    if args.file:
        chain = ledger_mod.import_audit(_read(args.file))
        outcome = ledger_mod.verify_chain(chain)
        if outcome is not ledger_mod.VALID:
            print(outcome, file=sys.stderr)
            return EXIT_LEDGER_CORRUPT
    else:
        chain = ledger_mod.paper_logging_scenario()
    _write(args.out, ledger_mod.export_audit(chain))
    return EXIT_OK


def cmd_crypto_keygen(args) -> int:
    params = get_params(args.params)
    seed = _resolve_seed(args.seed, PAPER_SEED)
    keypair = keygen(params, Prng(seed, b"cli/keygen"))
    _write(args.out, _json_bytes(keypair_to_dict(keypair)))
    return EXIT_OK


def _load_keys(path: str, params_name: str):
    try:
        public, secret = keys_from_dict(json.loads(_read(path)))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path} is not a key file: {exc}") from None
    params = get_params(params_name)
    if public.params != params:
        raise UsageError(f"key file holds {public.params} keys, not {params}")
    return params, public, secret


def cmd_crypto_encrypt(args) -> int:
    params, public, _ = _load_keys(args.key, args.params)
    seed = _resolve_seed(args.seed, PAPER_SEED)
    blob = encrypt_payload(public, params, _read(args.input), Prng(seed, b"cli/encrypt"))
    _write(args.out, blob)
    return EXIT_OK


def cmd_crypto_decrypt(args) -> int:
    params, _, secret = _load_keys(args.key, args.params)
    if secret is None:
        raise UsageError("decryption needs a key file with the secret part")
    _write(args.out, decrypt_payload(secret, params, _read(args.input)))
    return EXIT_OK


def cmd_attack(args) -> int:
    params = get_params(args.params)
    seed = _resolve_seed(args.seed, PAPER_SEED)
    root = Prng(seed, b"cli/attack")
    keypair = keygen(params, root.derive("keygen"))
    known = root.derive("plaintext").bits(params.n)
    ct = encrypt(keypair.public, params, known, root.derive("encrypt"))
    report = simulate_quantum_attack(params, keypair.public, ct, known, args.budget)
    doc = report.to_dict()
    if report.secret is not None:
        doc["matches_true_secret"] = report.secret == keypair.secret.s
    _write(args.out, _json_bytes(doc))
    return EXIT_OK


def cmd_simulate(args) -> int:
    configs = load_scenarios(_read(args.scenarios))
    seed = _resolve_seed(args.seed, PAPER_SEED)
    report = run_simulation(configs, Prng(seed, b"cli/simulate"), workers=args.workers)
    _write(args.out, report.to_json() + b"\n")
    return EXIT_OK


def _load_config(path, seed) -> PipelineConfig:
    config = PipelineConfig.from_json(_read(path)) if path else paper_config()
    return config.with_seed(_resolve_seed(seed, config.master_seed))


def cmd_report(args) -> int:
    config = _load_config(args.config, args.seed)
    report = run_pipeline(config)
    _write(args.out, report.report_csv() if args.format == "csv" else report.report_json())
    return EXIT_OK


def _summary_lines(report) -> list[str]:
    counts = ledger_mod.summarize_events(report.ledger)
    lines = [
        f"cycles={report.final_state.cycle} findings={len(report.findings)} ledger_entries={len(report.ledger)} "
        f"verification={report.verification}",
        "events: " + " ".join(f"{k.name}={v}" for k, v in counts.items()),
    ]
    for s in report.severity_summaries:
        lines.append(f"severity {s.methodology}: total={s.total} critical={s.critical} high={s.high} "
                     f"medium={s.medium} low={s.low}")
    for c, r in report.resolution_rates.items():
        lines.append(f"resolution {c.value}: {r:.4f}")
    if report.sla["by_methodology"]:
        lines.append("sla(14d) " + " ".join(f"{m}={v:.4f}" for m, v in report.sla["by_methodology"].items()))
    if not report.targets_met:
        lines.append("targets unmet: " + ", ".join(c.value for c in report.unmet_categories))
    return lines


def cmd_run(args) -> int:
    config = _load_config(args.config, args.seed)
    if args.max_cycles is not None:
        config = PipelineConfig.from_dict({**config.to_dict(), "max_cycles": args.max_cycles})
    start = ledger_mod.import_audit(_read(args.ledger)) if args.ledger else None
    report = run_pipeline(config, ledger=start)
    if args.out:
        write_artifacts(report, args.out)
    print("\n".join(_summary_lines(report)))
    return EXIT_OK if report.targets_met else EXIT_TARGETS_UNMET


def cmd_replay(args) -> int:
    report = replay_paper_scenario(_resolve_seed(args.seed, PAPER_SEED))
    if args.out:
        write_artifacts(report, args.out)
    lines = _summary_lines(report)
    trail = ledger_mod.summarize_events(report.logging_scenario)
    lines.append(f"logging scenario: entries={len(report.logging_scenario)} "
                 + " ".join(f"{k.name}={v}" for k, v in trail.items()))
    for r in report.simulation:
        lines.append(f"redteam {r.attack_type.value}: {r.successes}/{r.trials} = {float(r.observed_rate):.4f}"
                     + (" (theoretical)" if r.theoretical_flag else ""))
    print("\n".join(lines))
    sys.stdout.write(report.report_csv().decode("utf-8"))
    return EXIT_OK if report.targets_met else EXIT_TARGETS_UNMET


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pqpt", description="Quantum-AI security pipeline toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    params = sorted(PARAM_SETS)

    s = sub.add_parser("scan", help="simulate scanner findings or ingest a findings report")
    s.add_argument("--ingest", metavar="FILE", help="JSON array of findings to ingest instead of simulating")
    s.add_argument("--methodology", action="append", choices=["DAST", "SAST", "IAST"])
    s.add_argument("--seed", type=_seed_arg)
    s.add_argument("--out", "-o")
    s.set_defaults(func=cmd_scan)

    lg = sub.add_parser("ledger", help="verify or export audit ledgers")
    lsub = lg.add_subparsers(dest="ledger_command", required=True, parser_class=_Parser)
    v = lsub.add_parser("verify", help="check a JSON-lines ledger export")
    v.add_argument("file")
    v.set_defaults(func=cmd_ledger_verify)
    e = lsub.add_parser("export", help="export a ledger (default: the six-month logging scenario)")
    e.add_argument("file", nargs="?", help="existing ledger to re-export after verification")
    e.add_argument("--out", "-o")
    e.set_defaults(func=cmd_ledger_export)

    c = sub.add_parser("crypto", help="RLWE key generation and payload encryption")
    csub = c.add_subparsers(dest="crypto_command", required=True, parser_class=_Parser)
    k = csub.add_parser("keygen")
    k.add_argument("--params", required=True, choices=params)
    k.add_argument("--seed", type=_seed_arg)
    k.add_argument("--out", "-o")
    k.set_defaults(func=cmd_crypto_keygen)
    for name, func in (("encrypt", cmd_crypto_encrypt), ("decrypt", cmd_crypto_decrypt)):
        x = csub.add_parser(name)
        x.add_argument("--params", required=True, choices=params)
        x.add_argument("--key", required=True, help="key file from 'crypto keygen'")
        x.add_argument("--in", dest="input", default="-")
        x.add_argument("--out", "-o")
        if name == "encrypt":
            x.add_argument("--seed", type=_seed_arg)
        x.set_defaults(func=func)

    a = sub.add_parser("attack", help="exhaustive key recovery against a fresh key pair")
    a.add_argument("--params", required=True, choices=params)
    a.add_argument("--budget", required=True, type=lambda t: int(float(t)))
    a.add_argument("--seed", type=_seed_arg)
    a.add_argument("--out", "-o")
    a.set_defaults(func=cmd_attack)

    m = sub.add_parser("simulate", help="run red-team scenarios")
    m.add_argument("--scenarios", required=True)
    m.add_argument("--seed", type=_seed_arg)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", "-o")
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="run a pipeline and print its report")
    r.add_argument("--format", required=True, choices=["csv", "json"])
    r.add_argument("--config")
    r.add_argument("--seed", type=_seed_arg)
    r.add_argument("--out", "-o")
    r.set_defaults(func=cmd_report)

    u = sub.add_parser("run", help="execute the pipeline from a config file")
    u.add_argument("--config", required=True)
    u.add_argument("--seed", type=_seed_arg)
    u.add_argument("--max-cycles", type=int)
    u.add_argument("--ledger", help="continue an existing ledger export")
    u.add_argument("--out", "-o", help="directory for exported artifacts")
    u.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay-paper", help="run the canned configuration and emit golden reports")
    rp.add_argument("--seed", type=_seed_arg)
    rp.add_argument("--out", "-o", help="directory for exported artifacts")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LedgerCorrupt as exc:
        print(f"pqpt: {exc}", file=sys.stderr)
        return EXIT_LEDGER_CORRUPT
    except (UsageError, PqptError) as exc:
        print(f"pqpt: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
