"""privfed command line: run the simulator, inspect splits, Fernet file utilities.

Exit codes: 0 ok, 2 config, 3 data, 4 crypto, 5 training.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from . import fernet
from .config import OUTPUT_DIR_ENV, RunConfig, apply_overrides, default_config_dict, load_config
from .data import load_csv, partition_clients, stratified_holdout
from .dp import MECHANISMS
from .errors import ConfigError, CryptoError, DataError, PrivfedError
from .federation import run_experiment
from .report import render_table, write_outputs

FETCH_INSTRUCTIONS = """\
The Pima Indians Diabetes CSV is not shipped with this package.

Download the public 768-row file (e.g. "diabetes.csv" from the UCI / Kaggle
mirrors) with header

  Pregnancies,Glucose,BloodPressure,SkinThickness,Insulin,BMI,DiabetesPedigreeFunction,Age,Outcome

and point "dataset_path" in the run config at it. Expected class counts:
500 negative, 268 positive.
"""


def _fail(exc: PrivfedError) -> int:
    print(f"privfed: {exc.stage} error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return exc.exit_code


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return apply_overrides(
        cfg, seed=args.seed, epsilon=args.epsilon, rounds=args.rounds,
        no_encryption=args.no_encryption, mechanism=args.mechanism, out=args.out,
    )


def cmd_run(args) -> int:
    if args.fetch_instructions:
        print(FETCH_INSTRUCTIONS, end="")
        return 0
    if args.print_default_config:
        print(json.dumps(default_config_dict(), indent=2))
        return 0
    cfg = _run_config(args)
    if not cfg.dataset_path:
        raise ConfigError("dataset_path is not set (see --fetch-instructions)")
    report = run_experiment(cfg.federation, cfg.dataset_path, serial=args.serial)
    write_outputs(report, cfg.output_dir)
    print(render_table(report), end="")
    return 0


def cmd_split(args) -> int:
    cfg = _run_config(args)
    if not cfg.dataset_path:
        raise ConfigError("dataset_path is not set")
    fed = cfg.federation
    ds = load_csv(cfg.dataset_path)
    train, test = stratified_holdout(ds, fed.test_fraction, fed.master_seed)
    parts = partition_clients(train, fed.k_clients, fed.master_seed)
    manifest = {
        "master_seed": fed.master_seed,
        "test": {"row_ids": test.row_ids.tolist(), "class_counts": test.class_counts()},
        "clients": [
            {"client_id": p.client_id, "row_ids": p.data.row_ids.tolist(), "class_counts": p.data.class_counts()}
            for p in parts
        ],
    }
    text = json.dumps(manifest, sort_keys=True) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "split.json"), "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _read_key(path) -> fernet.SecretKey:
    try:
        with open(path, encoding="ascii") as fh:
            return fernet.SecretKey.decode(fh.read().strip())
    except (OSError, ValueError) as exc:
        raise CryptoError(f"cannot load key from {path}: {exc}") from None


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _write_bytes(path, data: bytes):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None


def cmd_keygen(args) -> int:
    rng = None
    if args.seed is not None:
        from .rng import derive_stream

        rng = derive_stream(args.seed, "keygen", 0)
    print(fernet.generate_key(rng).encode())
    return 0


def cmd_encrypt(args) -> int:
    key = _read_key(args.key)
    token = fernet.encrypt(key, _read_bytes(args.input), int(time.time()), os.urandom(16))
    _write_bytes(args.output, token.encode("ascii"))
    return 0


def cmd_decrypt(args) -> int:
    key = _read_key(args.key)
    token = _read_bytes(args.input).strip()
    _write_bytes(args.output, fernet.decrypt(key, token, ttl=args.ttl, now=int(time.time())))
    return 0


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--rounds", type=int)
    p.add_argument("--mechanism", choices=MECHANISMS)
    p.add_argument("--no-encryption", action="store_true")
    p.add_argument("--out", help=f"output directory (overrides ${OUTPUT_DIR_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privfed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the federated experiment")
    _add_run_flags(p)
    p.add_argument("--serial", action="store_true", help="train clients sequentially")
    p.add_argument("--fetch-instructions", action="store_true", help="how to obtain the dataset")
    p.add_argument("--print-default-config", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("split", help="emit the holdout/partition manifest")
    _add_run_flags(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("keygen", help="print a new Fernet key")
    p.add_argument("--seed", type=int, help="deterministic key (testing only)")
    p.set_defaults(func=cmd_keygen)

    for name, func in (("encrypt", cmd_encrypt), ("decrypt", cmd_decrypt)):
        p = sub.add_parser(name, help=f"{name} a file with a Fernet key")
        p.add_argument("--key", required=True, help="file holding the base64url key")
        p.add_argument("input")
        p.add_argument("output")
        if name == "decrypt":
            p.add_argument("--ttl", type=int, default=None, help="maximum token age in seconds")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PrivfedError as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
