"""Command-line orchestration: hierarchy generation, anonymization, evaluation.

Exit codes: 0 success, 1 privacy requirements unsatisfiable (reports are still
written), 2 configuration or input errors, 3 embedding-provider errors. All
randomness flows from --seed, so identical invocations rewrite identical
artifacts (report timestamps aside).
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import efficacy, metrics
from .anonymize import PrivacyParams, generate_vghs, search
from .embed import (
    DEFAULT_API_KEY_ENV,
    HTTP_API,
    WORD_VECTOR_FILE,
    ProviderConfig,
    create_provider,
)
from .errors import InputError, ProviderError
from .tabular import SUPPRESSED, QiSpec, Table, group_by_qi, load_csv, write_csv
from .vgh import KMEANS, WARD, read_hierarchy, write_hierarchy

EXIT_OK = 0
EXIT_UNSATISFIED = 1
EXIT_CONFIG = 2
EXIT_PROVIDER = 3

K_SWEEP_PRESET = [2, 5, 10, 15, 20, 25, 30, 50, 100, 150, 200]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clustem",
        description="Generalization-and-suppression anonymization of tabular data "
        "using hierarchies clustered from value embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    vgh_parser = sub.add_parser("vgh", help="hierarchy operations")
    vgh_sub = vgh_parser.add_subparsers(dest="vgh_command", required=True)
    build = vgh_sub.add_parser("build", help="build one hierarchy file per column")
    build.add_argument("--input", required=True, help="input CSV with a header row")
    build.add_argument("--columns", required=True, help="comma-separated nominal columns")
    build.add_argument("--method", choices=[KMEANS, WARD], default=WARD)
    build.add_argument("--seed", type=int, default=0)
    build.add_argument("--out-dir", required=True, help="directory for <column>.csv files")
    _add_provider_flags(build)
    build.set_defaults(func=_cmd_vgh_build)

    anon = sub.add_parser("anonymize", help="anonymize a CSV end to end")
    anon.add_argument("--input", required=True)
    anon.add_argument("--out", required=True, help="output directory")
    anon.add_argument("--config", help="JSON run config; flags override its values")
    anon.add_argument("--qi", help="comma-separated quasi-identifier columns")
    anon.add_argument("--sa", help="sensitive attribute column")
    anon.add_argument("--k", help="k value, comma-separated sweep, or 'preset'")
    anon.add_argument("--l", type=int, help="required distinct sensitive values per group")
    anon.add_argument("--sup-limit", type=float, help="max fraction of suppressed records")
    anon.add_argument("--method", choices=[KMEANS, WARD])
    anon.add_argument("--seed", type=int)
    anon.add_argument(
        "--hierarchies-dir",
        help="directory with <column>.csv hierarchy files; found files override generation",
    )
    _add_provider_flags(anon)
    anon.set_defaults(func=_cmd_anonymize)

    ev = sub.add_parser("evaluate", help="measure privacy, utility, and ML efficacy")
    ev.add_argument("--train", required=True, help="(anonymized) training CSV")
    ev.add_argument("--test", required=True, help="original test CSV")
    ev.add_argument("--qi", required=True)
    ev.add_argument("--sa", required=True)
    ev.add_argument("--out", required=True, help="report JSON path")
    ev.add_argument("--k", type=int, default=1, help="requested k, for c_avg")
    ev.add_argument("--l", type=int, default=1)
    ev.add_argument("--sup-limit", type=float, default=0.0)
    ev.add_argument("--positive-class", default=">50K")
    ev.add_argument("--numeric-features", help="comma-separated numeric feature columns")
    ev.add_argument(
        "--qi-only", action="store_true", help="use only the QI columns as features"
    )
    ev.add_argument("--seed", type=int, default=0)
    ev.set_defaults(func=_cmd_evaluate)
    return parser


def _add_provider_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--vectors", help="word-vector text file")
    parser.add_argument("--api-endpoint", help="embeddings API URL")
    parser.add_argument("--api-model", help="embeddings API model name")
    parser.add_argument(
        "--api-key-env",
        default=DEFAULT_API_KEY_ENV,
        help=f"env var holding the bearer token (default {DEFAULT_API_KEY_ENV})",
    )
    parser.add_argument("--cache", help="JSON embedding cache path")


def _parse_names(raw: str) -> list[str]:
    names = [part.strip() for part in raw.split(",")]
    if any(not name for name in names):
        raise InputError(f"malformed column list {raw!r}")
    return names


def _provider_from_args(args) -> tuple[object, str]:
    if args.vectors and args.api_endpoint:
        raise InputError("configure either --vectors or an API endpoint, not both")
    if args.vectors:
        config = ProviderConfig(WORD_VECTOR_FILE, path=args.vectors, cache_path=args.cache)
    elif args.api_endpoint or args.api_model:
        config = ProviderConfig(
            HTTP_API,
            endpoint=args.api_endpoint,
            model=args.api_model,
            api_key_env=args.api_key_env,
            cache_path=args.cache,
        )
    else:
        raise InputError(
            "an embedding source is required: --vectors or --api-endpoint/--api-model"
        )
    provider = create_provider(config)
    return provider, provider.provider_id


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _cmd_vgh_build(args) -> int:
    table = load_csv(args.input)
    columns = _parse_names(args.columns)
    provider, _ = _provider_from_args(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vghs = generate_vghs(table, columns, provider, args.method, args.seed, args.cache)
    for attr, hierarchy in vghs.items():
        write_hierarchy(hierarchy, str(out_dir / f"{attr}.csv"))
    return EXIT_OK


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError(f"config {path} must hold a JSON object")
    return raw


def _parse_k_list(raw) -> list[int]:
    if isinstance(raw, int):
        return [raw]
    if raw == "preset":
        return list(K_SWEEP_PRESET)
    try:
        return [int(part) for part in str(raw).split(",")]
    except ValueError:
        raise InputError(f"malformed k value {raw!r}") from None


def _cmd_anonymize(args) -> int:
    config = _load_config(args.config)

    qi = _parse_names(args.qi) if args.qi else config.get("qi")
    if not qi:
        raise InputError("the quasi-identifier is required (--qi or config 'qi')")
    sa = args.sa if args.sa is not None else config.get("sa")
    k_raw = args.k if args.k is not None else config.get("k")
    if k_raw is None:
        raise InputError("k is required (--k or config 'k')")
    ks = _parse_k_list(k_raw)
    l_value = args.l if args.l is not None else config.get("l", 1)
    sup_limit = args.sup_limit if args.sup_limit is not None else config.get("sup_limit", 0.0)
    method = args.method or config.get("method", WARD)
    if method not in (KMEANS, WARD):
        raise InputError(f"unknown clustering method {method!r}")
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    for k in ks:
        PrivacyParams(k=k, l=l_value, sup_limit=sup_limit)  # fail fast on bad parameters

    table = load_csv(args.input)
    spec = QiSpec(list(qi), sa)
    spec.validate_against(table)

    vghs = {}
    file_overrides = dict(config.get("hierarchies", {}))
    if args.hierarchies_dir:
        for attr in spec.qi:
            candidate = Path(args.hierarchies_dir) / f"{attr}.csv"
            if candidate.exists():
                file_overrides.setdefault(attr, str(candidate))
    for attr, path in file_overrides.items():
        if attr in spec.qi:
            vghs[attr] = read_hierarchy(path, attribute=attr)

    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    provider_id = "hierarchy-files"
    kmeans_repairs = 0
    to_generate = [attr for attr in spec.qi if attr not in vghs]
    if to_generate:
        provider, provider_id = _provider_from_args(args)
        generated = generate_vghs(table, to_generate, provider, method, seed, args.cache)
        hierarchy_dir = out_root / "hierarchies"
        hierarchy_dir.mkdir(parents=True, exist_ok=True)
        for attr, hierarchy in generated.items():
            write_hierarchy(hierarchy, str(hierarchy_dir / f"{attr}.csv"))
            kmeans_repairs += hierarchy.kmeans_repairs
        vghs.update(generated)

    sa_values = table.column(sa).values if sa else None
    all_satisfied = True
    for k in ks:
        started = _now()
        params = PrivacyParams(k=k, l=l_value, sup_limit=sup_limit)
        result = search(table, spec, vghs, params)
        all_satisfied &= result.satisfied
        out_dir = out_root if len(ks) == 1 else out_root / f"k{k}"
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(result.table, str(out_dir / "anonymized.csv"))
        groups = group_by_qi(result.table, spec, result.suppressed)
        report = metrics.compute_report(table, groups, sa_values, params, result.node)
        payload = report.to_dict()
        payload.update(
            {
                "loss": result.loss,
                "satisfied": result.satisfied,
                "suppressed_count": int(result.suppressed.sum()),
                "meta": {
                    "seed": seed,
                    "method": method,
                    "provider": provider_id,
                    "kmeans_repairs": kmeans_repairs,
                    "started_at": started,
                    "finished_at": _now(),
                },
            }
        )
        _write_json(out_dir / "report.json", payload)
    return EXIT_OK if all_satisfied else EXIT_UNSATISFIED


def _suppressed_rows(table: Table, qi: list[str]) -> list[bool]:
    columns = [table.column(attr).values for attr in qi]
    return [all(col[i] == SUPPRESSED for col in columns) for i in range(table.row_count)]


def _cmd_evaluate(args) -> int:
    started = _now()
    train = load_csv(args.train)
    test = load_csv(args.test)
    spec = QiSpec(_parse_names(args.qi), args.sa)
    spec.validate_against(train)
    spec.validate_against(test)
    params = PrivacyParams(k=args.k, l=args.l, sup_limit=args.sup_limit)

    mask = _suppressed_rows(train, spec.qi)
    groups = group_by_qi(train, spec, mask)
    report = metrics.compute_report(train, groups, train.column(args.sa).values, params)

    if args.qi_only:
        numeric = []
    elif args.numeric_features is not None:
        numeric = _parse_names(args.numeric_features)
        for name in numeric:
            train.column(name)
            test.column(name)
    else:
        numeric = [n for n in efficacy.DEFAULT_NUMERIC_FEATURES if train.has_column(n)]
    leaves = efficacy.infer_leaves([train, test], spec.qi)
    train_fm, test_fm = efficacy.encode(
        train, test, spec.qi, numeric, leaves, args.sa, args.positive_class
    )
    model = efficacy.train_classifier(train_fm, args.seed)
    efficacy_report = efficacy.evaluate(model, test_fm, args.positive_class)

    payload = report.to_dict()
    payload["efficacy"] = efficacy_report.to_dict()
    payload["meta"] = {
        "seed": args.seed,
        "features": train_fm.feature_names[-len(numeric):] if numeric else [],
        "started_at": started,
        "finished_at": _now(),
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, payload)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ProviderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
