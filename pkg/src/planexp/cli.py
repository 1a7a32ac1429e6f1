"""Command-line entry point: one subcommand per pipeline stage plus a
refinement REPL and the HTTP service.

Exit codes: 1 usage/config, 2 data or stage errors, 3 backend failures.
Progress goes to stderr; machine-readable results go to stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path

from .experiences import CorpusError, GenConfig
from .kstore import StoreError
from .inference import InferenceError
from .metrics import MetricsError
from .narrative import NarrativeError
from .pipeline import PipelineError, RunDir
from .refine import BackendError, RefineError, make_backend
from .stats import StatsError
from .typicality import TypicalityError

DEFAULT_DATA_DIR = "planexp-data"

_DATA_ERRORS = (
    CorpusError,
    PipelineError,
    StoreError,
    InferenceError,
    NarrativeError,
    TypicalityError,
    MetricsError,
    StatsError,
    RefineError,
    FileNotFoundError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return cfg


def _setting(args, cfg: dict, name: str, default=None):
    value = getattr(args, name.replace(".", "_"), None)
    if value is not None:
        return value
    cur = cfg
    for part in name.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return default
        cur = cur[part]
    return cur


def _run_dir(args, cfg) -> RunDir:
    return RunDir(Path(_setting(args, cfg, "data_dir", DEFAULT_DATA_DIR)))


def _alpha(args, cfg) -> float:
    alpha = float(_setting(args, cfg, "alpha", 0.68))
    if not 0 < alpha < 1:
        raise UsageError(f"--alpha must be inside (0, 1), got {alpha}")
    return alpha


def _backend(args, cfg):
    name = _setting(args, cfg, "backend", "deterministic")
    if name not in ("deterministic", "remote"):
        raise UsageError(f"--backend must be 'deterministic' or 'remote', got {name!r}")
    if name == "deterministic":
        return name, make_backend(name)
    base_url = _setting(args, cfg, "remote.base_url")
    model = _setting(args, cfg, "remote.model")
    if not base_url or not model:
        raise UsageError("remote backend needs --base-url and --model (or config remote.*)")
    token = None
    token_env = _setting(args, cfg, "remote.token_env")
    if token_env:
        token = os.environ.get(token_env)
        if token is None:
            raise UsageError(f"environment variable {token_env} is not set (remote backend token)")
    verbose = bool(getattr(args, "verbose", False))
    return name, make_backend(name, base_url=base_url, model=model, token=token, verbose=verbose)


def build_parser() -> _Parser:
    parser = _Parser(prog="planexp", description=__doc__)
    parser.add_argument("--config", help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    def stage_parser(name: str, help_: str):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--data-dir", dest="data_dir", help=f"run directory (default {DEFAULT_DATA_DIR})")
        return p

    p = stage_parser("generate", "synthesize an experience corpus")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--tray-size", type=int, default=12)
    p.add_argument("--doubt-prob", type=float, default=0.25)
    p.add_argument("--duration-min", type=float, default=1.5)
    p.add_argument("--duration-max", type=float, default=3.5)
    p.add_argument("--human-speed-factor", type=float, default=1.5)

    p = stage_parser("ingest", "load an experience corpus file")
    p.add_argument("--file", required=True)

    p = stage_parser("classify", "extract properties, ground them and classify typicality")
    p.add_argument("--alpha", type=float, default=None)

    stage_parser("infer", "run pairwise comparison and plan classification rules")

    p = stage_parser("narrate", "retrieve pairwise contrastive narratives")
    p.add_argument("--specificity", default=None, help="1, 2, 3 or 'all' (default all)")

    p = stage_parser("explain", "refine narratives into explanations")
    p.add_argument("--backend", choices=("deterministic", "remote"), default=None)
    p.add_argument("--base-url", dest="remote_base_url", default=None)
    p.add_argument("--model", dest="remote_model", default=None)
    p.add_argument("--token-env", dest="remote_token_env", default=None)
    p.add_argument("--max-workers", type=int, default=4)
    p.add_argument("--verbose", action="store_true")

    p = stage_parser("evaluate", "build the metric and statistics report")
    p.add_argument("--mu0", type=float, default=None)
    p.add_argument("--stopwords", default=None, help="path to a custom stop-word list")

    p = stage_parser("repl", "interactive follow-up refinement for one pair")
    p.add_argument("--pair", required=True, help="pair id, e.g. E01--E02")
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--backend", choices=("deterministic", "remote"), default=None)
    p.add_argument("--base-url", dest="remote_base_url", default=None)
    p.add_argument("--model", dest="remote_model", default=None)
    p.add_argument("--token-env", dest="remote_token_env", default=None)
    p.add_argument("--verbose", action="store_true")

    p = stage_parser("serve", "run the HTTP service")
    p.add_argument("--port", type=int, default=8970)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--cors-origin", action="append", default=None)
    p.add_argument("--backend", choices=("deterministic", "remote"), default=None)
    p.add_argument("--base-url", dest="remote_base_url", default=None)
    p.add_argument("--model", dest="remote_model", default=None)
    p.add_argument("--token-env", dest="remote_token_env", default=None)

    return parser


def _remote_overrides(args, cfg: dict) -> dict:
    remote = dict(cfg.get("remote", {}))
    for flag, key in (("remote_base_url", "base_url"), ("remote_model", "model"), ("remote_token_env", "token_env")):
        value = getattr(args, flag, None)
        if value is not None:
            remote[key] = value
    merged = dict(cfg)
    merged["remote"] = remote
    return merged


def cmd_generate(args, cfg) -> int:
    seed = int(_setting(args, cfg, "seed", 42))
    n = int(args.n if args.n is not None else 18)
    if n < 1:
        raise UsageError("--n must be >= 1")
    gen = GenConfig(
        tray_size=args.tray_size,
        doubt_prob=args.doubt_prob,
        duration_min=args.duration_min,
        duration_max=args.duration_max,
        human_speed_factor=args.human_speed_factor,
    )
    run = _run_dir(args, cfg)
    count = run.generate(seed, n, gen)
    _say(f"generated {count} experiences (seed {seed}) into {run.path}")
    _emit({"stage": "ingested", "n_plans": count, "seed": seed})
    return 0


def cmd_ingest(args, cfg) -> int:
    run = _run_dir(args, cfg)
    count = run.ingest_file(args.file)
    _say(f"ingested {count} experiences from {args.file}")
    _emit({"stage": "ingested", "n_plans": count})
    return 0


def cmd_classify(args, cfg) -> int:
    alpha = _alpha(args, cfg)
    run = _run_dir(args, cfg)
    intervals = run.classify(alpha)
    _say(f"classified qualities at alpha={alpha}")
    _emit({"stage": "classified", "alpha": alpha, "intervals": intervals})
    return 0


def cmd_infer(args, cfg) -> int:
    run = _run_dir(args, cfg)
    summary = run.infer()
    _say(f"compared {summary['pairs_compared']} pairs; "
         f"{summary['typical']} typical / {summary['atypical']} atypical plans")
    _emit({"stage": "inferred", **summary})
    return 0


def cmd_narrate(args, cfg) -> int:
    spec = _setting(args, cfg, "specificity", "all")
    if str(spec) == "all":
        levels: tuple[int, ...] = (1, 2, 3)
    elif str(spec) in ("1", "2", "3"):
        levels = (int(spec),)
    else:
        raise UsageError(f"--specificity must be 1, 2, 3 or 'all', got {spec!r}")
    run = _run_dir(args, cfg)
    count = run.narrate(levels)
    _say(f"retrieved {count} narratives at levels {list(levels)}")
    _emit({"stage": "narrated", "narratives": count, "levels": list(levels)})
    return 0


def cmd_explain(args, cfg) -> int:
    name, backend = _backend(args, cfg)
    run = _run_dir(args, cfg)
    count = run.refine_all(backend, name, max_workers=args.max_workers)
    _say(f"refined {count} narratives with the {name} backend")
    _emit({"stage": "refined", "explanations": count, "backend": name})
    return 0


def cmd_evaluate(args, cfg) -> int:
    mu0 = _setting(args, cfg, "mu0")
    if mu0 is None:
        raise UsageError("--mu0 is required (no default null value for the similarity test)")
    run = _run_dir(args, cfg)
    report = run.evaluate(float(mu0), stopwords_path=_setting(args, cfg, "stopwords"))
    _say(f"evaluation report written to {run.path / 'report.txt'}")
    print((run.path / "report.txt").read_text("utf-8"), file=sys.stderr)
    _emit(report)
    return 0


def cmd_repl(args, cfg) -> int:
    level = int(_setting(args, cfg, "specificity", 3) if args.level is None else args.level)
    if level not in (1, 2, 3):
        raise UsageError(f"--level must be 1, 2 or 3, got {level}")
    _, backend = _backend(args, cfg)
    run = _run_dir(args, cfg)
    session = run.session(args.pair, level)  # fails fast if the pair is not explained
    _say(f"refining pair {args.pair} at level {level}; "
         "type a request, :history for the session, :quit to exit")
    print(f"revision {session.revision}: {session.messages[-1].content}")
    while True:
        try:
            sys.stderr.write("> ")
            sys.stderr.flush()
            line = input()
        except EOFError:
            break
        line = line.strip()
        if not line:
            continue
        if line == ":quit":
            break
        if line == ":history":
            session = run.session(args.pair, level)
            for i, msg in enumerate(session.messages):
                print(f"[{i}] {msg.role}: {msg.content}")
            continue
        try:
            explanation = run.follow_up(args.pair, level, line, backend)
        except BackendError as exc:
            _say(f"backend failure (session preserved): {exc}")
            continue
        print(f"revision {explanation.revision}: {explanation.text}")
    return 0


def cmd_serve(args, cfg) -> int:
    import uvicorn

    from .service import create_app

    name = _setting(args, cfg, "backend", "deterministic")
    remote_kwargs = {}
    if name == "remote":
        merged = _remote_overrides(args, cfg)
        base_url = merged["remote"].get("base_url")
        model = merged["remote"].get("model")
        if not base_url or not model:
            raise UsageError("remote backend needs remote.base_url and remote.model")
        token = None
        token_env = merged["remote"].get("token_env")
        if token_env:
            token = os.environ.get(token_env)
            if token is None:
                raise UsageError(f"environment variable {token_env} is not set (remote backend token)")
        remote_kwargs = {"remote_base_url": base_url, "remote_model": model, "remote_token": token}

    host = args.host
    port = args.port
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise PipelineError(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    data_dir = Path(_setting(args, cfg, "data_dir", DEFAULT_DATA_DIR))
    origins = tuple(args.cors_origin) if args.cors_origin else ("*",)
    app = create_app(data_dir, cors_origins=origins, **remote_kwargs)
    _say(f"serving on http://{host}:{port} (data dir {data_dir})")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "classify": cmd_classify,
    "infer": cmd_infer,
    "narrate": cmd_narrate,
    "explain": cmd_explain,
    "evaluate": cmd_evaluate,
    "repl": cmd_repl,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args.config)
        if hasattr(args, "remote_base_url"):
            cfg = _remote_overrides(args, cfg)
        return _COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"planexp: usage error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"planexp: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"planexp: backend error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
