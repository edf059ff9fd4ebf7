"""Command line entry points: `council serve` and `council replay`."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .replay import FixtureError, run_replay
from .service import ConfigError, create_app, parse_config
from .store import export_metrics, serialize


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        config = parse_config(args.config)
        app = create_app(config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    import uvicorn

    uvicorn.run(app, host=args.host, port=config.port, log_level="info")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        session = run_replay(args.fixture)
    except FixtureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    metrics = export_metrics(session)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.session_out:
        session_out = Path(args.session_out)
        session_out.parent.mkdir(parents=True, exist_ok=True)
        session_out.write_bytes(serialize(session))
    print(
        f"replayed {metrics['user_message_count']} user messages, "
        f"{metrics['agent_count']} agents, {metrics['pinned_total']} pins "
        f"-> {out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="council",
        description="Multi-persona conversational decision support service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", required=True, help="path to a key = value config file")
    serve.add_argument("--host", default="127.0.0.1")
    serve.set_defaults(func=cmd_serve)

    replay = sub.add_parser("replay", help="run a scripted session headlessly")
    replay.add_argument("--fixture", required=True, help="path to a replay fixture JSON")
    replay.add_argument("--out", required=True, help="where to write the metrics JSON")
    replay.add_argument(
        "--session-out",
        default=None,
        help="optionally write the serialized session document here",
    )
    replay.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
