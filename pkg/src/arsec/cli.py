"""Operator entry points: serve, replay, export/import, jobs ls.

Exit codes: 0 ok, 1 bad config (the offending key is printed), 2 port busy,
3 data directory locked by another process.
"""
from __future__ import annotations

import argparse
import logging
import socket
import sys
import threading
import time
from importlib.resources import files
from pathlib import Path

from .config import Config, ConfigError
from .errors import MalformedFilename, StoreLocked
from .model import parse_media_filename
from .service import Service
from .store import Store

logger = logging.getLogger(__name__)

EXIT_BAD_CONFIG = 1
EXIT_PORT_BUSY = 2
EXIT_LOCKED = 3

_MIME = {"jpg": "image/jpeg", "png": "image/png", "wav": "audio/wav"}


def default_corpus_dir() -> str:
    return str(files("arsec") / "corpus")


def _load_config(args) -> Config:
    overrides = {
        "listen": getattr(args, "listen", None),
        "data_dir": getattr(args, "data_dir", None),
        "ui_dir": getattr(args, "ui_dir", None),
    }
    if getattr(args, "mock_backends", False):
        overrides["backends"] = {}
        if not getattr(args, "fixtures_dir", None):
            overrides["fixtures_dir"] = default_corpus_dir()
    if getattr(args, "fixtures_dir", None):
        overrides["fixtures_dir"] = args.fixtures_dir
    return Config.load(getattr(args, "config", None), **overrides)


def _port_free(host: str, port: int) -> bool:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError:
            return False
    return True


def cmd_serve(args) -> int:
    import uvicorn

    from .api import build_app

    config = _load_config(args)
    if not _port_free(config.host, config.port):
        print(f"error: {config.listen} is already in use", file=sys.stderr)
        return EXIT_PORT_BUSY
    try:
        service = Service(config)
    except StoreLocked as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOCKED
    service.start()
    app = build_app(service)
    logger.info("serving on %s (data dir %s)", config.listen, config.data_dir)
    # uvicorn handles SIGINT/SIGTERM for the graceful shutdown, then re-raises
    # the signal after restoring handlers; swallow it so the pool drain below
    # runs and the process exits 0 with every running job completed.
    import signal as signal_mod

    signal_mod.signal(signal_mod.SIGTERM, lambda *a: None)
    signal_mod.signal(signal_mod.SIGINT, lambda *a: None)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    service.stop()
    return 0


def run_replay(corpus_dir: str, config: Config) -> dict:
    """Drive a corpus through the real HTTP surface; returns the report."""
    import httpx
    import uvicorn

    from .api import build_app

    corpus = Path(corpus_dir)
    uploads = []
    skipped = []
    for path in sorted(corpus.iterdir()) if corpus.is_dir() else []:
        if path.suffix.lower() not in (".jpg", ".png", ".wav"):
            continue
        try:
            kind, captured_at = parse_media_filename(path.name)
        except MalformedFilename:
            skipped.append(path.name)
            continue
        uploads.append((captured_at, path.name, path.read_bytes()))
    uploads.sort(key=lambda u: (u[0], u[1]))

    config.fixtures_dir = str(corpus)
    service = Service(config)
    # Corpus timestamps are virtual time; the wall-clock expiry sweep would
    # archive every pending before its audio arrives, so it stays off.
    service.start(sweep=False)
    app = build_app(service)
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    while not server.started:
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    base = f"http://127.0.0.1:{port}"

    dead = 0
    try:
        with httpx.Client(timeout=30) as client:
            for _, name, payload in uploads:
                ext = name.rsplit(".", 1)[-1].lower()
                resp = client.post(f"{base}/v1/media",
                                   files={"file": (name, payload, _MIME[ext])})
                resp.raise_for_status()
            service.queue.wait_idle(timeout=120)
            dead = len(service.queue.list_jobs("dead"))
    finally:
        server.should_exit = True
        thread.join(timeout=10)

    store = service.store
    orphans = len(store.orphan_conversations())
    conversations = orphans + sum(
        len(store.get_person(pid).conversations) for pid in store.list_person_ids())
    report = {
        "uploads": len(uploads),
        "skipped": skipped,
        "contacts": store.person_count(),
        "conversations": conversations,
        "orphans": orphans,
        "dead_jobs": dead,
    }
    service.stop()
    return report


def cmd_replay(args) -> int:
    config = _load_config(args)
    try:
        report = run_replay(args.corpus_dir, config)
    except StoreLocked as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOCKED
    for name in report["skipped"]:
        print(f"skipped malformed corpus file: {name}", file=sys.stderr)
    print(f"uploads: {report['uploads']}")
    print(f"contacts: {report['contacts']}")
    print(f"conversations: {report['conversations']}")
    print(f"orphans: {report['orphans']}")
    print(f"dead_jobs: {report['dead_jobs']}")
    if report["dead_jobs"] or report["skipped"]:
        return 1
    return 0


def cmd_export(args) -> int:
    try:
        store = Store(args.data_dir)
    except StoreLocked as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOCKED
    sys.stdout.write(store.export_canonical())
    store.close()
    return 0


def cmd_import(args) -> int:
    text = sys.stdin.read()
    try:
        store = Store(args.data_dir)
    except StoreLocked as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOCKED
    store.import_canonical(text)
    store.close()
    return 0


def cmd_jobs(args) -> int:
    db = Path(args.data_dir) / "arsec.db"
    if not db.exists():
        print(f"no store at {args.data_dir}", file=sys.stderr)
        return 1
    from .jobs import JobQueue

    store = Store.readonly(args.data_dir)
    queue = JobQueue(store)
    print(f"{'JOB':<38} {'KIND':<20} {'STATUS':<8} {'ATTEMPTS':<8} ENQUEUED")
    for job in queue.list_jobs():
        print(f"{job.job_id:<38} {job.kind:<20} {job.status:<8} {job.attempts:<8}"
              f" {job.enqueued_at.isoformat()}")
    store.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arsec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the device + retrieval APIs and workers")
    serve.add_argument("--config")
    serve.add_argument("--listen")
    serve.add_argument("--data-dir", dest="data_dir")
    serve.add_argument("--fixtures-dir", dest="fixtures_dir")
    serve.add_argument("--ui-dir", dest="ui_dir")
    serve.add_argument("--mock-backends", action="store_true")
    serve.set_defaults(func=cmd_serve)

    replay = sub.add_parser("replay", help="drive a corpus through the pipeline")
    replay.add_argument("corpus_dir")
    replay.add_argument("--config")
    replay.add_argument("--data-dir", dest="data_dir")
    replay.set_defaults(func=cmd_replay, mock_backends=False)

    export = sub.add_parser("export", help="print the canonical record stream")
    export.add_argument("--data-dir", dest="data_dir", default="./data")
    export.set_defaults(func=cmd_export)

    imp = sub.add_parser("import", help="load a canonical stream from stdin")
    imp.add_argument("--data-dir", dest="data_dir", default="./data")
    imp.set_defaults(func=cmd_import)

    jobs = sub.add_parser("jobs", help="job queue inspection")
    jobs_sub = jobs.add_subparsers(dest="jobs_command", required=True)
    jobs_ls = jobs_sub.add_parser("ls")
    jobs_ls.add_argument("--data-dir", dest="data_dir", default="./data")
    jobs_ls.set_defaults(func=cmd_jobs)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
