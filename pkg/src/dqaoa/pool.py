"""Worker processes/threads and per-cycle task dispatch."""

from __future__ import annotations

import logging
import multiprocessing as mp
import selectors
import socket
import threading
from collections import deque
from typing import Callable, Sequence

from dqaoa.protocol import (
    MessageChannel,
    ProtocolError,
    ResultEnvelope,
    TaskEnvelope,
    decode_body,
)
from dqaoa.qaoa import solve_subqubo

log = logging.getLogger(__name__)

TRANSPORTS = ("auto", "inproc", "socket")
CONNECT_TIMEOUT = 120.0


class WorkerFailure(RuntimeError):
    """A task failed on two attempts."""


class PoolExhausted(WorkerFailure):
    """No live workers remain."""


def worker_loop(channel: MessageChannel, worker_id: int = 0, solver: Callable = solve_subqubo) -> int:
    """Serve task frames until shutdown or transport loss; returns the number of tasks solved."""
    solved = 0
    while True:
        try:
            body = channel.recv_body()
        except ProtocolError as exc:
            # an oversized length prefix leaves the stream unsynchronised
            _send_error(channel, worker_id, exc)
            return solved
        if body is None:
            return solved
        try:
            kind, payload = decode_body(body)
            if kind == "shutdown":
                return solved
            if kind != "task":
                tid = payload.get("task_id")
                raise ProtocolError(f"worker cannot handle {kind!r} frames", tid if isinstance(tid, int) else None)
            task = TaskEnvelope.from_payload(payload)
        except ProtocolError as exc:
            if not _send_error(channel, worker_id, exc):
                return solved
            continue
        try:
            result = solver(task.sub, task.qaoa, task.seed)
        except Exception as exc:
            log.exception("worker %d: task %d failed", worker_id, task.task_id)
            if not _send_error(channel, worker_id, ProtocolError(f"solver failed: {exc!r}", task.task_id)):
                return solved
            continue
        try:
            channel.send("result", ResultEnvelope(task.task_id, task.cycle, result, worker_id).to_payload())
        except OSError:
            return solved
        solved += 1


def _send_error(channel: MessageChannel, worker_id: int, exc: ProtocolError) -> bool:
    try:
        channel.send("error", {"task_id": exc.task_id, "message": str(exc), "worker_id": worker_id})
        return True
    except OSError:
        return False


def _thread_worker(sock: socket.socket, worker_id: int, solver: Callable) -> None:
    channel = MessageChannel(sock)
    try:
        worker_loop(channel, worker_id, solver)
    finally:
        channel.close()


def socket_worker_main(host: str, port: int, worker_id: int) -> None:
    """Entry point of a worker process: connect back to the coordinator and serve."""
    sock = socket.create_connection((host, port))
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    channel = MessageChannel(sock)
    try:
        worker_loop(channel, worker_id)
    finally:
        channel.close()


class WorkerPool:
    """A fixed set of workers reachable through :class:`MessageChannel` streams.

    ``inproc`` runs workers as threads over socket pairs; ``socket`` starts
    worker processes that connect to a loopback TCP listener. ``auto`` picks
    ``inproc`` for a single worker and ``socket`` otherwise.
    """

    def __init__(self, workers: int = 1, transport: str = "auto", solver: Callable | None = None):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        if transport not in TRANSPORTS:
            raise ValueError(f"transport must be one of {TRANSPORTS}")
        if transport == "auto":
            transport = "inproc" if workers == 1 else "socket"
        if solver is not None and transport != "inproc":
            raise ValueError("custom solvers are only supported with the inproc transport")
        self.workers = workers
        self.transport = transport
        self.solver = solver or solve_subqubo
        self.channels: list[MessageChannel] = []
        self.alive: list[bool] = []
        self._threads: list[threading.Thread] = []
        self._procs: list = []
        self._started = False

    def __enter__(self) -> WorkerPool:
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def start(self) -> None:
        if self._started:
            return
        if self.transport == "inproc":
            for w in range(self.workers):
                mine, theirs = socket.socketpair()
                t = threading.Thread(target=_thread_worker, args=(theirs, w, self.solver), daemon=True)
                t.start()
                self._threads.append(t)
                self.channels.append(MessageChannel(mine))
        else:
            self._start_processes()
        self.alive = [True] * self.workers
        self._started = True

    def _start_processes(self) -> None:
        ctx = mp.get_context("spawn")
        with socket.create_server(("127.0.0.1", 0)) as listener:
            listener.settimeout(CONNECT_TIMEOUT)
            host, port = listener.getsockname()[:2]
            for w in range(self.workers):
                p = ctx.Process(target=socket_worker_main, args=(host, port, w), daemon=True)
                p.start()
                self._procs.append(p)
            for _ in range(self.workers):
                conn, _ = listener.accept()
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                conn.settimeout(None)
                self.channels.append(MessageChannel(conn))

    def mark_dead(self, w: int) -> None:
        if self.alive[w]:
            self.alive[w] = False
            self.channels[w].close()

    def live_workers(self) -> list[int]:
        return [w for w, ok in enumerate(self.alive) if ok]

    def close(self) -> None:
        for w in self.live_workers():
            try:
                self.channels[w].send("shutdown")
            except OSError:
                pass
        for t in self._threads:
            t.join(timeout=5)
        for p in self._procs:
            p.join(timeout=10)
            if p.is_alive():
                p.terminate()
        for ch in self.channels:
            ch.close()
        self.alive = [False] * len(self.alive)


def dispatch_cycle(tasks: Sequence[TaskEnvelope], pool: WorkerPool) -> list[ResultEnvelope]:
    """Hand tasks to whichever worker is free and collect one result per task.

    Each task may be retried once after an error frame or a lost worker.
    Results come back sorted by ``task_id``.
    """
    if not tasks:
        return []
    ids = [t.task_id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ValueError("task ids must be unique within a cycle")
    pool.start()
    pending = deque((t, 0) for t in tasks)
    idle = deque(pool.live_workers())
    inflight: dict[int, tuple[TaskEnvelope, int]] = {}
    results: dict[int, ResultEnvelope] = {}
    sel = selectors.DefaultSelector()
    for w in idle:
        sel.register(pool.channels[w].sock, selectors.EVENT_READ, w)

    def retry(task: TaskEnvelope, attempts: int, reason: str) -> None:
        log.warning("task %d (cycle %d) failed: %s", task.task_id, task.cycle, reason)
        if attempts >= 1:
            raise WorkerFailure(f"task {task.task_id} of cycle {task.cycle} failed twice: {reason}")
        pending.append((task, attempts + 1))

    def lose(w: int, reason: str) -> None:
        sel.unregister(pool.channels[w].sock)
        pool.mark_dead(w)
        if w in idle:
            idle.remove(w)
        if w in inflight:
            retry(*inflight.pop(w), reason)

    try:
        while pending or inflight:
            while pending and idle:
                w = idle.popleft()
                task, attempts = pending.popleft()
                try:
                    pool.channels[w].send("task", task.to_payload())
                except OSError:
                    pending.appendleft((task, attempts))
                    lose(w, "send failed")
                    continue
                inflight[w] = (task, attempts)
            if not inflight:
                raise PoolExhausted(f"no live workers left with {len(pending)} tasks pending")
            for key, _ in sel.select():
                w = key.data
                try:
                    msg = pool.channels[w].recv()
                except ProtocolError as exc:
                    lose(w, f"malformed frame: {exc}")
                    continue
                if msg is None:
                    lose(w, f"worker {w} disconnected")
                    continue
                kind, payload = msg
                if w not in inflight:
                    raise ProtocolError(f"unsolicited {kind!r} frame from worker {w}")
                task, attempts = inflight.pop(w)
                idle.append(w)
                if kind == "result":
                    env = ResultEnvelope.from_payload(payload)
                    if env.task_id != task.task_id or env.cycle != task.cycle:
                        raise ProtocolError(
                            f"worker {w} answered task {env.task_id}/cycle {env.cycle}, "
                            f"expected {task.task_id}/{task.cycle}"
                        )
                    if env.task_id in results:
                        raise ProtocolError(f"duplicate result for task {env.task_id}")
                    results[env.task_id] = env
                elif kind == "error":
                    retry(task, attempts, str(payload.get("message", "error frame")))
                else:
                    raise ProtocolError(f"unexpected {kind!r} frame from worker {w}")
    finally:
        sel.close()
    return [results[i] for i in sorted(results)]
