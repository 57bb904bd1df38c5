"""Coordinator/worker message protocol.

A frame is a 4-byte big-endian unsigned length followed by that many bytes of
UTF-8 JSON ``{"type": ..., "payload": {...}}`` with ``type`` one of ``task``,
``result``, ``error`` or ``shutdown``. Unknown payload fields are ignored.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass

import numpy as np

from dqaoa.decomposition import SubQubo
from dqaoa.qaoa import QaoaConfig, QaoaResult

FRAME_TYPES = ("task", "result", "error", "shutdown")
MAX_FRAME = 1 << 30
_HEADER = struct.Struct(">I")


class ProtocolError(ValueError):
    """Malformed frame; ``task_id`` is set when it could still be recovered."""

    def __init__(self, message: str, task_id: int | None = None):
        super().__init__(message)
        self.task_id = task_id


def task_seed(master_seed: int, cycle: int, task_id: int) -> int:
    """Per-task seed; independent of which worker runs the task or when."""
    return int(np.random.SeedSequence([master_seed, cycle, task_id]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class TaskEnvelope:
    task_id: int
    cycle: int
    sub: SubQubo
    qaoa: QaoaConfig
    seed: int

    def to_payload(self) -> dict:
        return {
            "task_id": self.task_id,
            "cycle": self.cycle,
            "sub": {
                "indices": [int(i) for i in self.sub.indices],
                "coeffs": self.sub.coeffs.tolist(),
            },
            "qaoa": self.qaoa.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> TaskEnvelope:
        task_id = payload.get("task_id") if isinstance(payload, dict) else None
        task_id = task_id if isinstance(task_id, int) else None
        try:
            sub = payload["sub"]
            indices = np.asarray(sub["indices"], dtype=np.int64)
            coeffs = np.asarray(sub["coeffs"], dtype=np.float64)
            if coeffs.shape != (indices.shape[0], indices.shape[0]):
                raise ValueError(f"coeffs shape {coeffs.shape} does not match {indices.shape[0]} indices")
            return cls(
                task_id=int(payload["task_id"]),
                cycle=int(payload["cycle"]),
                sub=SubQubo(indices, coeffs),
                qaoa=QaoaConfig.from_dict(payload["qaoa"]),
                seed=int(payload["seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad task payload: {exc!r}", task_id) from None


@dataclass(frozen=True)
class ResultEnvelope:
    task_id: int
    cycle: int
    result: QaoaResult
    worker_id: int

    def to_payload(self) -> dict:
        return {
            "task_id": self.task_id,
            "cycle": self.cycle,
            "result": self.result.to_dict(),
            "worker_id": self.worker_id,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> ResultEnvelope:
        try:
            return cls(
                task_id=int(payload["task_id"]),
                cycle=int(payload["cycle"]),
                result=QaoaResult.from_dict(payload["result"]),
                worker_id=int(payload["worker_id"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad result payload: {exc!r}") from None


def encode_frame(kind: str, payload: dict | None = None) -> bytes:
    if kind not in FRAME_TYPES:
        raise ProtocolError(f"unknown frame type {kind!r}")
    body = json.dumps({"type": kind, "payload": payload or {}}, separators=(",", ":")).encode()
    return _HEADER.pack(len(body)) + body


def decode_body(body: bytes) -> tuple[str, dict]:
    try:
        msg = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame is not UTF-8 JSON: {exc}") from None
    if not isinstance(msg, dict):
        raise ProtocolError("frame must be a JSON object")
    kind, payload = msg.get("type"), msg.get("payload")
    if kind not in FRAME_TYPES:
        raise ProtocolError(f"unknown frame type {kind!r}")
    if not isinstance(payload, dict):
        raise ProtocolError("frame payload must be an object")
    return kind, payload


def decode_frame(frame: bytes) -> tuple[str, dict]:
    if len(frame) < _HEADER.size:
        raise ProtocolError("frame shorter than its length prefix")
    (length,) = _HEADER.unpack_from(frame)
    if len(frame) - _HEADER.size != length:
        raise ProtocolError(f"length prefix says {length} bytes, frame carries {len(frame) - _HEADER.size}")
    return decode_body(frame[_HEADER.size :])


class MessageChannel:
    """Frame reader/writer over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock

    def fileno(self) -> int:
        return self.sock.fileno()

    def _read_exact(self, n: int) -> bytes | None:
        chunks, remaining = [], n
        while remaining:
            try:
                chunk = self.sock.recv(min(remaining, 1 << 20))
            except (ConnectionError, OSError):
                return None
            if not chunk:
                return None
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def recv_body(self) -> bytes | None:
        """Next frame body, or ``None`` once the peer is gone."""
        header = self._read_exact(_HEADER.size)
        if header is None:
            return None
        (length,) = _HEADER.unpack(header)
        if length > MAX_FRAME:
            raise ProtocolError(f"frame of {length} bytes exceeds limit")
        return self._read_exact(length) if length else b""

    def recv(self) -> tuple[str, dict] | None:
        body = self.recv_body()
        return None if body is None else decode_body(body)

    def send_frame(self, frame: bytes) -> None:
        self.sock.sendall(frame)

    def send(self, kind: str, payload: dict | None = None) -> None:
        self.send_frame(encode_frame(kind, payload))

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass
