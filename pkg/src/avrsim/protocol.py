"""Newline-delimited JSON wire protocol between the harness and external agents.

The external agent runs a server; the harness connects as a client, exchanges
a protocol handshake, then sends one request per step and reads one response:

    -> {"type": "hello", "protocol": "avr/1"}
    <- {"type": "hello", "protocol": "avr/1"}
    -> {"type": "request", "protocol": "avr/1", "episode_id": ..., "step": ...,
        "prompt": ..., "options": [{"letter", "kind", "text"}, ...],
        "observation": {...}, "image": <base64, optional>}
    <- {"raw_text": "..."}

A version mismatch at the handshake aborts the session; an error frame
({"type": "error", ...}) or any transport fault aborts the episode.
"""

from __future__ import annotations

import json
import socket

from avrsim.world import observation_to_json

PROTOCOL_VERSION = "avr/1"
DEFAULT_TIMEOUT = 30.0


class ProtocolError(Exception):
    pass


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ProtocolError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)


def send_frame(wire, frame: dict) -> None:
    wire.write(json.dumps(frame, sort_keys=True, separators=(",", ":")) + "\n")
    wire.flush()


def read_frame(wire) -> dict:
    line = wire.readline()
    if not line:
        raise ProtocolError("connection closed")
    try:
        frame = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed frame: {exc}") from exc
    if not isinstance(frame, dict):
        raise ProtocolError("frame is not an object")
    return frame


def request_frame(context) -> dict:
    frame = {
        "type": "request",
        "protocol": PROTOCOL_VERSION,
        "episode_id": context.episode_id,
        "step": context.step,
        "prompt": context.prompt,
        "options": [
            {"letter": o.letter, "kind": o.kind, "text": o.text}
            for o in context.options.options
        ],
        "observation": observation_to_json(context.observations[-1]),
    }
    if context.image_b64 is not None:
        frame["image"] = context.image_b64
    return frame


class AgentEndpointSession:
    """Client side of the protocol, one session per episode stream."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        self.endpoint = endpoint
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._wire = None

    def connect(self) -> None:
        host, port = parse_endpoint(self.endpoint)
        try:
            sock = socket.create_connection((host, port), timeout=self.timeout)
        except OSError as exc:
            raise ProtocolError(f"cannot reach {self.endpoint}: {exc}") from exc
        self._sock = sock
        self._wire = sock.makefile("rw", encoding="utf-8", newline="\n")
        send_frame(self._wire, {"type": "hello", "protocol": PROTOCOL_VERSION})
        reply = read_frame(self._wire)
        if reply.get("protocol") != PROTOCOL_VERSION:
            self.close()
            raise ProtocolError(
                f"protocol mismatch: peer speaks {reply.get('protocol')!r}")

    def request(self, context) -> str:
        if self._wire is None:
            self.connect()
        try:
            send_frame(self._wire, request_frame(context))
            reply = read_frame(self._wire)
        except (OSError, ProtocolError) as exc:
            self.close()
            raise ProtocolError(str(exc)) from exc
        if reply.get("type") == "error":
            self.close()
            raise ProtocolError(f"agent error: {reply.get('message', 'unknown')}")
        if "raw_text" not in reply or not isinstance(reply["raw_text"], str):
            self.close()
            raise ProtocolError("response frame lacks raw_text")
        return reply["raw_text"]

    def close(self) -> None:
        if self._wire is not None:
            try:
                self._wire.close()
            except OSError:
                pass
            self._wire = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None
