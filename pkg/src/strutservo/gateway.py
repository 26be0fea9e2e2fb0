"""Operator-facing service: command intake, state stream, history.

All command effects funnel through the engine's single-consumer queue; the
gateway validates (auth token, envelope, idempotency, lock-out policy) and
either rejects or enqueues for the next tick boundary.  State flows the other
way as immutable snapshots: subscribers get every alarm event but snapshots
coalesce latest-wins, so a slow consumer skips ticks yet never sees them out
of order.

Wire schema (versioned, v=1; unknown input fields ignored, never emitted):

    hello       {v, type:"hello", token, client_id, subscribe:[...]}
    outcome     {v, type:"outcome", client_id, client_seq, accepted,
                 reason?, applied_tick?}
    command     {v, type:"command", client_id, client_seq, kind, ...}
    snapshot    engine snapshot (type:"snapshot")
    alarm_event {v, type:"alarm_event", tick, channel, level, latched,
                 acknowledged, raised_tick}

Transports: newline-delimited JSON over TCP (scriptable, bit-exact loggable),
plus plain HTTP for the console: static assets, GET /history, GET /state,
GET /stream (the same push messages over server-sent events), POST /command.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .commands import validate_payload
from .engine import Engine
from .safety import AlarmLevel
from .scenario import Scenario
from .telemetry import RunWriter, record_to_dict

PROTOCOL_VERSION = 1

_COMMAND_FIELDS = ("kind", "strut", "value", "mode", "channel", "over_ticks", "operator")
_ALLOWED_WHILE_LOCKED = frozenset({"reset", "e_stop", "ack_alarm"})


def _outcome(client_id, client_seq, accepted, reason=None, applied_tick=None) -> dict:
    out = {"v": PROTOCOL_VERSION, "type": "outcome",
           "client_id": client_id, "client_seq": client_seq, "accepted": accepted}
    if reason is not None:
        out["reason"] = reason
    if applied_tick is not None:
        out["applied_tick"] = applied_tick
    return out


class Subscriber:
    """One consumer of the state stream: coalesced snapshots, lossless alarms."""

    def __init__(self, want_snapshots=True, want_alarms=True):
        self.want_snapshots = want_snapshots
        self.want_alarms = want_alarms
        self._cond = threading.Condition()
        self._snapshot: dict | None = None
        self._alarms: deque[dict] = deque()
        self.closed = False

    def offer(self, snapshot: dict | None, alarm_events: list[dict]):
        with self._cond:
            if self.closed:
                return
            if snapshot is not None and self.want_snapshots:
                self._snapshot = snapshot  # latest wins
            if self.want_alarms:
                self._alarms.extend(alarm_events)
            self._cond.notify()

    def next_messages(self, timeout: float = 0.5) -> list[dict]:
        """Pending messages in delivery order (alarms first); empty on timeout."""
        with self._cond:
            if self._snapshot is None and not self._alarms and not self.closed:
                self._cond.wait(timeout)
            msgs = list(self._alarms)
            self._alarms.clear()
            if self._snapshot is not None:
                msgs.append(self._snapshot)
                self._snapshot = None
            return msgs

    def close(self):
        with self._cond:
            self.closed = True
            self._cond.notify()


class Gateway:
    """Validates operator commands into the engine queue and publishes state."""

    def __init__(self, engine: Engine, command_log_path: str | Path | None = None):
        self.engine = engine
        self.scenario: Scenario = engine.scenario
        self._lock = threading.Lock()
        self._outcomes: dict[tuple[str, int], dict] = {}
        self._last_seq: dict[str, int] = {}
        self._subscribers: list[Subscriber] = []
        self._log_file = None
        if command_log_path is not None:
            self._log_file = open(command_log_path, "w", encoding="utf-8", newline="")

    # ----------------------------------------------------------- commands

    def hello_header(self) -> dict:
        """Full-state header sent once per subscription."""
        sc = self.scenario
        return {
            "v": PROTOCOL_VERSION,
            "type": "hello",
            "scenario": {"name": sc.name, "description": sc.description,
                         "dt_s": sc.dt_s, "duration_ticks": sc.duration_ticks,
                         "seed": sc.seed},
            "struts": {
                s.id: {
                    "design_force_kn": s.strut.design_force_kn,
                    "jack_stroke_mm": list(s.strut.jack_stroke_mm),
                    "jack_rate_limit_mm_per_s": s.strut.jack_rate_limit_mm_per_s,
                }
                for s in sc.struts
            },
            "thresholds": [
                {"channel": t.channel, "direction": t.direction.value,
                 "warn": t.warn_level, "alarm": t.alarm_level,
                 "hysteresis": t.hysteresis}
                for t in sc.thresholds
            ],
            "envelope": {
                "force_setpoint_kn": list(sc.envelope.force_setpoint_kn),
                "displacement_setpoint_mm": list(sc.envelope.displacement_setpoint_mm),
                "jog_mm_per_s": list(sc.envelope.jog_mm_per_s),
            },
            "n_locks": sc.locks.n_locks,
            "snapshot": self.engine.snapshot(),
        }

    def authenticate(self, token) -> bool:
        return token == self.scenario.auth_token

    def handle_command(self, msg: dict) -> dict:
        """Validate one command message; accepted commands enqueue at the next tick."""
        client_id = msg.get("client_id")
        client_seq = msg.get("client_seq")
        if not isinstance(client_id, str) or not client_id:
            return _outcome("", 0, False, reason="missing client_id")
        if isinstance(client_seq, bool) or not isinstance(client_seq, int):
            return _outcome(client_id, 0, False, reason="missing client_seq")
        if client_id == "script":
            return _outcome(client_id, client_seq, False,
                            reason="client_id 'script' is reserved")

        payload = {k: msg[k] for k in _COMMAND_FIELDS if k in msg}
        payload["client_id"] = client_id
        payload["client_seq"] = client_seq

        with self._lock:
            key = (client_id, client_seq)
            if key in self._outcomes:
                return self._outcomes[key]  # idempotent replay of a known command
            last = self._last_seq.get(client_id)
            if last is not None and client_seq <= last:
                return _outcome(client_id, client_seq, False,
                                reason="non-monotonic client_seq")

            outcome = self._decide(payload)
            self._outcomes[key] = outcome
            self._last_seq[client_id] = client_seq
            if outcome["accepted"] and self._log_file is not None:
                self._log_file.write(json.dumps(
                    {"v": PROTOCOL_VERSION, "type": "command_log",
                     "applied_tick": outcome["applied_tick"], "command": payload},
                    sort_keys=True) + "\n")
                self._log_file.flush()
            return outcome

    def _decide(self, payload: dict) -> dict:
        client_id = payload["client_id"]
        client_seq = payload["client_seq"]
        kind = payload.get("kind")
        if self.engine.estop and kind not in _ALLOWED_WHILE_LOCKED:
            return _outcome(client_id, client_seq, False, reason="system_locked")
        reason = validate_payload(payload, self.scenario.strut_ids(), self.scenario.envelope)
        if reason is not None:
            return _outcome(client_id, client_seq, False, reason=reason)
        if kind == "ack_alarm":
            state = self.engine.alarm_states.get(payload["channel"])
            if state is None:
                return _outcome(client_id, client_seq, False, reason="unknown channel")
            if state.level is not AlarmLevel.ALARM:
                return _outcome(client_id, client_seq, False, reason="no_active_alarm")
        try:
            applied = self.engine.enqueue(payload)
        except RuntimeError as e:
            return _outcome(client_id, client_seq, False, reason=str(e))
        return _outcome(client_id, client_seq, True, applied_tick=applied)

    # ----------------------------------------------------------- streaming

    def subscribe(self, want_snapshots=True, want_alarms=True) -> Subscriber:
        sub = Subscriber(want_snapshots, want_alarms)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber):
        sub.close()
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def publish(self, engine: Engine, rec) -> None:
        """Engine on_tick callback: push this tick's snapshot and alarm events."""
        snapshot = engine.snapshot()
        alarms = [
            {"v": PROTOCOL_VERSION, "type": "alarm_event", "tick": rec.tick,
             "channel": e.channel, "level": e.level, "latched": e.latched,
             "acknowledged": e.acknowledged, "raised_tick": e.raised_tick}
            for e in rec.alarm_events
        ]
        with self._lock:
            subs = list(self._subscribers)
        for sub in subs:
            if sub.closed:
                self.unsubscribe(sub)
            else:
                sub.offer(snapshot, alarms)

    # ----------------------------------------------------------- history

    def history(self, start: int, end: int, strut_id: str | None = None) -> list[dict]:
        """Completed ticks only; delegates to the telemetry store."""
        end = min(end, self.engine.tick)
        if end <= start:
            return []
        return [record_to_dict(r) for r in self.engine.store.query(start, end, strut_id)]

    def close(self):
        with self._lock:
            subs = list(self._subscribers)
        for sub in subs:
            self.unsubscribe(sub)
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None


# ---------------------------------------------------------------------------
# TCP transport: newline-delimited JSON, request/response + server push

class _TcpHandler(socketserver.StreamRequestHandler):
    def handle(self):
        gateway: Gateway = self.server.gateway  # type: ignore[attr-defined]
        write_lock = threading.Lock()
        sub: Subscriber | None = None
        authed = False
        pusher: threading.Thread | None = None

        def send(msg: dict):
            data = (json.dumps(msg, sort_keys=True) + "\n").encode("utf-8")
            with write_lock:
                self.wfile.write(data)
                self.wfile.flush()

        try:
            for raw in self.rfile:
                line = raw.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError:
                    send({"v": PROTOCOL_VERSION, "type": "outcome", "accepted": False,
                          "client_id": "", "client_seq": 0, "reason": "malformed json"})
                    continue
                mtype = msg.get("type")
                if mtype == "hello":
                    if not gateway.authenticate(msg.get("token")):
                        send({"v": PROTOCOL_VERSION, "type": "outcome", "accepted": False,
                              "client_id": str(msg.get("client_id", "")), "client_seq": 0,
                              "reason": "unauthorized"})
                        return
                    authed = True
                    send(gateway.hello_header())
                    wants = msg.get("subscribe", ["snapshots", "alarms"])
                    if wants and sub is None:
                        sub = gateway.subscribe("snapshots" in wants, "alarms" in wants)
                        pusher = threading.Thread(
                            target=self._pump, args=(sub, send), daemon=True)
                        pusher.start()
                elif mtype == "command":
                    if not authed:
                        send(_outcome(str(msg.get("client_id", "")),
                                      msg.get("client_seq", 0) if isinstance(msg.get("client_seq"), int) else 0,
                                      False, reason="unauthorized"))
                        continue
                    send(gateway.handle_command(msg))
                # unknown message types are ignored (forward compatibility)
        except (ConnectionError, BrokenPipeError, OSError):
            pass
        finally:
            if sub is not None:
                gateway.unsubscribe(sub)

    def _pump(self, sub: Subscriber, send):
        try:
            while not sub.closed:
                for msg in sub.next_messages(timeout=0.5):
                    send(msg)
        except (ConnectionError, BrokenPipeError, OSError):
            sub.close()


class TcpGatewayServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], gateway: Gateway):
        super().__init__(addr, _TcpHandler)
        self.gateway = gateway


# ---------------------------------------------------------------------------
# HTTP transport: console assets, history, SSE stream, command POST

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}

_PLACEHOLDER_PAGE = b"""<!doctype html>
<html><head><title>strutservo</title></head>
<body><h1>strutservo gateway</h1>
<p>No console assets found. Build the frontend (see frontend/README) or use the
TCP endpoint / HTTP API directly: GET /state, GET /history, GET /stream,
POST /command.</p></body></html>
"""


class _HttpHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):  # quiet by default
        pass

    @property
    def gateway(self) -> Gateway:
        return self.server.gateway  # type: ignore[attr-defined]

    def _token_ok(self, query: dict) -> bool:
        token = self.headers.get("X-Auth-Token") or (query.get("token", [None])[0])
        return self.gateway.authenticate(token)

    def _send_json(self, obj, status=200):
        body = json.dumps(obj, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        url = urlparse(self.path)
        query = parse_qs(url.query)
        if url.path == "/stream":
            self._stream(query)
        elif url.path == "/history":
            self._history(query)
        elif url.path == "/state":
            if not self._token_ok(query):
                self._send_json({"error": "unauthorized"}, 401)
                return
            self._send_json(self.gateway.engine.snapshot())
        elif url.path == "/meta":
            if not self._token_ok(query):
                self._send_json({"error": "unauthorized"}, 401)
                return
            self._send_json(self.gateway.hello_header())
        else:
            self._static(url.path)

    def do_POST(self):
        url = urlparse(self.path)
        query = parse_qs(url.query)
        if url.path != "/command":
            self._send_json({"error": "not found"}, 404)
            return
        if not self._token_ok(query):
            self._send_json({"error": "unauthorized"}, 401)
            return
        length = int(self.headers.get("Content-Length", "0"))
        try:
            msg = json.loads(self.rfile.read(length).decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._send_json({"error": "malformed json"}, 400)
            return
        self._send_json(self.gateway.handle_command(msg))

    def _history(self, query: dict):
        if not self._token_ok(query):
            self._send_json({"error": "unauthorized"}, 401)
            return
        try:
            start = int(query.get("start", ["0"])[0])
            end_default = self.gateway.engine.tick
            end = int(query.get("end", [str(end_default)])[0])
        except ValueError:
            self._send_json({"error": "start/end must be integers"}, 400)
            return
        strut = query.get("strut", [None])[0]
        if end < start:
            self._send_json({"error": "inverted range"}, 400)
            return
        try:
            records = self.gateway.history(start, end, strut)
        except KeyError:
            self._send_json({"error": "unknown strut"}, 400)
            return
        self._send_json(records)

    def _stream(self, query: dict):
        if not self._token_ok(query):
            self._send_json({"error": "unauthorized"}, 401)
            return
        wants = query.get("subscribe", ["snapshots,alarms"])[0].split(",")
        sub = self.gateway.subscribe("snapshots" in wants, "alarms" in wants)
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        try:
            self._sse_send(self.gateway.hello_header())
            while not sub.closed:
                for msg in sub.next_messages(timeout=0.5):
                    self._sse_send(msg)
                if self.gateway.engine.status != "running":
                    # flush any tail, then end the stream
                    for msg in sub.next_messages(timeout=0.0):
                        self._sse_send(msg)
                    break
        except (ConnectionError, BrokenPipeError, OSError):
            pass
        finally:
            self.gateway.unsubscribe(sub)

    def _sse_send(self, msg: dict):
        data = "data: " + json.dumps(msg, sort_keys=True) + "\n\n"
        self.wfile.write(data.encode("utf-8"))
        self.wfile.flush()

    def _static(self, path: str):
        assets: Path | None = self.server.assets_dir  # type: ignore[attr-defined]
        if path in ("/", ""):
            path = "/index.html"
        if assets is None:
            if path == "/index.html":
                self.send_response(200)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(_PLACEHOLDER_PAGE)))
                self.end_headers()
                self.wfile.write(_PLACEHOLDER_PAGE)
                return
            self._send_json({"error": "not found"}, 404)
            return
        target = (assets / path.lstrip("/")).resolve()
        if not str(target).startswith(str(assets.resolve())) or not target.is_file():
            self._send_json({"error": "not found"}, 404)
            return
        body = target.read_bytes()
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class HttpGatewayServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], gateway: Gateway, assets_dir=None):
        super().__init__(addr, _HttpHandler)
        self.gateway = gateway
        self.assets_dir = Path(assets_dir) if assets_dir else None


# ---------------------------------------------------------------------------
# live session

class LiveSession:
    """An engine with the gateway attached, served over TCP and HTTP.

    Tests drive ticks explicitly with advance(); interactive use runs paced in
    a background thread.  Port 0 binds an ephemeral port.
    """

    def __init__(self, scenario: Scenario, out_dir=None, command_log_path=None,
                 tcp_addr=("127.0.0.1", 0), http_addr=("127.0.0.1", 0),
                 assets_dir=None):
        writer = None
        if out_dir is not None:
            writer = RunWriter(out_dir, scenario.strut_ids(), scenario.locks.n_locks)
        self.engine = Engine(scenario, writer=writer)
        self.gateway = Gateway(self.engine, command_log_path=command_log_path)
        self.tcp_server = TcpGatewayServer(tcp_addr, self.gateway) if tcp_addr else None
        self.http_server = (HttpGatewayServer(http_addr, self.gateway, assets_dir)
                            if http_addr else None)
        self._threads: list[threading.Thread] = []
        self._run_thread: threading.Thread | None = None

    @property
    def tcp_port(self) -> int:
        return self.tcp_server.server_address[1]

    @property
    def http_port(self) -> int:
        return self.http_server.server_address[1]

    def start(self):
        for server in (self.tcp_server, self.http_server):
            if server is not None:
                t = threading.Thread(target=server.serve_forever, daemon=True)
                t.start()
                self._threads.append(t)
        return self

    def advance(self, n_ticks: int = 1):
        """Step and publish n ticks (stops early if the run ends)."""
        for _ in range(n_ticks):
            if self.engine.status != "running":
                break
            rec = self.engine.step()
            self.gateway.publish(self.engine, rec)

    def run_paced(self, pace_s: float):
        """Run to completion in a background thread, one tick per pace_s."""
        self._run_thread = threading.Thread(
            target=self.engine.run,
            kwargs={"pace_s": pace_s, "on_tick": self.gateway.publish},
            daemon=True,
        )
        self._run_thread.start()
        return self._run_thread

    def finalize(self) -> dict:
        summary = self.engine.summary()
        if self.engine.writer is not None:
            self.engine.writer.finalize(summary)
        return summary

    def stop(self):
        for server in (self.tcp_server, self.http_server):
            if server is not None:
                server.shutdown()
                server.server_close()
        self.gateway.close()


def replay_commands(engine: Engine, log_lines) -> int:
    """Schedule a recorded command log into a fresh engine; returns count."""
    count = 0
    for line in log_lines:
        line = line.strip()
        if not line:
            continue
        entry = json.loads(line)
        if entry.get("type") != "command_log":
            continue
        engine.schedule(int(entry["applied_tick"]), dict(entry["command"]))
        count += 1
    return count


def connect_tcp(port: int, token: str, client_id: str = "cli",
                subscribe=("snapshots", "alarms"), host: str = "127.0.0.1"):
    """Small blocking client for scripts and tests; returns (sock, recv_line)."""
    sock = socket.create_connection((host, port), timeout=5.0)
    rfile = sock.makefile("r", encoding="utf-8")

    def send(msg: dict):
        sock.sendall((json.dumps(msg) + "\n").encode("utf-8"))

    def recv() -> dict:
        line = rfile.readline()
        if not line:
            raise ConnectionError("gateway closed the connection")
        return json.loads(line)

    send({"v": PROTOCOL_VERSION, "type": "hello", "token": token,
          "client_id": client_id, "subscribe": list(subscribe)})
    header = recv()
    if header.get("type") != "hello":
        sock.close()
        raise ConnectionError(f"subscription refused: {header.get('reason', 'unknown')}")
    return sock, send, recv, header
