#!/usr/bin/env python3
"""A scripted operator session over the live TCP gateway.

Starts a paced run with the gateway attached, connects as a client, watches
snapshots stream in, changes a setpoint, trips the e-stop, and resets -- then
shows that the whole session replays deterministically from the command log.

Everything runs in-process on ephemeral ports; no console build needed.
"""

import tempfile
from pathlib import Path

from strutservo.engine import Engine
from strutservo.gateway import LiveSession, connect_tcp, replay_commands
from strutservo.scenario import load_scenario
from strutservo.telemetry import RunWriter

DOC = """
meta: {name: live-demo}
duration_ticks: 160
seed: 21
struts:
  - id: S1
    strut: {axial_stiffness_kn_per_mm: 600.0}
    prestress_kn: 2200.0
service: {auth_token: local-dev-token}
"""

workdir = Path(tempfile.mkdtemp(prefix="strutservo-demo-"))
scenario = load_scenario(DOC)
session = LiveSession(scenario, out_dir=workdir / "live",
                      command_log_path=workdir / "commands.log").start()
print(f"gateway up: tcp port {session.tcp_port}, http port {session.http_port}")

sock, send, recv, header = connect_tcp(session.tcp_port, "local-dev-token", "demo-op")
print(f"hello: scenario '{header['scenario']['name']}', "
      f"struts {list(header['struts'])}, envelope {header['envelope']['force_setpoint_kn']}")

session.advance(30)


def recv_type(wanted):
    # pushed snapshots interleave freely with outcomes on the wire
    msg = recv()
    while msg["type"] != wanted:
        msg = recv()
    return msg


snap = recv_type("snapshot")
s1 = snap["struts"]["S1"]
print(f"tick {snap['tick']:3d}: F={s1['measured_force_kn']:.0f} kN, "
      f"mode {s1['mode']}, setpoint {s1['setpoint']:.0f}")

send({"v": 1, "type": "command", "client_id": "demo-op", "client_seq": 1,
      "kind": "set_force_setpoint", "strut": "S1", "value": 2300.0})
outcome = recv_type("outcome")
print(f"setpoint 2300 -> accepted={outcome['accepted']}, applies at tick {outcome['applied_tick']}")

session.advance(40)
snap = recv_type("snapshot")
print(f"tick {snap['tick']:3d}: setpoint now {snap['struts']['S1']['setpoint']:.0f}, "
      f"F={snap['struts']['S1']['measured_force_kn']:.0f} kN")

send({"v": 1, "type": "command", "client_id": "demo-op", "client_seq": 2, "kind": "e_stop"})
print(f"e-stop -> accepted={recv_type('outcome')['accepted']}")
session.advance(10)
snap = recv_type("snapshot")
print(f"tick {snap['tick']:3d}: estop={snap['estop']}, mode {snap['struts']['S1']['mode']}, "
      f"command {snap['struts']['S1']['command_mm_per_s']}")

send({"v": 1, "type": "command", "client_id": "demo-op", "client_seq": 3, "kind": "reset"})
recv_type("outcome")
while session.engine.status == "running":
    session.advance(50)
session.finalize()
sock.close()
session.stop()
print(f"run finished; telemetry in {workdir / 'live'}")

print("\nreplaying the recorded command log into a fresh engine...")
replay = Engine(load_scenario(DOC),
                writer=RunWriter(workdir / "replay", scenario.strut_ids(),
                                 scenario.locks.n_locks))
with open(workdir / "commands.log") as f:
    n = replay_commands(replay, f)
replay.run()
live_bytes = (workdir / "live" / "run.csv").read_bytes()
replay_bytes = (workdir / "replay" / "run.csv").read_bytes()
print(f"{n} commands replayed; telemetry byte-identical: {live_bytes == replay_bytes}")
