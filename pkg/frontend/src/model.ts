/**
 * SessionModel: the console's single source of client state.
 *
 * A pure reducer over incoming server messages plus local command intents.
 * Rendering reads from it; transports feed it.  Invariants it owns:
 *
 *  - the rendered tick never decreases; stale snapshots are dropped
 *  - every sent command is tracked until its outcome arrives
 *  - (client_id, client_seq) pairs are never reused within a session
 *  - reconnects mark a continuity break in the chart window
 */

import {
  AlarmEvent,
  AlarmRow,
  CommandBody,
  CommandMessage,
  HelloHeader,
  Outcome,
  Snapshot,
  buildCommand,
  describeCommand,
} from "./protocol.js";

export interface SeriesPoint {
  tick: number;
  force: number;
  disp: number;
  temp: number;
  setpoint: number;
  deadband: number;
}

export interface PendingCommand {
  seq: number;
  body: CommandBody;
  label: string;
  sentAtTick: number;
}

export interface ResolvedCommand extends PendingCommand {
  accepted: boolean;
  reason?: string;
  appliedTick?: number;
}

export type ConnectionState = "disconnected" | "connecting" | "connected";

export class SessionModel {
  readonly clientId: string;
  readonly windowTicks: number;

  connection: ConnectionState = "disconnected";
  header: HelloHeader | null = null;
  latest: Snapshot | null = null;
  lastTick = -1;
  series = new Map<string, SeriesPoint[]>();
  alarms = new Map<string, AlarmRow>();
  pending = new Map<number, PendingCommand>();
  resolved: ResolvedCommand[] = [];
  continuityBreaks: number[] = [];
  droppedStale = 0;

  private nextSeq = 1;

  constructor(clientId: string, windowTicks = 600) {
    this.clientId = clientId;
    this.windowTicks = windowTicks;
  }

  onConnecting(): void {
    this.connection = "connecting";
  }

  onHello(header: HelloHeader): void {
    const reconnect = this.header !== null;
    this.connection = "connected";
    this.header = header;
    if (reconnect) {
      this.continuityBreaks.push(Math.max(this.lastTick, 0));
    }
    this.onSnapshot(header.snapshot);
  }

  onDisconnect(): void {
    this.connection = "disconnected";
  }

  /** Returns true if the snapshot advanced the view (false: dropped as stale). */
  onSnapshot(snap: Snapshot): boolean {
    if (snap.tick < this.lastTick) {
      this.droppedStale += 1;
      return false;
    }
    const firstSample = this.lastTick < 0;
    const sameTick = snap.tick === this.lastTick;
    this.latest = snap;
    this.lastTick = snap.tick;
    for (const [sid, s] of Object.entries(snap.struts)) {
      let window = this.series.get(sid);
      if (window === undefined) {
        window = [];
        this.series.set(sid, window);
      }
      if (sameTick && !firstSample && window.length > 0) {
        window.pop(); // refreshed view of the same tick replaces the point
      }
      window.push({
        tick: snap.tick,
        force: s.measured_force_kn,
        disp: s.measured_disp_mm,
        temp: s.temp_c,
        setpoint: s.setpoint,
        deadband: s.deadband,
      });
      if (window.length > this.windowTicks) {
        window.splice(0, window.length - this.windowTicks);
      }
    }
    // snapshots carry the full alarm table and win over incremental events
    for (const row of snap.alarms) {
      this.alarms.set(row.channel, row);
    }
    return true;
  }

  onAlarmEvent(ev: AlarmEvent): void {
    this.alarms.set(ev.channel, {
      channel: ev.channel,
      level: ev.level,
      latched: ev.latched,
      acknowledged: ev.acknowledged,
      raised_tick: ev.raised_tick,
    });
  }

  onOutcome(out: Outcome): void {
    if (out.client_id !== this.clientId) return;
    const pending = this.pending.get(out.client_seq);
    if (pending === undefined) return;
    this.pending.delete(out.client_seq);
    this.resolved.push({
      ...pending,
      accepted: out.accepted,
      reason: out.reason,
      appliedTick: out.applied_tick,
    });
    if (this.resolved.length > 50) {
      this.resolved.splice(0, this.resolved.length - 50);
    }
  }

  /** Allocate a fresh sequence number and track the command until its outcome. */
  track(body: CommandBody): CommandMessage {
    const seq = this.nextSeq;
    this.nextSeq += 1;
    this.pending.set(seq, {
      seq,
      body,
      label: describeCommand(body),
      sentAtTick: this.lastTick,
    });
    return buildCommand(body, this.clientId, seq);
  }

  activeAlarms(): AlarmRow[] {
    return [...this.alarms.values()]
      .filter((a) => a.level !== "normal")
      .sort((a, b) => a.channel.localeCompare(b.channel));
  }

  unacknowledgedAlarms(): AlarmRow[] {
    return this.activeAlarms().filter((a) => a.level === "alarm" && !a.acknowledged);
  }

  strutIds(): string[] {
    return this.header ? Object.keys(this.header.struts) : [];
  }
}
