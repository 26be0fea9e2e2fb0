/**
 * Gateway wire schema (v=1) and type guards.
 *
 * The console never invents state: everything rendered originates from a
 * hello header, a snapshot, an alarm_event, or an outcome message.  Unknown
 * fields are ignored on input and never emitted on output.
 */

export const PROTOCOL_VERSION = 1;

export interface StrutSnapshot {
  true_force_kn: number;
  measured_force_kn: number;
  force_status: string;
  true_disp_mm: number;
  measured_disp_mm: number;
  temp_c: number;
  jack_ext_mm: number;
  command_mm_per_s: number;
  mode: string;
  setpoint: number;
  deadband: number;
  stage_index: number;
  lock_loads_kn: number[];
  lock_cycles: number[];
  lock_failed: number[];
}

export interface Snapshot {
  v: number;
  type: "snapshot";
  tick: number;
  status: string;
  estop: boolean;
  struts: Record<string, StrutSnapshot>;
  alarms: AlarmRow[];
}

export interface AlarmRow {
  channel: string;
  level: string;
  latched: boolean;
  acknowledged: boolean;
  raised_tick: number | null;
}

export interface AlarmEvent extends AlarmRow {
  v: number;
  type: "alarm_event";
  tick: number;
}

export interface ThresholdInfo {
  channel: string;
  direction: string;
  warn: number;
  alarm: number;
  hysteresis: number;
}

export interface HelloHeader {
  v: number;
  type: "hello";
  scenario: { name: string; description: string; dt_s: number; duration_ticks: number; seed: number };
  struts: Record<string, { design_force_kn: number; jack_stroke_mm: number[]; jack_rate_limit_mm_per_s: number }>;
  thresholds: ThresholdInfo[];
  envelope: { force_setpoint_kn: number[]; displacement_setpoint_mm: number[]; jog_mm_per_s: number[] };
  n_locks: number;
  snapshot: Snapshot;
}

export interface Outcome {
  v: number;
  type: "outcome";
  client_id: string;
  client_seq: number;
  accepted: boolean;
  reason?: string;
  applied_tick?: number;
}

export type ServerMessage = HelloHeader | Snapshot | AlarmEvent | Outcome;

export type CommandKind =
  | "set_force_setpoint"
  | "set_displacement_setpoint"
  | "set_mode"
  | "jog_jack"
  | "ack_alarm"
  | "e_stop"
  | "reset"
  | "inject_stage"
  | "inject_temp_ramp";

export interface CommandBody {
  kind: CommandKind;
  strut?: string;
  value?: number;
  mode?: string;
  channel?: string;
  over_ticks?: number;
}

export interface CommandMessage extends CommandBody {
  v: number;
  type: "command";
  client_id: string;
  client_seq: number;
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as { type?: unknown };
  switch (msg.type) {
    case "hello":
    case "snapshot":
    case "alarm_event":
    case "outcome":
      return data as ServerMessage;
    default:
      return null; // unknown message types are ignored
  }
}

export function buildCommand(body: CommandBody, clientId: string, clientSeq: number): CommandMessage {
  return { v: PROTOCOL_VERSION, type: "command", client_id: clientId, client_seq: clientSeq, ...body };
}

export function describeCommand(body: CommandBody): string {
  switch (body.kind) {
    case "set_force_setpoint":
      return `${body.strut}: setpoint ${body.value} kN`;
    case "set_displacement_setpoint":
      return `${body.strut}: displacement setpoint ${body.value} mm`;
    case "set_mode":
      return `${body.strut}: mode ${body.mode}`;
    case "jog_jack":
      return `${body.strut}: jog ${body.value} mm/s`;
    case "ack_alarm":
      return `ack ${body.channel}`;
    case "e_stop":
      return "EMERGENCY STOP";
    case "reset":
      return "reset e-stop";
    case "inject_stage":
      return `inject stage ${body.value} kN${body.strut ? ` on ${body.strut}` : ""}`;
    case "inject_temp_ramp":
      return `inject temp ramp ${body.value} degC over ${body.over_ticks ?? 0} ticks`;
  }
}
