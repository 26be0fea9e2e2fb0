/**
 * Console entry point: wires the transport stream into the SessionModel and
 * renders panels per strut (charts, mode and setpoint controls, jog), the
 * alarm table with acknowledgment, e-stop/reset, and what-if injections.
 *
 * Rendering is decoupled from message arrival: messages mutate the model and
 * set a dirty flag; a requestAnimationFrame loop redraws at most once per
 * frame with the latest state.
 */

import { Band, Line, StripChart } from "./charts.js";
import { SessionModel } from "./model.js";
import { AlarmRow, CommandBody, ThresholdInfo } from "./protocol.js";
import { GatewayTransport } from "./transport.js";

const params = new URLSearchParams(location.search);
const token = params.get("token") ?? "local-dev-token";
const clientId = `console-${Math.random().toString(36).slice(2, 8)}`;

const transport = new GatewayTransport({ base: "", token });
const model = new SessionModel(clientId);

let dirty = true;
const charts = new Map<string, StripChart[]>();

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el;
}

async function send(body: CommandBody): Promise<void> {
  const msg = model.track(body);
  dirty = true;
  try {
    const outcome = await transport.command(msg);
    model.onOutcome(outcome);
  } catch (err) {
    model.onOutcome({
      v: 1, type: "outcome", client_id: clientId, client_seq: msg.client_seq,
      accepted: false, reason: `transport error: ${String(err)}`,
    });
  }
  dirty = true;
}

function buildStrutPanels(): void {
  const host = $("struts");
  host.textContent = "";
  charts.clear();
  const header = model.header;
  if (header === null) return;
  for (const [sid, info] of Object.entries(header.struts)) {
    const panel = document.createElement("section");
    panel.className = "strut";
    panel.innerHTML = `
      <h2>${sid} <span class="mode" id="mode-${sid}"></span></h2>
      <canvas id="force-${sid}" width="560" height="120"></canvas>
      <canvas id="disp-${sid}" width="560" height="90"></canvas>
      <canvas id="temp-${sid}" width="560" height="90"></canvas>
      <div class="controls">
        <label>setpoint kN
          <input id="sp-${sid}" type="number" step="10" value="${info.design_force_kn}">
        </label>
        <button id="setsp-${sid}">set</button>
        <button id="hold-${sid}">force hold</button>
        <button id="jog-out-${sid}">jog +</button>
        <button id="jog-stop-${sid}">stop</button>
        <button id="jog-in-${sid}">jog -</button>
        <span class="locks" id="locks-${sid}"></span>
      </div>`;
    host.appendChild(panel);

    const force = new StripChart(
      document.getElementById(`force-${sid}`) as HTMLCanvasElement,
      (p) => p.force, "#6fb3ff", "force kN");
    const disp = new StripChart(
      document.getElementById(`disp-${sid}`) as HTMLCanvasElement,
      (p) => p.disp, "#ffd166", "wall disp mm");
    const temp = new StripChart(
      document.getElementById(`temp-${sid}`) as HTMLCanvasElement,
      (p) => p.temp, "#ef8354", "strut temp degC");
    charts.set(sid, [force, disp, temp]);

    const rate = info.jack_rate_limit_mm_per_s;
    $(`setsp-${sid}`).addEventListener("click", () => {
      const value = Number(($(`sp-${sid}`) as HTMLInputElement).value);
      void send({ kind: "set_force_setpoint", strut: sid, value });
    });
    $(`hold-${sid}`).addEventListener("click", () => {
      void send({ kind: "set_mode", strut: sid, mode: "force_hold" });
    });
    $(`jog-out-${sid}`).addEventListener("click", () => {
      void send({ kind: "jog_jack", strut: sid, value: 0.5 * rate });
    });
    $(`jog-in-${sid}`).addEventListener("click", () => {
      void send({ kind: "jog_jack", strut: sid, value: -0.5 * rate });
    });
    $(`jog-stop-${sid}`).addEventListener("click", () => {
      void send({ kind: "jog_jack", strut: sid, value: 0 });
    });
  }

  const stageSelect = $("inject-strut") as HTMLSelectElement;
  stageSelect.textContent = "";
  for (const sid of Object.keys(header.struts)) {
    const opt = document.createElement("option");
    opt.value = sid;
    opt.textContent = sid;
    stageSelect.appendChild(opt);
  }
}

function thresholdLines(sid: string, kind: string): Line[] {
  const header = model.header;
  if (header === null) return [];
  const lines: Line[] = [];
  for (const t of header.thresholds as ThresholdInfo[]) {
    const [strut, channel] = t.channel.split("/");
    if (strut !== sid || channel !== kind) continue;
    lines.push({ value: t.warn, color: "#b8a13d" });
    lines.push({ value: t.alarm, color: "#c3423f" });
  }
  return lines;
}

function alarmRowHtml(row: AlarmRow): string {
  const cls = row.level === "alarm" ? (row.acknowledged ? "alarm acked" : "alarm") : "warning";
  const ack = row.level === "alarm" && !row.acknowledged
    ? `<button data-ack="${row.channel}">ack</button>` : "";
  const status = row.level === "alarm"
    ? (row.acknowledged ? "alarm (acked)" : "ALARM - unprocessed") : row.level;
  return `<tr class="${cls}"><td>${row.channel}</td><td>${status}</td>` +
    `<td>${row.raised_tick ?? ""}</td><td>${ack}</td></tr>`;
}

function render(): void {
  const snap = model.latest;
  $("conn").textContent = model.connection;
  $("conn").className = model.connection;
  if (snap !== null) {
    $("tick").textContent = `tick ${snap.tick} / ${model.header?.scenario.duration_ticks ?? "?"}`;
    $("status").textContent = snap.status;
    $("estop-banner").style.display = snap.estop ? "block" : "none";
    for (const [sid, s] of Object.entries(snap.struts)) {
      const modeEl = document.getElementById(`mode-${sid}`);
      if (modeEl !== null) {
        modeEl.textContent =
          `${s.mode} | F ${s.measured_force_kn.toFixed(0)} kN | ` +
          `jack ${s.jack_ext_mm.toFixed(2)} mm | cmd ${s.command_mm_per_s.toFixed(3)}`;
      }
      const locksEl = document.getElementById(`locks-${sid}`);
      if (locksEl !== null) {
        locksEl.textContent = "locks " + s.lock_loads_kn
          .map((v, i) => s.lock_failed.includes(i) ? "failed" : `${v.toFixed(0)}kN`)
          .join(" / ");
      }
      const window = model.series.get(sid) ?? [];
      const [force, disp, temp] = charts.get(sid) ?? [];
      if (force !== undefined && window.length > 0) {
        const last = window[window.length - 1];
        const bands: Band[] = [{
          lo: last.setpoint - last.deadband,
          hi: last.setpoint + last.deadband,
          color: "rgba(80, 160, 90, 0.18)",
        }];
        force.draw(window, bands, thresholdLines(sid, "force"), model.continuityBreaks);
        disp.draw(window, [], thresholdLines(sid, "displacement"), model.continuityBreaks);
        temp.draw(window, [], thresholdLines(sid, "temperature"), model.continuityBreaks);
      }
    }
  }

  const alarms = model.activeAlarms();
  $("alarm-rows").innerHTML = alarms.length
    ? alarms.map(alarmRowHtml).join("")
    : `<tr><td colspan="4" class="quiet">no active alarms</td></tr>`;

  const pend = [...model.pending.values()];
  const recent = model.resolved.slice(-6).reverse();
  $("commands").innerHTML =
    pend.map((p) => `<li class="pending">#${p.seq} ${p.label} ...</li>`).join("") +
    recent.map((r) => r.accepted
      ? `<li class="ok">#${r.seq} ${r.label} -> applied @ tick ${r.appliedTick}</li>`
      : `<li class="rejected">#${r.seq} ${r.label} -> rejected: ${r.reason}</li>`).join("");
}

function loop(): void {
  if (dirty) {
    dirty = false;
    render();
  }
  requestAnimationFrame(loop);
}

async function consume(): Promise<void> {
  for (;;) {
    model.onConnecting();
    dirty = true;
    try {
      for await (const msg of transport.stream()) {
        switch (msg.type) {
          case "hello":
            model.onHello(msg);
            buildStrutPanels();
            break;
          case "snapshot":
            model.onSnapshot(msg);
            break;
          case "alarm_event":
            model.onAlarmEvent(msg);
            break;
          case "outcome":
            model.onOutcome(msg);
            break;
        }
        dirty = true;
      }
    } catch {
      // fall through to reconnect
    }
    model.onDisconnect();
    dirty = true;
    await new Promise((resolve) => setTimeout(resolve, 1000));
  }
}

$("estop").addEventListener("click", () => void send({ kind: "e_stop" }));
$("reset").addEventListener("click", () => void send({ kind: "reset" }));
$("inject-stage").addEventListener("click", () => {
  const value = Number(($("inject-kn") as HTMLInputElement).value);
  const strut = ($("inject-strut") as HTMLSelectElement).value;
  void send({ kind: "inject_stage", strut, value });
});
$("inject-ramp").addEventListener("click", () => {
  const value = Number(($("ramp-degc") as HTMLInputElement).value);
  const over = Number(($("ramp-ticks") as HTMLInputElement).value);
  void send({ kind: "inject_temp_ramp", value, over_ticks: over });
});
$("alarm-rows").addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  const channel = target.dataset.ack;
  if (channel !== undefined) {
    void send({ kind: "ack_alarm", channel });
  }
});

void consume();
requestAnimationFrame(loop);
