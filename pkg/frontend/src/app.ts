/**
 * Browser entry point: wires the session client to a canvas network view,
 * a timing bar panel, and the control form. Rendering runs on
 * requestAnimationFrame and draws only when a mailbox holds a fresh
 * frame, so a burst of networks coalesces to the latest one.
 */

import { SessionClient, type SocketLike } from "./client.js";
import { buildScene, buildTimingBars } from "./render.js";
import type { ControlMessage } from "./types.js";

const METRICS = [
  "COR", "XCOR", "COHY", "COH", "IMAGCOHY",
  "PLV", "PLI", "USPLI", "WPLI", "DSWPLI",
];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function toast(text: string): void {
  const box = el<HTMLDivElement>("toasts");
  const item = document.createElement("div");
  item.className = "toast";
  item.textContent = text;
  box.appendChild(item);
  setTimeout(() => item.remove(), 4000);
}

export function start(): void {
  const canvas = el<HTMLCanvasElement>("network");
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("no 2d context");

  const url =
    new URLSearchParams(location.search).get("ws") ??
    `ws://${location.hostname}:7651/ws`;
  const client = new SessionClient({
    socketFactory: (u) => new WebSocket(u) as unknown as SocketLike,
  });
  client.onstate = (s) => {
    el("status").textContent = s;
    el("status").className = `status ${s}`;
  };
  client.connect(url);

  let fraction: number | null = null;
  el<HTMLInputElement>("threshold-slider").addEventListener("input", (ev) => {
    const v = Number((ev.target as HTMLInputElement).value);
    fraction = v >= 1 ? null : v;
    el("threshold-label").textContent =
      fraction === null ? "off" : `${Math.round(fraction * 100)}%`;
  });

  const metricSelect = el<HTMLSelectElement>("metric");
  for (const m of METRICS) {
    const opt = document.createElement("option");
    opt.value = m;
    opt.textContent = m;
    metricSelect.appendChild(opt);
  }

  // Ack-gated controls: the UI label changes only after an accepted ack.
  const send = (msg: ControlMessage, onAccept: () => void) => {
    client
      .sendControl(msg)
      .then((ack) => {
        if (ack.accepted) onAccept();
        else toast(`${msg.type} rejected: ${ack.reason}`);
      })
      .catch((err) => toast(String(err)));
  };
  metricSelect.addEventListener("change", () => {
    const value = metricSelect.value;
    send({ type: "set_metric", value }, () =>
      toast(`metric -> ${value}`),
    );
  });
  el<HTMLFormElement>("band-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const lo = Number(el<HTMLInputElement>("band-lo").value);
    const hi = Number(el<HTMLInputElement>("band-hi").value);
    send({ type: "set_band", lo, hi }, () => toast(`band -> ${lo}:${hi}`));
  });
  el<HTMLButtonElement>("reset").addEventListener("click", () => {
    send({ type: "reset_accumulators" }, () => toast("accumulators reset"));
  });

  const draw = () => {
    const net = client.networks.take();
    if (net !== null) {
      const scene = buildScene(net, { thresholdFraction: fraction });
      el("metric-label").textContent =
        `${scene.metric} | ${scene.bandLabel} | trial ${scene.nTrials}`;
      const { width: w, height: h } = canvas;
      ctx.clearRect(0, 0, w, h);
      const px = (x: number) => 30 + x * (w - 60);
      const py = (y: number) => 30 + y * (h - 60);
      for (const e of scene.edges) {
        ctx.strokeStyle = e.weight >= 0 ? "#4a90d9" : "#d94a4a";
        ctx.lineWidth = 0.5 + 5 * e.width;
        ctx.beginPath();
        ctx.moveTo(px(e.x1), py(e.y1));
        ctx.lineTo(px(e.x2), py(e.y2));
        ctx.stroke();
      }
      ctx.fillStyle = "#e8e8e8";
      for (const n of scene.nodes) {
        ctx.beginPath();
        ctx.arc(px(n.x), py(n.y), 3 + 9 * n.r, 0, 2 * Math.PI);
        ctx.fill();
      }
    }
    const tm = client.timings.take();
    if (tm !== null) {
      const rows = buildTimingBars(tm)
        .map(
          (b) =>
            `<div class="bar-row"><span>${b.stage}</span>` +
            `<div class="bar${b.overBudget ? " over" : ""}" ` +
            `style="width:${(b.fill * 100).toFixed(1)}%"></div>` +
            `<span>${b.ms.toFixed(1)} ms</span></div>`,
        )
        .join("");
      el("timing").innerHTML =
        `<div class="budget">budget ${tm.budget_ms.toFixed(0)} ms</div>${rows}`;
    }
    el("stale").hidden = !client.stale;
    requestAnimationFrame(draw);
  };
  requestAnimationFrame(draw);
}

if (typeof document !== "undefined") start();
