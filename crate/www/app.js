import init, { kljn_session, ber_curve, bb84_run } from "./pkg/noisekey_wasm.js";

const CLASS_COLORS = { low: "#5b8dd9", mid: "#d9a441", high: "#d95b5b" };
const $ = (id) => document.getElementById(id);

function sizeCanvas(canvas) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth;
  const h = parseInt(canvas.getAttribute("height"), 10);
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  ctx.clearRect(0, 0, w, h);
  return [ctx, w, h];
}

// ---------------------------------------------------------------- session

function drawWaveform(view) {
  const [ctx, w, h] = sizeCanvas($("s-wave"));
  const samples = view.waveform;
  const perBit = view.samples_per_bit;
  const intervals = view.waveform_intervals;
  const mid = h / 2;
  // +-4 sigma of the High class fills the height
  const scale = (h / 2 - 4) / (4 * Math.sqrt(view.sigma_high));
  const dx = w / samples.length;

  for (let k = 0; k < intervals; k++) {
    const iv = view.intervals[k];
    ctx.fillStyle = CLASS_COLORS[iv.class] + "22";
    ctx.fillRect(k * perBit * dx, 0, perBit * dx, h);
    if (iv.secure) {
      ctx.fillStyle = "#4fb47733";
      ctx.fillRect(k * perBit * dx, h - 6, perBit * dx, 6);
    }
    ctx.strokeStyle = CLASS_COLORS[iv.class];
    ctx.lineWidth = 1;
    ctx.beginPath();
    for (let i = 0; i < perBit; i++) {
      const idx = k * perBit + i;
      const x = idx * dx;
      const y = mid - samples[idx] * scale;
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    }
    ctx.stroke();
    ctx.fillStyle = "#8793a3";
    ctx.font = "11px ui-monospace, monospace";
    ctx.fillText(`${iv.alice_bit}${iv.bob_bit}`, k * perBit * dx + 4, 12);
  }
  ctx.strokeStyle = "#2a3442";
  ctx.beginPath();
  ctx.moveTo(0, mid);
  ctx.lineTo(w, mid);
  ctx.stroke();
}

function drawEstimates(view) {
  const [ctx, w, h] = sizeCanvas($("s-est"));
  const pad = { l: 46, r: 8, t: 8, b: 18 };
  const lo = Math.log10(0.3);
  const hi = Math.log10(Math.max(view.sigma_high * 3, 12));
  const X = (i) => pad.l + ((i + 0.5) / view.intervals.length) * (w - pad.l - pad.r);
  const Y = (v) => {
    const t = (Math.log10(Math.max(v, 1e-6)) - lo) / (hi - lo);
    return h - pad.b - t * (h - pad.t - pad.b);
  };

  // reference levels and thresholds
  const levels = [
    [1, "σ²₀₀", "#5b8dd9"],
    [view.sigma_mid, "σ²mid", "#d9a441"],
    [view.sigma_high, "σ²₁₁", "#d95b5b"],
  ];
  for (const [v, label, color] of levels) {
    ctx.strokeStyle = color + "55";
    ctx.setLineDash([2, 4]);
    ctx.beginPath();
    ctx.moveTo(pad.l, Y(v));
    ctx.lineTo(w - pad.r, Y(v));
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = color;
    ctx.font = "11px system-ui";
    ctx.fillText(label, 4, Y(v) + 4);
  }
  for (const [g, name] of [[view.gamma1, "γ₁"], [view.gamma2, "γ₂"]]) {
    ctx.strokeStyle = "#d7dde688";
    ctx.beginPath();
    ctx.moveTo(pad.l, Y(g));
    ctx.lineTo(w - pad.r, Y(g));
    ctx.stroke();
    ctx.fillStyle = "#d7dde6";
    ctx.fillText(name, 24, Y(g) + 4);
  }

  view.intervals.forEach((iv, i) => {
    const x = X(i);
    const y = Y(iv.est);
    ctx.fillStyle = CLASS_COLORS[iv.class];
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fill();
    if (iv.secure) {
      ctx.strokeStyle = "#4fb477";
      ctx.beginPath();
      ctx.arc(x, y, 6, 0, 2 * Math.PI);
      ctx.stroke();
    }
    if (!(iv.alice_correct && iv.bob_correct)) {
      ctx.strokeStyle = "#d95b5b";
      ctx.beginPath();
      ctx.moveTo(x - 5, y - 5); ctx.lineTo(x + 5, y + 5);
      ctx.moveTo(x - 5, y + 5); ctx.lineTo(x + 5, y - 5);
      ctx.stroke();
    }
  });
  ctx.fillStyle = "#8793a3";
  ctx.font = "11px system-ui";
  ctx.fillText("interval →", w - 70, h - 5);
}

function runSession() {
  const view = JSON.parse(kljn_session(
    parseFloat($("s-alpha").value),
    parseInt($("s-n").value, 10),
    parseInt($("s-bits").value, 10),
    parseFloat($("s-wire").value),
    $("s-mode").value,
    BigInt($("s-seed").value),
  ));
  drawWaveform(view);
  drawEstimates(view);
  const agree = view.keys_agree
    ? `<span class="agree">keys agree</span>`
    : `<span class="disagree">keys differ</span>`;
  $("s-read").innerHTML = `
    <span>secure fraction <b>${view.secure_fraction.toFixed(3)}</b></span>
    <span>detection errors <b>${view.detection_errors}</b></span>
    <span>${agree}</span>
    <span>Alice key <b class="key">${view.alice_key || "∅"}</b></span>
    <span>Bob key <b class="key">${view.bob_key || "∅"}</b></span>`;
}

// -------------------------------------------------------------- BER sweep

function drawBer(curve) {
  const [ctx, w, h] = sizeCanvas($("b-plot"));
  const pad = { l: 52, r: 14, t: 10, b: 28 };
  const pts = curve.points;
  const floor = 1 / (curve.trials * 2);
  const values = pts.flatMap((p) =>
    [p.measured, p.oracle ?? 1, p.joint_measured].filter((v) => v > 0));
  const lo = Math.floor(Math.log10(Math.max(Math.min(...values, 0.5), floor))) - 1;
  const hi = 0;
  const X = (n) => pad.l + (Math.log2(n / 8) / Math.log2(256 / 8)) * (w - pad.l - pad.r);
  const Y = (v) => {
    const t = (Math.log10(Math.max(v, 10 ** lo)) - lo) / (hi - lo);
    return h - pad.b - t * (h - pad.t - pad.b);
  };

  ctx.strokeStyle = "#2a3442";
  ctx.fillStyle = "#8793a3";
  ctx.font = "11px system-ui";
  for (let e = lo; e <= hi; e++) {
    ctx.beginPath();
    ctx.moveTo(pad.l, Y(10 ** e));
    ctx.lineTo(w - pad.r, Y(10 ** e));
    ctx.stroke();
    ctx.fillText(`1e${e}`, 8, Y(10 ** e) + 4);
  }
  for (const p of pts) {
    ctx.fillText(`${p.n_samples}`, X(p.n_samples) - 8, h - 8);
  }
  ctx.fillText("samples per bit N", w / 2 - 40, h - 8);

  // oracle line
  ctx.strokeStyle = "#8793a3";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  pts.forEach((p, i) => {
    if (p.oracle == null) return;
    const x = X(p.n_samples), y = Y(p.oracle);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();

  const dot = (x, y, color) => {
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(x, y, 4, 0, 2 * Math.PI);
    ctx.fill();
  };
  for (const p of pts) {
    if (p.measured > 0) dot(X(p.n_samples), Y(p.measured), "#58a6ff");
    if (p.joint_measured > 0) dot(X(p.n_samples), Y(p.joint_measured), "#4fb477");
  }
}

function runBer() {
  const curve = JSON.parse(ber_curve(
    parseFloat($("b-alpha").value),
    parseInt($("b-trials").value, 10),
    BigInt($("b-seed").value),
  ));
  drawBer(curve);
  const zeros = curve.points.filter((p) => p.joint_measured === 0).length;
  $("b-read").innerHTML = `
    <span>log error falls linearly in N — the exponential-decay signature</span>
    <span>joint detector at floor (0 errors) on <b>${zeros}</b>/${curve.points.length} points</span>`;
}

// ------------------------------------------------------------------ BB84

function runQkd() {
  const view = JSON.parse(bb84_run(
    parseInt($("q-slots").value, 10),
    $("q-attack").value,
    parseFloat($("q-mu").value),
    BigInt($("q-seed").value),
  ));
  $("q-read").innerHTML = `
    <span>QBER <b>${(view.qber * 100).toFixed(2)}%</b></span>
    <span>sift fraction <b>${view.sift_fraction.toFixed(3)}</b></span>
    <span>fraction known to Eve <b>${(view.eve_known_fraction * 100).toFixed(1)}%</b></span>
    <span>sifted bits <b>${view.sifted_bits}</b></span>
    <span>key preview <b class="key">${view.key_preview}…</b></span>`;
  const rows = view.slots.map((s, i) => `
    <tr>
      <td>${i + 1}</td>
      <td>${s.alice_bit}</td>
      <td>${s.alice_basis}</td>
      <td>${s.bob_basis}</td>
      <td>${s.bob_bit ?? "·"}</td>
      <td class="${s.sifted ? "sift" : ""}">${s.sifted ? "kept" : "—"}</td>
      <td class="${s.error ? "err" : ""}">${s.error ? "✗" : ""}</td>
      <td>${s.eve_known ? "●" : ""}</td>
    </tr>`).join("");
  $("q-table").innerHTML = `
    <tr><th>slot</th><th>Alice bit</th><th>Alice basis</th><th>Bob basis</th>
        <th>Bob bit</th><th>sift</th><th>error</th><th>Eve knows</th></tr>${rows}`;
}

// ------------------------------------------------------------------ init

init().then(() => {
  $("status").textContent = "ready — every run is reproducible from its seed";
  $("s-run").addEventListener("click", runSession);
  $("b-run").addEventListener("click", runBer);
  $("q-run").addEventListener("click", runQkd);
  runSession();
  runBer();
  runQkd();
}).catch((e) => {
  $("status").textContent = `failed to load wasm module: ${e}`;
});

window.addEventListener("resize", () => {
  // redraw with current inputs on resize
  runSession();
  runBer();
  runQkd();
});
