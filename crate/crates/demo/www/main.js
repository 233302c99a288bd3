import init, { iouExplorer, varianceCurves, verifyEditLoop } from "./pkg/metaverify_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// IoU explorer: 100x100 grid drawn at 3px per unit.
const GRID = 100;
const iouCanvas = $("iou-canvas");
const scale = iouCanvas.width / GRID;
let pred = [30, 30, 70, 70];
let drag = null;

function gridPos(ev) {
  const r = iouCanvas.getBoundingClientRect();
  const clamp = (v) => Math.max(0, Math.min(GRID, Math.round(v / scale)));
  return [clamp(ev.clientX - r.left), clamp(ev.clientY - r.top)];
}

function drawIou() {
  const ctx = iouCanvas.getContext("2d");
  const gt = [num("gx1"), num("gy1"), num("gx2"), num("gy2")];
  ctx.clearRect(0, 0, iouCanvas.width, iouCanvas.height);
  const box = (b, color) => {
    ctx.fillStyle = color + "33";
    ctx.strokeStyle = color;
    ctx.fillRect(b[0] * scale, b[1] * scale, (b[2] - b[0]) * scale, (b[3] - b[1]) * scale);
    ctx.strokeRect(b[0] * scale, b[1] * scale, (b[2] - b[0]) * scale, (b[3] - b[1]) * scale);
  };
  box(gt, "#2a2");
  box(pred, "#23c");
  try {
    const v = JSON.parse(iouExplorer(...pred, ...gt, num("thr")));
    $("iou-out").textContent =
      `pred  [${pred.join(", ")}]\ngt    [${gt.join(", ")}]\n\n` +
      `IoU              ${v.num}/${v.den} = ${v.iou.toFixed(4)}\n` +
      `meta continuous  ${v.meta_continuous.toFixed(4)}\n` +
      `meta gated       ${v.meta_gated}\n` +
      `joint total (correct False verdict)  ${v.joint_false}`;
  } catch (e) {
    $("iou-out").textContent = String(e);
  }
}

iouCanvas.addEventListener("mousedown", (ev) => { drag = gridPos(ev); });
iouCanvas.addEventListener("mousemove", (ev) => {
  if (!drag) return;
  const [x, y] = gridPos(ev);
  const b = [Math.min(drag[0], x), Math.min(drag[1], y), Math.max(drag[0], x), Math.max(drag[1], y)];
  if (b[2] > b[0] && b[3] > b[1]) {
    pred = b;
    drawIou();
  }
});
window.addEventListener("mouseup", () => { drag = null; });
for (const id of ["gx1", "gy1", "gx2", "gy2", "thr"]) $(id).addEventListener("input", drawIou);

// Variance and SNR against p.
function plot(canvas, title, series, dots) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 36;
  ctx.clearRect(0, 0, W, H);
  const ys = series.flatMap((s) => s.ys).concat(dots.map((d) => d.y)).filter(Number.isFinite);
  const ymax = Math.max(...ys) * 1.05 || 1;
  const X = (p) => pad + p * (W - 2 * pad);
  const Y = (y) => H - pad - (y / ymax) * (H - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad); ctx.lineTo(pad, H - pad); ctx.lineTo(W - pad, H - pad);
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.fillText(title, pad, pad - 12);
  ctx.fillText("p", W - pad + 6, H - pad + 4);
  ctx.fillText("0", pad - 4, H - pad + 14);
  ctx.fillText("1", W - pad - 2, H - pad + 14);
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.ps.forEach((p, i) => (i ? ctx.lineTo(X(p), Y(s.ys[i])) : ctx.moveTo(X(p), Y(s.ys[i]))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.name, W - pad - 80, pad + 14 * series.indexOf(s));
  }
  ctx.fillStyle = "#c22";
  for (const d of dots) {
    ctx.beginPath();
    ctx.arc(X(d.p), Y(d.y), 3.5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawVariance() {
  $("var-err").textContent = "";
  let v;
  try {
    v = JSON.parse(varianceCurves(num("mu"), num("var"), num("nsamp"), num("vseed")));
  } catch (e) {
    $("var-err").textContent = String(e);
    return;
  }
  const ps = v.curve.map((c) => c.p);
  plot($("var-canvas"), "Var of gradient estimator", [
    { name: "joint", color: "#23c", ps, ys: v.curve.map((c) => c.var_joint) },
    { name: "decoupled", color: "#2a2", ps, ys: v.curve.map((c) => c.var_dec) },
  ], v.simulated.map((s) => ({ p: s.p, y: s.var_joint })));
  plot($("snr-canvas"), "SNR", [
    { name: "joint", color: "#23c", ps, ys: v.curve.map((c) => c.snr_joint) },
    { name: "decoupled", color: "#2a2", ps, ys: v.curve.map((c) => c.snr_dec) },
  ], v.simulated.map((s) => ({ p: s.p, y: s.snr_joint })));
}

$("vrun").addEventListener("click", drawVariance);

// Verify-edit loop.
function sceneCanvas(scene, caption, highlight) {
  const size = 180;
  const wrap = document.createElement("figure");
  wrap.style.margin = "0";
  const c = document.createElement("canvas");
  c.width = c.height = size;
  const ctx = c.getContext("2d");
  const s = size / scene.canvas;
  for (const o of scene.objects) {
    const [x1, y1, x2, y2] = o.region;
    ctx.fillStyle = o.color;
    ctx.globalAlpha = 0.6;
    ctx.fillRect(x1 * s, y1 * s, (x2 - x1) * s, (y2 - y1) * s);
    ctx.globalAlpha = 1;
    ctx.strokeStyle = "#333";
    ctx.strokeRect(x1 * s, y1 * s, (x2 - x1) * s, (y2 - y1) * s);
    ctx.fillStyle = "#000";
    ctx.fillText(o.category, x1 * s + 2, y1 * s + 10);
  }
  ctx.setLineDash([4, 3]);
  ctx.strokeStyle = "#d00";
  ctx.lineWidth = 2;
  for (const [x1, y1, x2, y2] of highlight) ctx.strokeRect(x1 * s, y1 * s, (x2 - x1) * s, (y2 - y1) * s);
  const cap = document.createElement("figcaption");
  cap.textContent = caption;
  wrap.append(c, cap);
  return wrap;
}

function runLoop() {
  $("loop-err").textContent = "";
  $("loop-frames").replaceChildren();
  $("loop-log").replaceChildren();
  let v;
  try {
    v = JSON.parse(verifyEditLoop(num("lidx"), num("lk"), num("lfid"), num("lseed"), num("lmax")));
  } catch (e) {
    $("loop-err").textContent = String(e);
    return;
  }
  const st = v.state;
  $("loop-prompt").textContent = `Prompt: ${st.prompt}`;
  let scene = st.initial;
  let edits = 0;
  st.history.forEach((h, i) => {
    $("loop-frames").append(sceneCanvas(scene, `round ${i}: ${v.violations[edits]} violations`, h.action.spatial));
    const li = document.createElement("li");
    li.textContent = h.action.judgment === "True"
      ? "True: accepted"
      : "False: " + h.action.semantic.map((a) => a.instruction).join("; ");
    $("loop-log").append(li);
    if (h.edited) {
      scene = h.edited;
      edits += 1;
    }
  });
  if (st.status !== "Accepted") {
    $("loop-frames").append(sceneCanvas(scene, `final: ${v.violations[edits]} violations`, []));
  }
  const li = document.createElement("li");
  li.textContent = `${st.status} after ${st.step} edit rounds`;
  $("loop-log").append(li);
}

$("lrun").addEventListener("click", runLoop);

await init();
drawIou();
drawVariance();
runLoop();
