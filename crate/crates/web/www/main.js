import init, { switching_profile, solve, singularity } from "./pkg/handsoff_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function frame(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const finite = ys.filter(Number.isFinite);
  let lo = Math.min(...finite), hi = Math.max(...finite);
  if (!(hi > lo)) { lo -= 1; hi += 1; }
  const pad = 0.08 * (hi - lo);
  lo -= pad; hi += pad;
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const sx = (x) => 40 + (x - x0) / (x1 - x0 || 1) * (w - 50);
  const sy = (y) => h - 20 - (y - lo) / (hi - lo) * (h - 30);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(40, 10, w - 50, h - 30);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toFixed(2), 2, 18);
  ctx.fillText(lo.toFixed(2), 2, h - 20);
  ctx.fillText(x0.toFixed(2), 40, h - 5);
  ctx.fillText(x1.toFixed(2), w - 40, h - 5);
  return { ctx, sx, sy };
}

function line(f, xs, ys, color, dashed = false) {
  const { ctx, sx, sy } = f;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.6;
  ctx.setLineDash(dashed ? [6, 4] : []);
  ctx.beginPath();
  let pen = false;
  xs.forEach((x, i) => {
    const y = ys[i];
    if (y === null || !Number.isFinite(y)) { pen = false; return; }
    pen ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y));
    pen = true;
  });
  ctx.stroke();
  ctx.setLineDash([]);
}

function steps(control) {
  const xs = [], ys = [];
  control.values.forEach((v, k) => {
    xs.push(control.breakpoints[k], control.breakpoints[k + 1]);
    ys.push(v, v);
  });
  return [xs, ys];
}

function drawSwitching() {
  $("sw-p1-v").textContent = num("sw-p1").toFixed(2);
  $("sw-p2-v").textContent = num("sw-p2").toFixed(2);
  const r = JSON.parse(switching_profile(num("sw-p1"), num("sw-p2"), $("sw-eta").checked ? 1 : 0, num("sw-T"), 401));
  if (!r.ok) return;
  const f = frame($("sw-plot"), r.t, [...r.s, 1.1, -1.1]);
  r.tie.forEach((tie, i) => {
    if (tie) {
      f.ctx.fillStyle = "rgba(44,160,44,0.15)";
      f.ctx.fillRect(f.sx(r.t[i]) - 1, 10, 2, $("sw-plot").height - 30);
    }
  });
  line(f, [r.t[0], r.t.at(-1)], [1, 1], "#999", true);
  line(f, [r.t[0], r.t.at(-1)], [-1, -1], "#999", true);
  line(f, r.t, r.s, "#1f77b4");
  line(f, r.t, r.u, "#d62728");
}

function runSolve() {
  $("so-out").textContent = "solving…";
  setTimeout(() => {
    const r = JSON.parse(solve(num("so-x1"), num("so-x2"), num("so-T"), Math.round(num("so-N"))));
    if (!r.ok) { $("so-out").textContent = "error: " + r.error; return; }
    const [x0, y0] = steps(r.l0.control);
    const [x1, y1] = steps(r.l1.control);
    const fu = frame($("so-u"), [...x0, ...x1], [...y0, ...y1]);
    line(fu, x1, y1, "#d62728", true);
    line(fu, x0, y0, "#1f77b4");
    const a = r.l0.trajectory, b = r.l1.trajectory;
    const fz = frame($("so-z"), [...a.t, ...b.t], [...a.z1, ...a.z2, ...b.z1, ...b.z2]);
    line(fz, b.t, b.z1, "#1f77b4", true);
    line(fz, b.t, b.z2, "#d62728", true);
    line(fz, a.t, a.z1, "#1f77b4");
    line(fz, a.t, a.z2, "#d62728");
    const lines = [
      `L0 support ${r.l0.support.toFixed(6)}  structure ${r.l0.structure}  breakpoints ${r.l0.control.breakpoints.map((t) => t.toFixed(4)).join(", ")}`,
      `   certified ${r.l0.certified}${r.l0.p_hat ? `  η = ${r.l0.eta}, p̂ = (${r.l0.p_hat.map((p) => p.toFixed(4)).join(", ")})` : ""}`,
      `L1 cost ${r.l1.cost.toFixed(6)}  support of returned control ${r.l1.support.toFixed(4)}`,
    ];
    if (r.witness) lines.push(`   another L1-optimal control: cost ${r.witness.cost.toFixed(6)}, support ${r.witness.support.toFixed(4)}`);
    $("so-out").textContent = lines.join("\n");
  }, 10);
}

function runSingularity() {
  const r = JSON.parse(singularity(num("sg-x1"), num("sg-x2"), num("sg-T")));
  $("sg-out").textContent = [
    `ξ₁ > ξ₂²/2            ${r.above_parabola}`,
    `ξ₂ < 0                ${r.negative_velocity}`,
    `−ξ₂/2 − ξ₁/ξ₂ ≥ T     ${r.horizon_short}   (bound ${r.horizon_bound.toFixed(6)})`,
    `singular              ${r.singular}`,
  ].join("\n");
}

await init();
for (const id of ["sw-p1", "sw-p2", "sw-T", "sw-eta"]) $(id).addEventListener("input", drawSwitching);
for (const id of ["sg-x1", "sg-x2", "sg-T"]) $(id).addEventListener("input", runSingularity);
$("so-run").addEventListener("click", runSolve);
drawSwitching();
runSingularity();
runSolve();
