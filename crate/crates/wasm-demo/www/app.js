import init, { lagProfile, entropyCurve, surrogateNull } from "./pkg/infoflow_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function run(outId, f) {
  const out = $(outId);
  out.classList.remove("err");
  try {
    f(out);
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

// Axes-free line and bar plotting on a 2d canvas.
function frame(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pad = 30;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys)];
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (canvas.width - 2 * pad);
  const sy = (y) => canvas.height - pad - ((y - y0) / (y1 - y0 || 1)) * (canvas.height - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, sy(0));
  ctx.lineTo(canvas.width - pad, sy(0));
  ctx.stroke();
  return { ctx, sx, sy };
}

function line(p, xs, ys, color) {
  p.ctx.strokeStyle = color;
  p.ctx.lineWidth = 2;
  p.ctx.beginPath();
  xs.forEach((x, i) => (i ? p.ctx.lineTo(p.sx(x), p.sy(ys[i])) : p.ctx.moveTo(p.sx(x), p.sy(ys[i]))));
  p.ctx.stroke();
}

function lagProfileRun() {
  run("lp-out", (out) => {
    const r = JSON.parse(lagProfile($("lp-kind").value, num("lp-n"), num("lp-seed"), num("lp-lag")));
    const [fwd, bwd] = r.directions;
    const all = [...fwd.te, ...bwd.te, ...fwd.gaussian_te, ...bwd.gaussian_te];
    const p = frame($("lp-canvas"), r.lags, all);
    line(p, r.lags, fwd.te, "#1f77b4");
    line(p, r.lags, bwd.te, "#ff7f0e");
    line(p, r.lags, fwd.gaussian_te, "#9ecae1");
    line(p, r.lags, bwd.gaussian_te, "#fdd0a2");
    const rows = r.lags.map((l, i) =>
      [l, fwd.te[i], bwd.te[i], fwd.linear_pvalue[i], bwd.linear_pvalue[i], r.net_te[i]]
        .map((v, j) => (j === 0 ? String(v) : v.toFixed(4)).padStart(j === 0 ? 3 : 12))
        .join(""));
    out.textContent =
      "blue/orange: kernel TE driver→target / target→driver; light: Gaussian TE\n" +
      "lag      TE(d→t)     TE(t→d)      p(d→t)      p(t→d)     net TE\n" +
      rows.join("\n");
  });
}

function entropyRun() {
  run("ec-out", (out) => {
    const r = JSON.parse(entropyCurve(num("ec-sigma"), num("ec-n"), num("ec-seed"), num("ec-scale")));
    const p = frame($("ec-canvas"), r.grid, [...r.estimate, ...r.truth]);
    line(p, r.grid, r.truth, "#999");
    line(p, r.grid, r.estimate, "#1f77b4");
    out.textContent =
      `bandwidth ${r.bandwidth.toFixed(4)}\n` +
      `exact entropy          ${r.exact.toFixed(4)} nats\n` +
      `leave-one-out estimate ${r.leave_one_out.toFixed(4)} (error ${(r.leave_one_out - r.exact).toFixed(4)})\n` +
      `resubstitution         ${r.resubstitution.toFixed(4)} (error ${(r.resubstitution - r.exact).toFixed(4)})`;
  });
}

function nullRun() {
  run("sn-out", (out) => {
    const r = JSON.parse(surrogateNull($("sn-kind").value, num("sn-n"), num("sn-seed"), num("sn-lag"), num("sn-perm"), $("sn-rev").checked));
    const canvas = $("sn-canvas");
    const centres = r.counts.map((_, i) => (r.bin_edges[i] + r.bin_edges[i + 1]) / 2);
    const p = frame(canvas, r.bin_edges, r.counts);
    const w = Math.max(1, p.sx(r.bin_edges[1]) - p.sx(r.bin_edges[0]) - 1);
    p.ctx.fillStyle = "#9ecae1";
    centres.forEach((c, i) => p.ctx.fillRect(p.sx(c) - w / 2, p.sy(r.counts[i]), w, p.sy(0) - p.sy(r.counts[i])));
    p.ctx.strokeStyle = "#d62728";
    p.ctx.lineWidth = 2;
    p.ctx.beginPath();
    p.ctx.moveTo(p.sx(r.observed), p.sy(0));
    p.ctx.lineTo(p.sx(r.observed), 10);
    p.ctx.stroke();
    out.textContent =
      `observed TE ${r.observed.toFixed(5)} (red)\n` +
      `p-value     ${r.pvalue.toFixed(4)} (smallest attainable ${r.min_pvalue.toFixed(4)})`;
  });
}

await init();
$("lp-run").onclick = lagProfileRun;
$("sn-run").onclick = nullRun;
for (const id of ["ec-sigma", "ec-n", "ec-scale", "ec-seed"]) $(id).oninput = entropyRun;
lagProfileRun();
entropyRun();
