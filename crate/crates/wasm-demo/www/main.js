import init, { bump_profile, distortion_profile, lusin_graph } from "./pkg/fdcurve_wasm.js";

const $ = (id) => document.getElementById(id);

// columns of a flat interleaved array
function columns(flat, width) {
  const cols = Array.from({ length: width }, () => []);
  for (let i = 0; i < flat.length; i++) cols[i % width].push(flat[i]);
  return cols;
}

function extent(vals) {
  const f = vals.filter(Number.isFinite);
  let lo = Math.min(...f), hi = Math.max(...f);
  if (lo === hi) { lo -= 1; hi += 1; }
  return [lo, hi];
}

function plot(canvas, xs, series, box) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  const [x0, x1] = box ? box.x : extent(xs);
  const [y0, y1] = box ? box.y : extent(series.flatMap((s) => s.ys));
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.fillText(x0.toPrecision(3), pad, h - 10);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - 10);
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    let pen = false;
    s.ys.forEach((y, i) => {
      if (!Number.isFinite(y)) { pen = false; return; }
      const X = px(s.xs ? s.xs[i] : xs[i]), Y = py(y);
      pen ? ctx.lineTo(X, Y) : ctx.moveTo(X, Y);
      pen = true;
    });
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function guarded(errId, f) {
  return () => {
    $(errId).textContent = "";
    try { f(); } catch (e) { $(errId).textContent = String(e.message || e); }
  };
}

const drawBump = guarded("bump-err", () => {
  const [lvl, u, margin] = columns(bump_profile(Number($("bump-depth").value), 600), 3);
  plot($("bump"), lvl, [
    { ys: u, color: "#1f5fbf" },
    { ys: margin, color: "#d9822b" },
  ]);
});

const drawDist = guarded("dist-err", () => {
  const [t, k, kref] = columns(distortion_profile($("dist-map").value, 400), 3);
  plot($("dist"), t, [
    { ys: k, color: "#1f5fbf" },
    { ys: kref, color: "#d9822b", dash: [5, 4] },
  ]);
});

const drawLusin = guarded("lusin-err", () => {
  const flat = lusin_graph(Number($("lusin-depth").value), Number($("lusin-eps").value), 4001);
  const [, , g1, g2] = columns(flat, 4);
  plot($("lusin"), [], [{ xs: g1, ys: g2, color: "#1f5fbf" }], { x: [-1, 1], y: [-1, 1] });
});

await init();
$("bump-go").onclick = drawBump;
$("dist-go").onclick = drawDist;
$("lusin-go").onclick = drawLusin;
drawBump();
drawDist();
drawLusin();
