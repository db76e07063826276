import init, { Explorer } from "./pkg/embdiff_wasm.js";

const $ = (id) => document.getElementById(id);

// diverging red-yellow-blue, low score = red
const STOPS = [
  [0.0, [215, 48, 39]],
  [0.25, [252, 141, 89]],
  [0.5, [255, 255, 191]],
  [0.75, [145, 191, 219]],
  [1.0, [69, 117, 180]],
];

function color(t) {
  t = Math.min(1, Math.max(0, t));
  for (let i = 1; i < STOPS.length; i++) {
    const [t1, c1] = STOPS[i];
    const [t0, c0] = STOPS[i - 1];
    if (t <= t1) {
      const f = (t - t0) / (t1 - t0);
      const c = c0.map((v, j) => Math.round(v + f * (c1[j] - v)));
      return `rgb(${c[0]},${c[1]},${c[2]})`;
    }
  }
  return "rgb(69,117,180)";
}

const state = {
  explorer: null,
  compare: null,
  projections: [null, null],
  range: null, // [lo, hi] from the histogram brush
  active: null, // open domino
};

function status(msg) {
  $("status").textContent = msg || "";
}

function guard(fn) {
  try {
    status("");
    fn();
  } catch (e) {
    status(String(e));
  }
}

function scaler(coords, size, pad = 10) {
  let [x0, x1, y0, y1] = [Infinity, -Infinity, Infinity, -Infinity];
  for (const [x, y] of coords) {
    x0 = Math.min(x0, x); x1 = Math.max(x1, x);
    y0 = Math.min(y0, y); y1 = Math.max(y1, y);
  }
  const s = (size - 2 * pad) / Math.max(x1 - x0, y1 - y0, 1e-12);
  return ([x, y]) => [pad + (x - x0) * s, size - pad - (y - y0) * s];
}

function drawProjection(which) {
  const canvas = $(which === 0 ? "plot-a" : "plot-b");
  const ctx = canvas.getContext("2d");
  const coords = state.projections[which].coords;
  const scores = state.compare.scores;
  const map = scaler(coords, canvas.width);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const dim = state.active !== null;
  coords.forEach((c, i) => {
    const [x, y] = map(c);
    ctx.globalAlpha = dim ? 0.15 : 0.85;
    ctx.fillStyle = color(scores[i]);
    ctx.fillRect(x - 2, y - 2, 4, 4);
  });
  ctx.globalAlpha = 1;
  if (dim) {
    const d = state.active;
    const plot = which === 0 ? d.plot_a : d.plot_b;
    const common = new Set(d.common.map((c) => c.index));
    for (const p of plot.neighbors) {
      const [x, y] = map([p.x, p.y]);
      ctx.fillStyle = common.has(p.index) ? "#333" : which === 0 ? "#6a3d9a" : "#1b9e77";
      ctx.beginPath();
      ctx.arc(x, y, 3.5, 0, 2 * Math.PI);
      ctx.fill();
    }
    const [x, y] = map(plot.object);
    ctx.strokeStyle = "#000";
    ctx.lineWidth = 2;
    ctx.strokeRect(x - 5, y - 5, 10, 10);
  }
}

function drawHistogram() {
  const canvas = $("hist");
  const ctx = canvas.getContext("2d");
  const bins = state.compare.histogram;
  const max = Math.max(...bins.map((b) => b.count), 1);
  const w = canvas.width / bins.length;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  bins.forEach((b, i) => {
    const h = ((canvas.height - 14) * b.count) / max;
    ctx.fillStyle = color((b.lower + b.upper) / 2);
    ctx.fillRect(i * w + 1, canvas.height - 14 - h, w - 2, h);
  });
  ctx.fillStyle = "#555";
  ctx.fillText("0", 0, canvas.height - 2);
  ctx.fillText("1", canvas.width - 6, canvas.height - 2);
  if (state.range) {
    const [lo, hi] = state.range;
    ctx.fillStyle = "rgba(0,0,0,0.12)";
    ctx.fillRect(lo * canvas.width, 0, (hi - lo) * canvas.width, canvas.height - 14);
  }
}

function list(items, cls, dist) {
  return `<div class="${cls}">${items.map((n) => `${n.token} <small>${dist(n).toFixed(3)}</small>`).join("<br>")}</div>`;
}

function renderColumn(id, order) {
  const [lo, hi] = state.range || [1, 0];
  const page = JSON.parse(state.explorer.dominoes(order, lo, hi, undefined, 20));
  const el = $(id);
  el.innerHTML = page.items
    .map(
      (d) => `<div class="domino${state.active && state.active.index === d.index ? " active" : ""}" data-index="${d.index}">
        <h4>${d.object} <small>${d.score.toFixed(3)}</small></h4>
        <div class="lists">${list(d.common, "common", (n) => n.distance_a)}${list(d.unique_a, "only-a", (n) => n.distance)}${list(
          d.unique_b,
          "only-b",
          (n) => n.distance,
        )}</div></div>`,
    )
    .join("") + `<small>${page.items.length} of ${page.total}</small>`;
  for (const node of el.querySelectorAll(".domino")) {
    node.onclick = () => guard(() => toggleDomino(Number(node.dataset.index)));
  }
}

function renderAll() {
  drawProjection(0);
  drawProjection(1);
  drawHistogram();
  renderColumn("least", "least");
  renderColumn("most", "most");
}

function toggleDomino(index) {
  state.active = state.active && state.active.index === index ? null : JSON.parse(state.explorer.domino(index));
  renderAll();
}

function recompute() {
  const k = Number($("k").value);
  $("k-label").textContent = k;
  state.compare = JSON.parse(state.explorer.compare(k, $("metric").value));
  if (state.active) state.active = JSON.parse(state.explorer.domino(state.active.index));
  $("summary").textContent = `${state.compare.tokens.length} objects`;
  renderAll();
}

function adopt(explorer) {
  state.explorer = explorer;
  state.projections = [0, 1].map((i) => JSON.parse(explorer.projection(i)));
  state.range = null;
  state.active = null;
  const kMax = explorer.k_max();
  $("k").max = kMax;
  if (Number($("k").value) > kMax) $("k").value = kMax;
  recompute();
}

function brush() {
  const canvas = $("hist");
  let start = null;
  const at = (e) => Math.min(1, Math.max(0, (e.clientX - canvas.getBoundingClientRect().left) / canvas.width));
  canvas.onmousedown = (e) => (start = at(e));
  canvas.onmousemove = (e) => {
    if (start === null) return;
    const x = at(e);
    state.range = [Math.min(start, x), Math.max(start, x)];
    drawHistogram();
  };
  window.addEventListener("mouseup", () => {
    if (start === null) return;
    start = null;
    if (state.range && state.range[1] - state.range[0] < 0.005) state.range = null;
    guard(renderAll);
  });
}

await init();
$("generate").onclick = () =>
  guard(() => adopt(Explorer.synthetic(Number($("seed").value), Number($("n").value), Number($("dim").value), Number($("moved").value))));
$("load").onclick = () => guard(() => adopt(Explorer.from_text($("text-a").value, $("text-b").value)));
$("k").oninput = () => guard(recompute);
$("metric").onchange = () => guard(recompute);
$("clear").onclick = () => {
  state.range = null;
  state.active = null;
  guard(renderAll);
};
brush();
$("generate").click();
