import init, { prior_null_probability, analyze_scenario, roc_demo } from "./pkg/dmmt_wasm.js";

const SCENARIOS = [
  "1d-local-shift", "1d-local-dispersion", "1d-global-shift", "1d-global-dispersion",
  "2d-local-shift", "2d-local-dispersion", "2d-global-shift", "2d-global-dispersion",
];
const C1 = "rgba(230, 120, 20, 0.75)";
const C2 = "rgba(20, 150, 140, 0.75)";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function showError(el, e) {
  el.textContent = String(e.message ?? e);
  el.classList.add("error");
}

function clearError(el) {
  el.classList.remove("error");
}

// --- prior null ---------------------------------------------------------

function updatePrior() {
  for (const id of ["p-beta", "p-gamma", "p-cap"]) $(id + "-v").textContent = $(id).value;
  const out = $("p-out");
  try {
    const v = prior_null_probability(num("p-beta"), num("p-gamma"), num("p-cap"));
    clearError(out);
    out.textContent = v.toFixed(4);
  } catch (e) {
    showError(out, e);
  }
}

// --- analysis -----------------------------------------------------------

function extent(points, j) {
  let lo = Infinity, hi = -Infinity;
  for (const p of points) { lo = Math.min(lo, p[j]); hi = Math.max(hi, p[j]); }
  return [lo, hi];
}

function blue(t) {
  const l = 95 - 60 * Math.max(0, Math.min(1, t));
  return `hsl(215, 70%, ${l}%)`;
}

function draw1d(ctx, res, w, h) {
  const all = res.group1.concat(res.group2);
  const [lo, hi] = extent(all, 0);
  const x = (v) => 40 + ((v - lo) / (hi - lo)) * (w - 60);
  const histH = 170, bins = 80;
  const counts = [new Array(bins).fill(0), new Array(bins).fill(0)];
  [res.group1, res.group2].forEach((g, t) => {
    for (const p of g) counts[t][Math.min(bins - 1, Math.floor(((p[0] - lo) / (hi - lo)) * bins))]++;
  });
  const peak = Math.max(...counts[0], ...counts[1]);
  const bw = (w - 60) / bins;
  counts.forEach((c, t) => {
    ctx.fillStyle = t === 0 ? C1 : C2;
    c.forEach((n, i) => {
      const bh = (n / peak) * (histH - 10);
      ctx.fillRect(40 + i * bw + (t ? bw / 2 : 0), histH - bh, bw / 2, bh);
    });
  });

  const maxLevel = Math.max(...res.regions.map((r) => r.level));
  const rowH = Math.min(22, (h - histH - 30) / (maxLevel + 1));
  ctx.font = "11px system-ui";
  for (const r of res.regions) {
    const [[a, b]] = r.bounds;
    const y = histH + 20 + r.level * rowH;
    ctx.fillStyle = blue(r.rho_star[0]);
    ctx.fillRect(x(a), y, x(b) - x(a), rowH - 2);
    if (r.key === res.top_region) {
      ctx.strokeStyle = "#c00";
      ctx.lineWidth = 2;
      ctx.strokeRect(x(a), y, x(b) - x(a), rowH - 2);
    }
  }
  ctx.fillStyle = "#555";
  for (let k = 0; k <= maxLevel; k++) ctx.fillText(String(k), 10, histH + 20 + k * rowH + rowH * 0.7);
}

function draw2d(ctx, res, w, h) {
  const all = res.group1.concat(res.group2);
  const [x0, x1] = extent(all, 0), [y0, y1] = extent(all, 1);
  const s = Math.min((w - 40) / (x1 - x0), (h - 40) / (y1 - y0));
  const X = (v) => 20 + (v - x0) * s;
  const Y = (v) => h - 20 - (v - y0) * s;
  const maxEffect = Math.max(1e-9, ...res.regions.map((r) => r.effect_size));
  for (const r of res.regions) {
    const [[a, b], [c, d]] = r.bounds;
    if (r.rho_star[0] > res.delta_star) {
      ctx.fillStyle = `rgba(200, 30, 30, ${0.08 + 0.4 * (r.effect_size / maxEffect)})`;
      ctx.fillRect(X(a), Y(d), (b - a) * s, (d - c) * s);
    }
    ctx.strokeStyle = r.stopped ? "#999" : "#ccc";
    ctx.lineWidth = r.key === res.top_region ? 2.5 : 0.7;
    if (r.key === res.top_region) ctx.strokeStyle = "#c00";
    ctx.strokeRect(X(a), Y(d), (b - a) * s, (d - c) * s);
  }
  [res.group1, res.group2].forEach((g, t) => {
    ctx.fillStyle = t === 0 ? C1 : C2;
    for (const p of g) ctx.fillRect(X(p[0]) - 1.2, Y(p[1]) - 1.2, 2.4, 2.4);
  });
}

function runAnalysis() {
  const out = $("a-out");
  const canvas = $("a-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  try {
    const res = JSON.parse(analyze_scenario(
      $("a-scenario").value, num("a-seed"), num("a-beta"), num("a-gamma"), num("a-delta"),
    ));
    clearError(out);
    out.textContent = res.prob_null.toPrecision(4);
    const top = res.regions.find((r) => r.key === res.top_region);
    $("a-top").textContent = top
      ? ` — largest differential region ${top.bounds.map(([a, b]) => `[${a.toFixed(3)}, ${b.toFixed(3)})`).join(" × ")}, effect size ${top.effect_size.toFixed(2)}`
      : " — no region exceeds the divide threshold";
    (res.dims === 1 ? draw1d : draw2d)(ctx, res, canvas.width, canvas.height);
  } catch (e) {
    showError(out, e);
    $("a-top").textContent = "";
  }
}

// --- ROC ----------------------------------------------------------------

function runRoc() {
  const out = $("r-out");
  const canvas = $("r-canvas");
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, m = 30;
  ctx.clearRect(0, 0, w, h);
  out.textContent = "running…";
  // let the label repaint before the synchronous run
  setTimeout(() => {
    try {
      const res = JSON.parse(roc_demo($("r-scenario").value, num("r-reps"), num("r-seed")));
      clearError(out);
      out.textContent = res.auc.toFixed(3);
      ctx.strokeStyle = "#bbb";
      ctx.strokeRect(m, m, w - 2 * m, h - 2 * m);
      ctx.beginPath();
      ctx.moveTo(m, h - m);
      ctx.lineTo(w - m, m);
      ctx.setLineDash([4, 4]);
      ctx.stroke();
      ctx.setLineDash([]);
      ctx.strokeStyle = "#1565c0";
      ctx.lineWidth = 2;
      ctx.beginPath();
      res.curve.forEach(([fpr, tpr], i) => {
        const px = m + fpr * (w - 2 * m), py = h - m - tpr * (h - 2 * m);
        i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
      });
      ctx.stroke();
      ctx.lineWidth = 1;
      ctx.fillStyle = "#555";
      ctx.font = "12px system-ui";
      ctx.fillText("false positive rate", w / 2 - 50, h - 8);
      ctx.save();
      ctx.translate(12, h / 2 + 45);
      ctx.rotate(-Math.PI / 2);
      ctx.fillText("true positive rate", 0, 0);
      ctx.restore();
    } catch (e) {
      showError(out, e);
    }
  }, 10);
}

// --- wiring -------------------------------------------------------------

await init();
for (const sel of [$("a-scenario"), $("r-scenario")]) {
  for (const id of SCENARIOS) sel.add(new Option(id, id));
}
$("r-scenario").value = "1d-global-shift";
for (const id of ["p-beta", "p-gamma", "p-cap"]) $(id).addEventListener("input", updatePrior);
$("a-run").addEventListener("click", runAnalysis);
$("a-scenario").addEventListener("change", runAnalysis);
$("r-run").addEventListener("click", runRoc);
updatePrior();
runAnalysis();
