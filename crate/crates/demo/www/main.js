import init, { supportFunction, radiusCurve, actorTrace } from "./pkg/rcmdp_demo.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

function numbers(text) {
  return text.split(",").map((s) => Number(s.trim()));
}

function show(id, text, error = false) {
  const el = $(id);
  el.textContent = text;
  el.className = error ? "out err" : "out";
}

function axes(ctx, w, h, pad, xmin, xmax, ymin, ymax) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  ctx.fillText(ymin.toPrecision(3), 2, h - pad);
  ctx.fillText(String(xmin), pad, h - pad + 14);
  ctx.fillText(String(xmax), w - pad - 20, h - pad + 14);
  const sx = (x) => pad + ((x - xmin) / (xmax - xmin || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - ymin) / (ymax - ymin || 1)) * (h - 2 * pad);
  return [sx, sy];
}

function lines(canvas, series, xs) {
  const ctx = canvas.getContext("2d");
  const all = series.flatMap((s) => s.ys).filter((y) => y !== null && Number.isFinite(y));
  const [ymin, ymax] = [Math.min(...all), Math.max(...all)];
  const [sx, sy] = axes(ctx, canvas.width, canvas.height, 40, xs[0], xs[xs.length - 1], ymin, ymax);
  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    let pen = false;
    s.ys.forEach((y, i) => {
      if (y === null || !Number.isFinite(y)) {
        pen = false;
        return;
      }
      pen ? ctx.lineTo(sx(xs[i]), sy(y)) : ctx.moveTo(sx(xs[i]), sy(y));
      pen = true;
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label, canvas.width - 180, 16 + 14 * k);
  });
}

function bars(canvas, groups, labels) {
  const ctx = canvas.getContext("2d");
  const n = groups[0].length;
  const [, sy] = axes(ctx, canvas.width, canvas.height, 40, 0, n, 0, 1);
  const slot = (canvas.width - 80) / n;
  const width = slot / (groups.length + 1);
  groups.forEach((g, k) => {
    ctx.fillStyle = COLORS[k];
    g.forEach((p, i) => {
      const x = 40 + i * slot + k * width + width / 2;
      ctx.fillRect(x, sy(p), width - 2, sy(0) - sy(p));
    });
    ctx.fillText(labels[k], canvas.width - 180, 16 + 14 * k);
  });
}

function supportPanel() {
  try {
    const req = {
      kind: $("sf-kind").value,
      radius: Number($("sf-radius").value),
      nominal: numbers($("sf-nominal").value),
      v: numbers($("sf-v").value),
    };
    const res = JSON.parse(supportFunction(JSON.stringify(req)));
    bars($("sf-canvas"), [req.nominal, res.worst_row], ["nominal", "worst case"]);
    show(
      "sf-out",
      `sigma = ${res.sigma.toFixed(6)}   nominal p.V = ${res.nominal_value.toFixed(6)}   ` +
        `distance = ${res.distance.toFixed(6)}\nworst row = [${res.worst_row.map((x) => x.toFixed(4)).join(", ")}]`,
    );
  } catch (e) {
    show("sf-out", String(e), true);
  }
}

function radiusPanel() {
  try {
    const max = Number($("rc-max").value);
    const n = Number($("rc-n").value);
    const radii = Array.from({ length: n }, (_, i) => (max * i) / (n - 1));
    const res = JSON.parse(radiusCurve(JSON.stringify({ radii })));
    lines(
      $("rc-canvas"),
      res.curves.map((c) => ({ label: c.kind, ys: c.g })),
      radii,
    );
    show("rc-out", res.curves.map((c) => `${c.kind}: g(R=${max}) = ${c.g[n - 1]}`).join("\n"));
  } catch (e) {
    show("rc-out", String(e), true);
  }
}

function actorPanel() {
  try {
    const step = $("at-step").value.trim();
    const req = {
      kind: $("at-kind").value,
      radius: Number($("at-radius").value),
      threshold: Number($("at-b").value),
      iterations: Number($("at-iters").value),
      seed: Number($("at-seed").value),
    };
    if (step !== "") req.step = Number(step);
    const res = JSON.parse(actorTrace(JSON.stringify(req)));
    const ts = res.points.map((p) => p.t);
    lines(
      $("at-canvas"),
      [
        { label: "F (critic estimate)", ys: res.points.map((p) => p.f_hat) },
        { label: "F (exact)", ys: res.points.map((p) => p.f_exact) },
      ],
      ts,
    );
    show(
      "at-out",
      `lambda = ${res.lambda}   best iterate t = ${res.best_t}\n` +
        `returned policy g = [${res.g.map((x) => x.toFixed(4)).join(", ")}]   threshold = ${res.threshold}\n` +
        `policy = ${JSON.stringify(res.policy.map((r) => r.map((x) => +x.toFixed(3))))}`,
    );
  } catch (e) {
    show("at-out", String(e), true);
  }
}

await init();
$("sf-go").onclick = supportPanel;
$("rc-go").onclick = radiusPanel;
$("at-go").onclick = actorPanel;
supportPanel();
radiusPanel();
