import init, { windowFit, compareVariants, earthCurves } from "./pkg/insnav_demo.js";

const $ = (id) => document.getElementById(id);
const numbers = (text) => text.split(",").map((s) => s.trim()).filter((s) => s !== "").map(Number);

function plot(canvas, series, { points = [] } = {}) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const pad = 50;
  ctx.clearRect(0, 0, width, height);
  const all = series.flatMap((s) => s.data).concat(points);
  if (all.length === 0) return;
  const xs = all.map((p) => p[0]);
  const ys = all.map((p) => p[1]);
  let [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + Math.abs(y0) * 1e-6 + 1e-12;
  const sx = (x) => pad + ((x - x0) / (x1 - x0)) * (width - 2 * pad);
  const sy = (y) => height - pad / 2 - ((y - y0) / (y1 - y0)) * (height - pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad / 2, width - 2 * pad, height - pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(y1.toPrecision(6), 2, pad / 2 + 10);
  ctx.fillText(y0.toPrecision(6), 2, height - pad / 2);
  ctx.fillText(x0.toPrecision(4), pad, height - 4);
  ctx.fillText(x1.toPrecision(4), width - pad - 30, height - 4);
  series.forEach((s, i) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.data.forEach(([x, y], k) => (k ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, width - pad - 140, pad / 2 + 14 + 14 * i);
  });
  ctx.fillStyle = "#000";
  points.forEach(([x, y]) => {
    ctx.beginPath();
    ctx.arc(sx(x), sy(y), 3.5, 0, 2 * Math.PI);
    ctx.fill();
  });
}

function guard(out, f) {
  out.classList.remove("error");
  try {
    f();
  } catch (e) {
    out.classList.add("error");
    out.textContent = String(e.message ?? e);
  }
}

function runWindow() {
  const out = $("w-out");
  guard(out, () => {
    const times = numbers($("w-times").value);
    const pos = numbers($("w-pos").value);
    const r = windowFit(new Float64Array(times), new Float64Array(pos), Number($("w-sigma").value));
    const m = times.length;
    const [a, v, p, sa] = r;
    const weights = Array.from(r.slice(4, 4 + m));
    const resid = Array.from(r.slice(4 + m));
    out.textContent =
      `acceleration ${a.toFixed(4)} m/s²  (1-sigma ${sa.toFixed(3)} m/s²)\n` +
      `velocity at t0 ${v.toFixed(4)} m/s, position at t0 ${p.toFixed(4)} m\n` +
      `weights B: ${weights.map((b) => b.toFixed(4)).join(", ")}\n` +
      `residuals: ${resid.map((x) => x.toExponential(2)).join(", ")}`;
    const t0 = times[0];
    const span = times[m - 1] - t0;
    const curve = [];
    for (let k = 0; k <= 100; k++) {
      const dt = -0.1 * span + (1.2 * span * k) / 100;
      curve.push([t0 + dt, p + v * dt + 0.5 * a * dt * dt]);
    }
    plot($("w-plot"), [{ label: "fitted quadratic", color: "#1565c0", data: curve }], {
      points: times.map((t, i) => [t, pos[i]]),
    });
  });
}

function runCompare() {
  const out = $("c-out");
  out.textContent = "running...";
  setTimeout(() =>
    guard(out, () => {
      const r = compareVariants(
        $("c-profile").value,
        Number($("c-duration").value),
        Number($("c-seed").value) >>> 0,
        Number($("c-bias").value),
        Number($("c-sigma").value),
      );
      const n = r[5];
      const base = [];
      const aided = [];
      for (let k = 0; k < n; k++) {
        const t = r[6 + 3 * k];
        base.push([t, r[7 + 3 * k]]);
        aided.push([t, r[8 + 3 * k]]);
      }
      out.textContent =
        `PRMSE baseline ${r[0].toFixed(3)} m, accel-aided ${r[1].toFixed(3)} m, improvement ${r[2].toFixed(2)} %\n` +
        `terminal accel-bias error: baseline ${r[3].toExponential(2)}, accel-aided ${r[4].toExponential(2)} m/s²`;
      plot($("c-plot"), [
        { label: "baseline |error| [m]", color: "#c62828", data: base },
        { label: "accel-aided |error| [m]", color: "#2e7d32", data: aided },
      ]);
    }),
  );
}

function runEarth() {
  const out = $("e-out");
  guard(out, () => {
    const col = Number($("e-quantity").value);
    const rows = earthCurves(-89, 89, 179, Number($("e-height").value));
    const data = [];
    for (let k = 0; k < rows.length; k += 6) data.push([rows[k], rows[k + col]]);
    const label = $("e-quantity").selectedOptions[0].text;
    const eq = data[89][1];
    const pole = data[data.length - 1][1];
    out.textContent = `${label}: equator ${eq.toPrecision(8)}, latitude 89° ${pole.toPrecision(8)}`;
    plot($("e-plot"), [{ label, color: "#6a1b9a", data }]);
  });
}

await init();
$("w-run").addEventListener("click", runWindow);
$("c-run").addEventListener("click", runCompare);
$("e-height").addEventListener("input", runEarth);
$("e-quantity").addEventListener("change", runEarth);
runWindow();
runEarth();
