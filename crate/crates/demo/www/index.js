import init, { classify, HeatmapDemo, planted_dependence } from "./pkg/noisemap_demo.js";

const $ = (id) => document.getElementById(id);

function hexToRgb(hex) {
  const n = parseInt(hex.slice(1), 16);
  return [(n >> 16) & 255, (n >> 8) & 255, n & 255];
}

function runClassify() {
  const [r, g, b] = hexToRgb($("color").value);
  let result;
  try {
    result = JSON.parse(classify($("palette").value, r, g, b, Number($("threshold").value)));
  } catch (e) {
    $("verdict").textContent = e.message;
    return;
  }
  $("verdict").textContent =
    result.noise_db === null ? "No band within the threshold: the pixel is dropped." : `Classified as ${result.noise_db} dB.`;
  const rows = result.bands.map((band) => {
    const hit = result.noise_db === (band.low_db + band.high_db) / 2;
    const [br, bg, bb] = band.color;
    return `<tr class="${hit ? "hit" : ""}"><td><span class="swatch" style="background: rgb(${br},${bg},${bb})"></span></td>` +
      `<td>${band.low_db}–${band.high_db} dB</td><td>ΔE ${band.delta_e.toFixed(2)}</td></tr>`;
  });
  $("bands").innerHTML = rows.join("");
}

function runHeatmap() {
  const canvas = $("hm-canvas");
  try {
    const demo = new HeatmapDemo($("palette").value, canvas.width, canvas.height, BigInt($("hm-seed").value), $("hm-blend").checked);
    const image = new ImageData(new Uint8ClampedArray(demo.rgba()), demo.width(), demo.height());
    canvas.getContext("2d").putImageData(image, 0, 0);
    $("hm-stats").textContent = JSON.stringify(JSON.parse(demo.stats()), null, 2);
    demo.free();
  } catch (e) {
    $("hm-stats").textContent = e.message;
  }
}

function drawCurve(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  const m = 40;
  const [w, h] = [canvas.width - 2 * m, canvas.height - 2 * m];
  const span = (v) => [Math.min(...v), Math.max(...v) > Math.min(...v) ? Math.max(...v) : Math.min(...v) + 1];
  const [x0, x1] = span(xs);
  const [y0, y1] = span(ys);
  const px = (x) => m + ((x - x0) / (x1 - x0)) * w;
  const py = (y) => m + h - ((y - y0) / (y1 - y0)) * h;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#444";
  ctx.strokeRect(m, m, w, h);
  ctx.fillStyle = "#444";
  ctx.fillText(`${x0.toFixed(1)} dB`, m, canvas.height - 12);
  ctx.fillText(`${x1.toFixed(1)} dB`, m + w - 40, canvas.height - 12);
  ctx.fillText(`${Math.round(y1)} €`, 2, m + 4);
  ctx.fillText(`${Math.round(y0)} €`, 2, m + h);
  ctx.strokeStyle = "#1f77b4";
  ctx.beginPath();
  xs.forEach((x, i) => (i === 0 ? ctx.moveTo(px(x), py(ys[i])) : ctx.lineTo(px(x), py(ys[i]))));
  ctx.stroke();
}

function runDependence() {
  try {
    const beta = Number($("pd-beta").value);
    const curve = JSON.parse(planted_dependence(BigInt($("pd-seed").value), beta, Number($("pd-rows").value)));
    drawCurve($("pd-canvas"), curve.grid, curve.mean_prediction);
    $("pd-summary").textContent =
      `Planted ${beta} €/dB; the partial-dependence curve has a least-squares slope of ${curve.fitted_slope.toFixed(1)} €/dB.`;
  } catch (e) {
    $("pd-summary").textContent = e.message;
  }
}

await init();
for (const id of ["palette", "color", "threshold"]) $(id).addEventListener("input", runClassify);
$("hm-run").addEventListener("click", runHeatmap);
$("pd-run").addEventListener("click", runDependence);
runClassify();
runHeatmap();
