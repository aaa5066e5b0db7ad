import init, { check_leslie, Demo, solve_equilibrium_demo } from "./pkg/nemel_web.js";

const $ = (id) => document.getElementById(id);
const DEFAULT_ALPHAS = [0.1, -0.8, 0.1, 1.0, 1.0, 0.3];

let demo = null;
let running = false;
let energies = [];

function alphas() {
  return Float64Array.from(DEFAULT_ALPHAS.map((_, i) => Number($(`a${i + 1}`).value)));
}

function checkCoefficients() {
  try {
    const v = check_leslie(alphas());
    const delta = Number.isNaN(v.delta) ? "undefined" : v.delta.toPrecision(6);
    $("validity").textContent =
      `${v.valid ? "valid" : "invalid"}, Parodi ${v.parodi ? "holds" : "does not hold"}\n` +
      `γ1 = ${v.gamma1.toPrecision(6)}, γ2 = ${v.gamma2.toPrecision(6)}, δ = ${delta}` +
      (v.violations ? `\nviolated: ${v.violations}` : "");
  } catch (e) {
    $("validity").textContent = String(e);
  }
}

// Diverging blue-white-red for signed fields, grey ramp otherwise.
function colour(x, lo, hi, signed) {
  if (signed) {
    const m = Math.max(Math.abs(lo), Math.abs(hi)) || 1;
    const t = x / m;
    return t >= 0 ? [255, 255 * (1 - t), 255 * (1 - t)] : [255 * (1 + t), 255 * (1 + t), 255];
  }
  const t = hi > lo ? (x - lo) / (hi - lo) : 0;
  return [255 * t, 255 * t, 255 * t];
}

function draw(values, n) {
  const canvas = $("view");
  canvas.width = n;
  canvas.height = n;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  let lo = Infinity, hi = -Infinity;
  for (const v of values) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const signed = $("field").value !== "speed";
  for (let j = 0; j < n; j++) {
    for (let i = 0; i < n; i++) {
      // row 0 of the field is the bottom of the domain
      const [r, g, b] = colour(values[j * n + i], lo, hi, signed);
      const p = 4 * ((n - 1 - j) * n + i);
      img.data.set([r, g, b, 255], p);
    }
  }
  ctx.putImageData(img, 0, 0);
}

function plotEnergy() {
  const c = $("energy");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  if (energies.length < 2) return;
  const lo = Math.min(...energies), hi = Math.max(...energies);
  const span = hi - lo || 1;
  ctx.beginPath();
  energies.forEach((e, k) => {
    const x = (k / (energies.length - 1)) * (c.width - 10) + 5;
    const y = c.height - 5 - ((e - lo) / span) * (c.height - 10);
    k ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
  });
  ctx.stroke();
  ctx.fillText(`E ${hi.toExponential(3)}`, 8, 12);
  ctx.fillText(`E ${lo.toExponential(3)}`, 8, c.height - 8);
}

function show() {
  if (!demo) return;
  draw(demo[$("field").value](), demo.size());
  plotEnergy();
  $("status").textContent =
    `step ${demo.step_count()}, t = ${demo.time().toExponential(4)}, ` +
    `E = ${demo.energy().toExponential(6)}, residual ${demo.residual().toExponential(3)}`;
}

function reset() {
  running = false;
  $("run").textContent = "Run";
  try {
    demo?.free();
    demo = new Demo(Number($("n").value), $("preset").value, Number($("eps").value), Number($("mass").value));
    energies = [demo.energy()];
    show();
  } catch (e) {
    demo = null;
    $("status").textContent = String(e);
  }
}

function tick() {
  if (!running || !demo) return;
  try {
    demo.advance(10);
    energies.push(demo.energy());
    show();
    requestAnimationFrame(tick);
  } catch (e) {
    running = false;
    $("run").textContent = "Run";
    $("status").textContent = String(e);
  }
}

function toggleRun() {
  if (!demo) reset();
  running = !running;
  $("run").textContent = running ? "Pause" : "Run";
  if (running) requestAnimationFrame(tick);
}

function equilibrium() {
  running = false;
  $("run").textContent = "Run";
  const n = Number($("n").value);
  try {
    const t0 = performance.now();
    const eq = solve_equilibrium_demo(n, Number($("eps").value), Number($("mass").value));
    const field = $("field").value === "potential" ? eq.phi : eq.angle;
    draw(field, n);
    $("status").textContent =
      `equilibrium: ${eq.iterations} iterations, residual ${eq.residual.toExponential(3)}, ` +
      `${(performance.now() - t0).toFixed(0)} ms (showing ${$("field").value === "potential" ? "potential" : "director angle"})`;
  } catch (e) {
    $("status").textContent = String(e);
  }
}

await init();
DEFAULT_ALPHAS.forEach((a, i) => {
  const label = document.createElement("label");
  label.innerHTML = `α<sub>${i + 1}</sub> <input id="a${i + 1}" type="number" step="0.1" value="${a}"> `;
  $("alphas").append(label);
});
$("check").onclick = checkCoefficients;
$("reset").onclick = reset;
$("run").onclick = toggleRun;
$("equilibrium").onclick = equilibrium;
$("field").onchange = show;
checkCoefficients();
reset();
