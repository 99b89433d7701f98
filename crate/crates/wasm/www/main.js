import init, { Workbench } from "./pkg/journey_wasm.js";

const $ = (id) => document.getElementById(id);
const palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];
let wb;
let map = null;
let draft = [];
let cfItems = null;

const metric = () => [$("w1").value, $("w2").value, $("w3").value, $("kernel").value];

function call(f, target) {
  try {
    return JSON.parse(f());
  } catch (e) {
    target.innerHTML = `<span class="error">${e}</span>`;
    return null;
  }
}

function project(map, canvas) {
  const pad = 20;
  const xs = map.xy.map((p) => p[0]), ys = map.xy.map((p) => p[1]);
  const [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  const s = (canvas.width - 2 * pad) / Math.max(x1 - x0, y1 - y0, 1e-9);
  return map.xy.map(([x, y]) => [pad + (x - x0) * s, canvas.height - pad - (y - y0) * s]);
}

function drawMap() {
  map = call(() => wb.clusterMap(+$("k").value, ...metric(), 0), $("mapinfo"));
  if (!map) return;
  const canvas = $("map"), ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  map.pixels = project(map, canvas);
  map.pixels.forEach(([x, y], i) => {
    ctx.fillStyle = palette[map.clusters[i] % palette.length];
    ctx.beginPath();
    if (map.outcomes[i] === 1) ctx.arc(x, y, 4, 0, 2 * Math.PI);
    else ctx.rect(x - 4, y - 4, 8, 8);
    ctx.fill();
    if (map.medoids.includes(i)) { ctx.lineWidth = 2; ctx.strokeStyle = "#000"; ctx.stroke(); }
  });
  const sc = map.silhouette == null ? "n/a" : map.silhouette.toFixed(3);
  $("mapinfo").textContent = `${map.config}: sizes ${map.sizes.join(", ")}; silhouette ${sc}`;
}

function hover(ev) {
  const tip = $("tip");
  if (!map) return;
  const r = ev.target.getBoundingClientRect();
  const [mx, my] = [ev.clientX - r.left, ev.clientY - r.top];
  const hit = map.pixels.findIndex(([x, y]) => Math.hypot(x - mx, y - my) < 6);
  if (hit < 0) { tip.style.display = "none"; return; }
  tip.textContent = `${map.ids[hit]} ${map.notations[hit]}`;
  Object.assign(tip.style, { display: "block", left: `${ev.pageX + 10}px`, top: `${ev.pageY + 10}px` });
}

function renderDraft() {
  $("draft").textContent = `[ ${draft.join(", ")} ]`;
  const next = call(() => wb.allowedNext(draft.join(",")), $("prediction")) || [];
  $("palette").replaceChildren(...next.map((item) => {
    const b = document.createElement("button");
    b.className = "item";
    b.textContent = item;
    b.onclick = () => { draft.push(item); renderDraft(); };
    return b;
  }));
  if (draft.length === 0) { $("prediction").textContent = "Add an item to start."; return; }
  const p = call(() => wb.predict(draft.join(","), +$("kprime").value, ...metric()), $("prediction"));
  if (!p) return;
  const near = p.neighbors.map((n) => `${n.id} (d=${n.distance}, ${n.label === 1 ? "bought" : "left"})`).join(", ");
  $("prediction").innerHTML = `ŷ = <b>${p.y_hat.toFixed(2)}</b> → ${p.label === 1 ? "purchase" : "no purchase"}<br><small>${near}</small>`;
}

function explain() {
  const out = $("cf");
  const lambda = Number($("lambda").value);
  const r = call(() => wb.counterfactual(draft.join(","), +$("yobj").value, lambda, +$("kprime").value, ...metric()), out);
  if (!r) return;
  cfItems = r.counterfactual.items;
  const edits = r.narrative.length ? r.narrative.map((n) => `<li class="edit">${n}</li>`).join("") : "<li>no edits</li>";
  out.innerHTML = `
    <p>Nearest ${r.y_obj === 1 ? "buyer" : "non-buyer"}: <b>${r.counterfactual.id}</b> [${cfItems.join(", ")}]
    (distance ${r.distance}, objective ${r.objective.toFixed(2)})</p>
    <ol>${edits}</ol>
    ${r.warning ? `<p class="error">${r.warning}</p>` : ""}
    <button id="apply">Apply edits</button>`;
  $("apply").onclick = () => {
    draft = cfItems.filter((i) => !["i", "j", "k"].includes(i));
    renderDraft();
  };
}

async function main() {
  await init();
  wb = new Workbench();
  $("redraw").onclick = drawMap;
  $("map").onmousemove = hover;
  $("undo").onclick = () => { draft.pop(); renderDraft(); };
  $("clear").onclick = () => { draft = []; renderDraft(); };
  $("kprime").onchange = renderDraft;
  $("explain").onclick = explain;
  drawMap();
  renderDraft();
}

main();
