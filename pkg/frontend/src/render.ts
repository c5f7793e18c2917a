// Stateless rendering of the five panels from one session state:
// (a) tile-size visualization, (b) dependency graph, (c) loop-nest blocks
// with insertion arrows, (d) instruction + current cost, (e) cost detail,
// plus the tile-range panel that only exists in that phase.

import type {
  BlockNode,
  Cost,
  NestNode,
  OptionDoc,
  SessionState,
} from "./types";

export interface Handlers {
  onChoose(optionId: string): void;
  onTile(rangeX: number, rangeY: number): void;
  onUndo(): void;
}

const SVG = "http://www.w3.org/2000/svg";

export function formatCost(v: number): string {
  if (v >= 1e9) return `${(v / 1e9).toFixed(2)}G`;
  if (v >= 1e6) return `${(v / 1e6).toFixed(2)}M`;
  if (v >= 1e3) return `${(v / 1e3).toFixed(1)}k`;
  return `${Math.round(v * 10) / 10}`;
}

// Options display a small normalized cost (total scaled by the decade of
// the largest option) so rows read like "Cost: 9"; exact totals live in
// the tooltips.
export function normalizedCost(total: number, maxTotal: number): string {
  if (maxTotal <= 0) return "0";
  const scale = Math.pow(10, Math.floor(Math.log10(maxTotal)));
  return (total / scale).toFixed(1);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function funcColors(state: SessionState): Map<string, string> {
  const colors = new Map<string, string>();
  for (const entry of state.tile_viz) colors.set(entry.func, entry.color);
  return colors;
}

// -- (a) tile sizes ----------------------------------------------------------

const MAX_EDGE = 150;
const LOG_ASPECT = 50;

function renderTiles(state: SessionState, root: HTMLElement): void {
  root.replaceChildren(el("h2", "panel-title", "Tile sizes"));
  const maxDim = Math.max(
    1,
    ...state.tile_viz.map((e) => Math.max(e.width, e.height)),
  );
  for (const entry of state.tile_viz) {
    const item = el("div", "tile-entry");
    item.dataset.block = entry.block_id;
    let w = (entry.width / maxDim) * MAX_EDGE;
    let h = (entry.height / maxDim) * MAX_EDGE;
    // keep extreme tiles like 32x1 visible by flattening the aspect ratio
    const aspect = Math.max(w / Math.max(h, 1e-9), h / Math.max(w, 1e-9));
    if (aspect > LOG_ASPECT) {
      const scale = Math.log10(aspect) * 8;
      w = Math.max(w, scale);
      h = Math.max(h, scale);
      item.classList.add("log-scaled");
    }
    const svg = document.createElementNS(SVG, "svg");
    svg.setAttribute("width", `${Math.max(w, 4) + 2}`);
    svg.setAttribute("height", `${Math.max(h, 4) + 2}`);
    const rect = document.createElementNS(SVG, "rect");
    rect.setAttribute("x", "1");
    rect.setAttribute("y", "1");
    rect.setAttribute("width", `${Math.max(w, 4)}`);
    rect.setAttribute("height", `${Math.max(h, 4)}`);
    rect.setAttribute("fill", entry.color);
    rect.setAttribute("stroke", "#333");
    const title = document.createElementNS(SVG, "title");
    title.textContent = `${entry.func}: ${entry.width}×${entry.height}`;
    rect.appendChild(title);
    svg.appendChild(rect);
    item.appendChild(svg);
    const markers = entry.markers.length ? ` [${entry.markers.join(", ")}]` : "";
    item.appendChild(
      el("span", "tile-label", `${entry.func} ${entry.width}×${entry.height}${markers}`),
    );
    item.style.marginLeft = `${entry.depth * 14}px`;
    root.appendChild(item);
  }
}

// -- (b) dependency graph ----------------------------------------------------

function renderGraph(state: SessionState, root: HTMLElement): void {
  root.replaceChildren(el("h2", "panel-title", "Dependency graph"));
  const { nodes, edges } = state.dependency_graph;
  const depth = new Map<string, number>();
  const inbound = (name: string) => edges.filter((e) => e.dst === name);
  const resolve = (name: string): number => {
    if (depth.has(name)) return depth.get(name)!;
    depth.set(name, 0); // cycle guard; pipelines are acyclic anyway
    const d = Math.max(0, ...inbound(name).map((e) => resolve(e.src) + 1));
    depth.set(name, d);
    return d;
  };
  nodes.forEach((n) => resolve(n.name));

  const colW = 108;
  const rowH = 44;
  const perColumn = new Map<number, number>();
  const pos = new Map<string, { x: number; y: number }>();
  for (const n of nodes) {
    const d = depth.get(n.name)!;
    const row = perColumn.get(d) ?? 0;
    perColumn.set(d, row + 1);
    pos.set(n.name, { x: 12 + d * colW, y: 12 + row * rowH });
  }
  const width = 24 + colW * (Math.max(...[...perColumn.keys()]) + 1);
  const height = 24 + rowH * Math.max(...[...perColumn.values()]);

  const svg = document.createElementNS(SVG, "svg");
  svg.setAttribute("width", `${width}`);
  svg.setAttribute("height", `${height}`);
  for (const e of edges) {
    const a = pos.get(e.src)!;
    const b = pos.get(e.dst)!;
    const line = document.createElementNS(SVG, "line");
    line.setAttribute("x1", `${a.x + 84}`);
    line.setAttribute("y1", `${a.y + 14}`);
    line.setAttribute("x2", `${b.x}`);
    line.setAttribute("y2", `${b.y + 14}`);
    line.setAttribute("stroke", "#888");
    line.setAttribute("marker-end", "url(#arrowhead)");
    svg.appendChild(line);
  }
  const defs = document.createElementNS(SVG, "defs");
  defs.innerHTML =
    '<marker id="arrowhead" markerWidth="8" markerHeight="6" refX="8" refY="3" orient="auto">' +
    '<polygon points="0 0, 8 3, 0 6" fill="#888"/></marker>';
  svg.appendChild(defs);
  for (const n of nodes) {
    const p = pos.get(n.name)!;
    const g = document.createElementNS(SVG, "g");
    g.classList.add("gnode");
    if (n.highlighted) g.classList.add("highlighted");
    g.dataset.func = n.name;
    const rect = document.createElementNS(SVG, "rect");
    rect.setAttribute("x", `${p.x}`);
    rect.setAttribute("y", `${p.y}`);
    rect.setAttribute("width", "84");
    rect.setAttribute("height", "28");
    rect.setAttribute("rx", "5");
    rect.setAttribute("fill", n.highlighted ? "#e15759" : "#f2f2f2");
    rect.setAttribute("stroke", "#555");
    const label = document.createElementNS(SVG, "text");
    label.setAttribute("x", `${p.x + 42}`);
    label.setAttribute("y", `${p.y + 18}`);
    label.setAttribute("text-anchor", "middle");
    if (n.highlighted) label.setAttribute("fill", "#fff");
    label.textContent = n.name;
    g.appendChild(rect);
    g.appendChild(label);
    svg.appendChild(g);
  }
  root.appendChild(svg);
}

// -- (c) loop nest with insertion arrows -------------------------------------

function arrowButton(
  option: OptionDoc,
  maxTotal: number,
  handlers: Handlers,
): HTMLElement {
  const btn = el(
    "button",
    "arrow",
    `➤ here   Cost: ${normalizedCost(option.cost.total, maxTotal)}`,
  );
  btn.dataset.option = option.option_id;
  btn.title = `${option.description}\ntotal ${option.cost.total}`;
  btn.addEventListener("click", () => handlers.onChoose(option.option_id));
  return btn;
}

function renderNest(
  state: SessionState,
  root: HTMLElement,
  handlers: Handlers,
): void {
  root.replaceChildren(el("h2", "panel-title", "Schedule"));
  const colors = funcColors(state);
  const locationOptions = state.options.filter((o) => o.kind === "location");
  const maxTotal = Math.max(0, ...locationOptions.map((o) => o.cost.total));
  const byPath = new Map<string, OptionDoc[]>();
  for (const o of locationOptions) {
    if (!o.position) continue;
    const key = o.position.path.join("/");
    const list = byPath.get(key) ?? [];
    list.push(o);
    byPath.set(key, list);
  }

  const inline = locationOptions.find((o) => !o.position);
  if (inline) {
    const btn = el(
      "button",
      "inline-option",
      `inline   Cost: ${normalizedCost(inline.cost.total, maxTotal)}`,
    );
    btn.dataset.option = inline.option_id;
    btn.title = `total ${inline.cost.total}`;
    btn.addEventListener("click", () => handlers.onChoose(inline.option_id));
    root.appendChild(btn);
  }

  const renderBody = (
    nodes: NestNode[],
    path: string[],
    parent: HTMLElement,
  ): void => {
    const slotOptions = byPath.get(path.join("/")) ?? [];
    nodes.forEach((node, i) => {
      for (const o of slotOptions) {
        if (o.position!.index === i || (path.length === 0 && o.position!.index === null)) {
          parent.appendChild(arrowButton(o, maxTotal, handlers));
        }
      }
      if (node.kind === "stmt") {
        const dims = Object.keys(node.region).join(", ");
        parent.appendChild(
          el("div", "stmt", `${node.func}(${dims}) = …`),
        );
        return;
      }
      const block = renderBlock(node, path, colors);
      parent.appendChild(block);
    });
    for (const o of slotOptions) {
      if (o.position!.index === nodes.length) {
        parent.appendChild(arrowButton(o, maxTotal, handlers));
      }
    }
  };

  const renderBlock = (
    node: BlockNode,
    path: string[],
    colorMap: Map<string, string>,
  ): HTMLElement => {
    const div = el("div", `block level-${node.level}`);
    div.dataset.block = node.id;
    div.style.borderLeftColor = colorMap.get(node.func) ?? "#999";
    for (const loop of node.loops) {
      div.appendChild(
        el("div", "loop-line", `for ${loop.var} in 0..${loop.extent - 1}`),
      );
    }
    for (const marker of node.markers) {
      div.appendChild(el("span", `badge badge-${marker}`, marker));
    }
    const body = el("div", "body");
    renderBody(node.body, [...path, node.id], body);
    div.appendChild(body);
    return div;
  };

  const top = el("div", "nest");
  renderBody(state.loop_nest, [], top);
  root.appendChild(top);
}

// -- (d) instruction, (e) cost detail ----------------------------------------

function renderInstruction(state: SessionState, root: HTMLElement): void {
  root.replaceChildren(el("h2", "panel-title", "Instruction"));
  const line = el("p", "instruction-text");
  const name = state.highlighted_func;
  if (name && state.instruction.includes(`Func ${name}`)) {
    const [before, after] = state.instruction.split(`Func ${name}`);
    line.appendChild(document.createTextNode(`${before}Func `));
    line.appendChild(el("span", "func-name", name));
    line.appendChild(document.createTextNode(after));
  } else {
    line.textContent = state.instruction;
  }
  root.appendChild(line);
  root.appendChild(
    el(
      "p",
      "current-cost",
      `Current cost: ${formatCost(state.current_cost.total)}`,
    ),
  );
}

function renderCost(cost: Cost, root: HTMLElement): void {
  root.replaceChildren(el("h2", "panel-title", "Cost estimation"));
  const table = el("table", "cost-table");
  for (const key of ["total", "load", "store", "compute"] as const) {
    const row = el("tr", `cost-${key}`);
    row.appendChild(el("td", "", key));
    row.appendChild(el("td", "num", formatCost(cost[key])));
    table.appendChild(row);
  }
  root.appendChild(table);
}

// -- tile-range panel ---------------------------------------------------------

function renderTilePanel(
  state: SessionState,
  root: HTMLElement,
  handlers: Handlers,
): void {
  if (state.phase !== "tile_range") {
    root.replaceChildren();
    root.hidden = true;
    return;
  }
  root.hidden = false;
  root.replaceChildren(el("h2", "panel-title", "Tile range"));
  const maxTile = Math.max(0, ...state.options.map((o) => o.cost.total));
  for (const o of state.options) {
    if (o.kind !== "tile" || !o.ranges) continue;
    const btn = el(
      "button",
      "suggestion",
      `x ${o.ranges[0]}  y ${o.ranges[1]}   Cost: ${normalizedCost(o.cost.total, maxTile)}`,
    );
    btn.dataset.option = o.option_id;
    btn.title = `${o.description}\ntotal ${o.cost.total}`;
    btn.addEventListener("click", () => handlers.onChoose(o.option_id));
    root.appendChild(btn);
  }
  const form = el("div", "custom-tile");
  const x = el("input");
  x.id = "custom-x";
  x.type = "number";
  x.placeholder = "range x";
  const y = el("input");
  y.id = "custom-y";
  y.type = "number";
  y.placeholder = "range y";
  const go = el("button", "", "Apply custom range");
  go.id = "custom-submit";
  go.addEventListener("click", () =>
    handlers.onTile(Number(x.value || "0"), Number(y.value || "1")),
  );
  form.append(x, y, go);
  root.appendChild(form);
}

// -- top level -----------------------------------------------------------------

export function render(
  state: SessionState,
  root: HTMLElement,
  handlers: Handlers,
  pending = false,
): void {
  try {
    renderTiles(state, panel(root, "panel-tiles"));
    renderGraph(state, panel(root, "panel-graph"));
    renderNest(state, panel(root, "panel-nest"), handlers);
    renderInstruction(state, panel(root, "panel-instruction"));
    renderCost(state.current_cost, panel(root, "panel-cost"));
    renderTilePanel(state, panel(root, "panel-tilerange"), handlers);
  } catch (exc) {
    const banner = panel(root, "banner");
    banner.hidden = false;
    banner.textContent = `render error: ${exc}`;
    return;
  }
  const frozen = pending || state.done;
  root
    .querySelectorAll<HTMLButtonElement | HTMLInputElement>("button, input")
    .forEach((b) => {
      if (b.id !== "undo") b.disabled = frozen;
      else b.disabled = pending;
    });
}

function panel(root: HTMLElement, id: string): HTMLElement {
  let node = root.querySelector<HTMLElement>(`#${id}`);
  if (!node) {
    node = document.createElement("section");
    node.id = id;
    root.appendChild(node);
  }
  return node;
}
