/**
 * DOM rendering for the coach panel: a pure function of the view state.
 *
 * Rebuilds the panel subtree on every state change; the editor inputs live
 * outside this subtree so focus is never disturbed. All numbers shown here
 * are formatted verbatim from service responses.
 */
import type { CoachViewState, HistoryPoint } from "./controller";

export interface ViewHandlers {
  onChip(toggle: string): void;
}

function el(tag: string, cls: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function pct(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

function sparkline(history: HistoryPoint[]): SVGElement | null {
  if (history.length < 2) return null;
  const w = 160;
  const h = 36;
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("width", String(w));
  svg.setAttribute("height", String(h));
  svg.setAttribute("class", "sparkline");
  const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
  const points = history
    .map((pt, i) => {
      const x = 2 + (i / (history.length - 1)) * (w - 4);
      const y = h - 2 - pt.probability * (h - 4);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "currentColor");
  line.setAttribute("stroke-width", "1.5");
  svg.appendChild(line);
  return svg;
}

export function renderCoach(
  root: HTMLElement,
  state: CoachViewState,
  handlers: ViewHandlers,
): void {
  root.textContent = "";

  if (state.error !== null) {
    const banner = el(
      "div",
      "banner",
      `service unavailable: ${state.error} (showing the last good score)`,
    );
    banner.dataset.test = "error-banner";
    root.appendChild(banner);
  }

  const gauge = el("div", "gauge");
  const value = el(
    "div",
    "gauge-value",
    state.gauge === null ? "--" : pct(state.gauge),
  );
  value.dataset.test = "gauge";
  if (state.pending) value.classList.add("pending");
  const bar = el("div", "gauge-bar");
  const fill = el("div", "gauge-fill");
  fill.style.width = state.gauge === null ? "0%" : pct(state.gauge);
  bar.appendChild(fill);
  gauge.appendChild(value);
  gauge.appendChild(bar);
  root.appendChild(gauge);

  const spark = sparkline(state.history);
  if (spark) root.appendChild(spark);

  if (state.suggestion !== null) {
    const sug = el("div", "suggestion", `Try it: ${state.suggestion}`);
    sug.dataset.test = "suggestion";
    root.appendChild(sug);
  }

  if (state.checklist.length > 0) {
    const ul = document.createElement("ul");
    ul.className = "checklist";
    ul.dataset.test = "checklist";
    for (const item of state.checklist) {
      const li = document.createElement("li");
      li.dataset.key = item.key;
      li.dataset.present = String(item.present);
      li.textContent = `${item.present ? "✓" : "✗"} ${item.label} (${item.detail})`;
      ul.appendChild(li);
    }
    root.appendChild(ul);
  }

  if (state.chips.length > 0) {
    const box = el("div", "chips");
    box.dataset.test = "chips";
    for (const chip of state.chips) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = "chip";
      button.dataset.toggle = chip.toggle;
      button.disabled = chip.disabled;
      const sign = chip.delta >= 0 ? "+" : "";
      button.textContent = `${chip.change} (${sign}${(chip.delta * 100).toFixed(1)}pp)`;
      button.addEventListener("click", () => handlers.onChip(chip.toggle));
      box.appendChild(button);
    }
    root.appendChild(box);
  }
}
