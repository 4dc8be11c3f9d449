/** Pure DOM builders. Every number shown on screen is copied from a service
 * payload field and also stored verbatim in a data-value attribute, so tests
 * (and curious users) can trace each pixel back to the JSON. */

import type { PredictionReport } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Context sentence with the compound token highlighted. */
export function sentenceView(tokens: string[], compoundIndex: number): HTMLElement {
  const root = el("p", "sentence");
  tokens.forEach((tok, i) => {
    const span = el("span", i === compoundIndex ? "token compound" : "token", tok);
    span.dataset.index = String(i);
    root.appendChild(span);
  });
  return root;
}

/** Horizontal confidence bars; widths are payload values scaled to percent. */
export function confidenceBars(confidence: Record<string, number>): HTMLElement {
  const root = el("div", "confidence-bars");
  for (const [label, value] of Object.entries(confidence)) {
    const row = el("div", "bar-row");
    row.appendChild(el("span", "bar-label", label));
    const track = el("div", "bar-track");
    const fill = el("div", "bar-fill");
    fill.style.width = `${value * 100}%`;
    fill.dataset.value = String(value);
    track.appendChild(fill);
    row.appendChild(track);
    const pct = el("span", "bar-value", `${(value * 100).toFixed(1)}%`);
    pct.dataset.value = String(value);
    row.appendChild(pct);
    root.appendChild(row);
  }
  return root;
}

/** One chip per token carrying its predicted tag. */
export function tagChips(tokens: string[], tags: string[]): HTMLElement {
  const root = el("div", "tag-chips");
  tokens.forEach((tok, i) => {
    const chip = el("span", "chip");
    chip.appendChild(el("span", "chip-token", tok));
    chip.appendChild(el("span", "chip-tag", tags[i]));
    root.appendChild(chip);
  });
  return root;
}

/** Colored table grid for a heatmap matrix; cell title/data-value hold the
 * exact matrix entry. */
export function heatmapGrid(
  matrix: number[][],
  rowLabels: string[],
  colLabels: string[],
): HTMLElement {
  const table = el("table", "heatmap");
  const head = el("tr");
  head.appendChild(el("th"));
  for (const label of colLabels) head.appendChild(el("th", undefined, label));
  table.appendChild(head);
  matrix.forEach((row, i) => {
    const tr = el("tr");
    tr.appendChild(el("th", undefined, rowLabels[i]));
    row.forEach((value) => {
      const td = el("td", "cell");
      td.dataset.value = String(value);
      td.title = String(value);
      const shade = Math.round(255 * (1 - value));
      td.style.backgroundColor = `rgb(${shade}, ${shade}, 255)`;
      tr.appendChild(td);
    });
    table.appendChild(tr);
  });
  return table;
}

export interface HeatmapChoice {
  key: string; // payload key under report.heatmaps
  title: string;
  rowLabels: string[];
  colLabels: string[];
}

/** The heatmap views a report offers, in toggle order. */
export function heatmapChoices(report: PredictionReport): HeatmapChoice[] {
  const withCopy = [...report.tokens, report.tokens[report.compound_index]];
  const choices: HeatmapChoice[] = [];
  if (report.heatmaps["pair"]) {
    choices.push({ key: "pair", title: "type pairs", rowLabels: withCopy, colLabels: withCopy });
  }
  if (report.heatmaps["dep"]) {
    choices.push({
      key: "dep",
      title: "dependency",
      rowLabels: report.tokens,
      colLabels: ["[root]", ...report.tokens],
    });
  }
  if (report.heatmaps["attention"]) {
    choices.push({
      key: "attention",
      title: "attention",
      rowLabels: withCopy,
      colLabels: withCopy,
    });
  }
  return choices;
}

/** Full inspector report: label, bars, chips, heatmap toggle, raw JSON. */
export function reportView(report: PredictionReport): HTMLElement {
  const root = el("div", "report");

  const headline = el("div", "headline");
  headline.appendChild(el("span", "headline-caption", "predicted type"));
  const label = el("span", "headline-label", report.label);
  label.dataset.value = report.label;
  headline.appendChild(label);
  root.appendChild(headline);

  root.appendChild(sentenceView(report.tokens, report.compound_index));
  root.appendChild(el("h3", undefined, "type confidence"));
  root.appendChild(confidenceBars(report.confidence));

  if (report.morph_tags) {
    root.appendChild(el("h3", undefined, "morphological tags"));
    root.appendChild(tagChips(report.tokens, report.morph_tags));
  }

  const choices = heatmapChoices(report);
  if (choices.length > 0) {
    root.appendChild(el("h3", undefined, "heatmaps"));
    const toggles = el("div", "heatmap-toggles");
    const holder = el("div", "heatmap-holder");
    const show = (choice: HeatmapChoice) => {
      holder.replaceChildren(
        heatmapGrid(report.heatmaps[choice.key], choice.rowLabels, choice.colLabels),
      );
      for (const btn of Array.from(toggles.children) as HTMLButtonElement[]) {
        btn.classList.toggle("active", btn.dataset.key === choice.key);
      }
    };
    for (const choice of choices) {
      const btn = el("button", "toggle", choice.title);
      btn.dataset.key = choice.key;
      btn.addEventListener("click", () => show(choice));
      toggles.appendChild(btn);
    }
    root.appendChild(toggles);
    root.appendChild(holder);
    show(choices[0]);
  }

  const raw = el("details", "raw-json");
  raw.appendChild(el("summary", undefined, "raw JSON"));
  raw.appendChild(el("pre", undefined, JSON.stringify(report, null, 2)));
  root.appendChild(raw);
  return root;
}
