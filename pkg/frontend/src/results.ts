// Results table rendering: models x dimensions as normalized percentages,
// sorted by the overall column. Pure string output so it is testable
// without a DOM.

import { ResultsBody } from "./types.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function hasResponses(results: ResultsBody): boolean {
  return Object.values(results.dimensions).some((dim) =>
    Object.values(dim.items).some((item) => item.n_responses > 0),
  );
}

export function sortModelsByOverall(results: ResultsBody): string[] {
  const dims = Object.keys(results.dimensions);
  const key = dims.includes("overall") ? "overall" : dims[0];
  if (key === undefined) return [...results.models];
  const pct = results.dimensions[key]!.normalized_pct;
  return [...results.models].sort((a, b) => (pct[b] ?? 0) - (pct[a] ?? 0));
}

export function renderResultsTable(results: ResultsBody): string {
  if (!hasResponses(results)) {
    return `<p class="empty">no responses yet</p>`;
  }
  const dims = Object.keys(results.dimensions);
  const models = sortModelsByOverall(results);
  const head = dims.map((d) => `<th>${esc(d)} %</th>`).join("");
  const rows = models
    .map((m) => {
      const cells = dims
        .map((d) => {
          const pct = results.dimensions[d]!.normalized_pct[m] ?? 0;
          return `<td>${pct.toFixed(2)}</td>`;
        })
        .join("");
      return `<tr><td class="model">${esc(m)}</td>${cells}</tr>`;
    })
    .join("");
  return (
    `<table class="results">` +
    `<thead><tr><th>model</th>${head}</tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}
