/** DOM construction for the annotation pages (no framework). */

import { diffCandidates, DiffPiece } from "./diff.js";
import { PairwiseItemState } from "./state.js";
import {
  CHOICES,
  CHOICE_LABELS,
  Choice,
  DIMENSIONS,
  Dimension,
  MQM_CATEGORIES,
  MQM_SEVERITIES,
  MqmCategory,
  MqmSeverity,
  ViewItem,
} from "./types.js";

const DIMENSION_LABELS: Record<Dimension, string> = {
  accuracy: "Accuracy",
  fluency: "Fluency",
  style_term: "Style + Terminology",
};

export interface PairwiseHandlers {
  onChoice(dimension: Dimension, choice: Choice): void;
  onSubmit(): void;
}

export interface MqmDaHandlers {
  onMqm(
    candidate: "a" | "b",
    start: number,
    end: number,
    category: MqmCategory,
    severity: MqmSeverity,
  ): void;
  onDa(candidate: "a" | "b", value: number): void;
}

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

function renderPieces(target: HTMLElement, pieces: DiffPiece[]): void {
  for (const piece of pieces) {
    const span = el("span", piece.changed ? "diff-changed" : undefined);
    span.textContent = piece.text;
    target.appendChild(span);
  }
}

/** Character offsets of the current selection inside a candidate panel. */
export function selectionOffsets(
  container: HTMLElement,
  selection: Selection | null,
): { start: number; end: number } | null {
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) {
    return null;
  }
  const range = selection.getRangeAt(0);
  if (!container.contains(range.startContainer) ||
      !container.contains(range.endContainer)) {
    return null;
  }
  const walker = document.createTreeWalker(container, NodeFilter.SHOW_TEXT);
  let offset = 0;
  let start = -1;
  let end = -1;
  for (let node = walker.nextNode(); node; node = walker.nextNode()) {
    const length = node.textContent?.length ?? 0;
    if (node === range.startContainer) start = offset + range.startOffset;
    if (node === range.endContainer) end = offset + range.endOffset;
    offset += length;
  }
  if (start < 0 || end < 0 || end <= start) return null;
  return { start, end };
}

function candidatePanel(
  label: "a" | "b",
  pieces: DiffPiece[],
): { panel: HTMLElement; textBox: HTMLElement } {
  const panel = el("section", "candidate");
  panel.appendChild(el("h3", undefined, `Candidate ${label.toUpperCase()}`));
  const textBox = el("div", "candidate-text");
  textBox.dataset.candidate = label;
  renderPieces(textBox, pieces);
  panel.appendChild(textBox);
  return { panel, textBox };
}

export function buildPairwiseView(
  item: ViewItem,
  state: PairwiseItemState,
  handlers: PairwiseHandlers,
): HTMLElement {
  const root = el("div", "pairwise-item");
  root.dataset.itemId = item.item_id;

  const header = el("div", "item-header");
  header.appendChild(el("h2", undefined, `Item ${item.item_id}`));
  header.appendChild(el("span", "lp-badge", item.lp));
  root.appendChild(header);

  const source = el("section", "source");
  source.appendChild(el("h3", undefined, "Source"));
  source.appendChild(el("div", "source-text", item.source));
  root.appendChild(source);

  const candidates = el("div", "candidates");
  const diff = diffCandidates(item.candidate_a, item.candidate_b);
  candidates.appendChild(candidatePanel("a", diff.a).panel);
  candidates.appendChild(candidatePanel("b", diff.b).panel);
  root.appendChild(candidates);

  const table = el("div", "dimensions");
  const submit = el("button", "submit-button", "Submit judgments");
  submit.disabled = !state.canSubmit;

  for (const dimension of DIMENSIONS) {
    const row = el("div", "dimension-row");
    row.dataset.dimension = dimension;
    row.appendChild(el("span", "dimension-label", DIMENSION_LABELS[dimension]));
    for (const choice of CHOICES) {
      const label = el("label", "choice");
      const input = el("input") as HTMLInputElement;
      input.type = "radio";
      input.name = `${item.item_id}-${dimension}`;
      input.value = choice;
      input.checked = state.choiceFor(dimension) === choice;
      input.addEventListener("change", () => {
        handlers.onChoice(dimension, choice);
        submit.disabled = !state.canSubmit;
      });
      label.appendChild(input);
      label.appendChild(
        el("span", undefined, CHOICE_LABELS[choice as Choice]),
      );
      row.appendChild(label);
    }
    table.appendChild(row);
  }
  root.appendChild(table);

  submit.addEventListener("click", () => {
    if (state.canSubmit) handlers.onSubmit();
  });
  root.appendChild(submit);
  return root;
}

export function buildMqmDaPanel(
  candidate: "a" | "b",
  textBox: HTMLElement,
  handlers: MqmDaHandlers,
): HTMLElement {
  const panel = el("div", "mqm-da-panel");
  panel.dataset.candidate = candidate;

  const categoryPick = el("select", "mqm-category") as HTMLSelectElement;
  for (const category of MQM_CATEGORIES) {
    const option = el("option", undefined, category) as HTMLOptionElement;
    option.value = category;
    categoryPick.appendChild(option);
  }
  const severityPick = el("select", "mqm-severity") as HTMLSelectElement;
  for (const severity of MQM_SEVERITIES) {
    const option = el("option", undefined, severity) as HTMLOptionElement;
    option.value = severity;
    severityPick.appendChild(option);
  }
  const addButton = el("button", "mqm-add", "Mark selected span");
  addButton.addEventListener("click", () => {
    const offsets = selectionOffsets(
      textBox,
      document.getSelection ? document.getSelection() : null,
    );
    if (!offsets) return; // empty spans are rejected
    handlers.onMqm(
      candidate,
      offsets.start,
      offsets.end,
      categoryPick.value as MqmCategory,
      severityPick.value as MqmSeverity,
    );
  });

  const slider = el("input", "da-slider") as HTMLInputElement;
  slider.type = "range";
  slider.min = "0";
  slider.max = "100";
  slider.value = "50";
  const daValue = el("span", "da-value", "50");
  slider.addEventListener("input", () => {
    daValue.textContent = slider.value;
  });
  const daButton = el("button", "da-submit", "Submit DA score");
  daButton.addEventListener("click", () => {
    handlers.onDa(candidate, Number(slider.value));
  });

  panel.appendChild(el("span", undefined, "MQM span:"));
  panel.appendChild(categoryPick);
  panel.appendChild(severityPick);
  panel.appendChild(addButton);
  panel.appendChild(el("span", undefined, "DA:"));
  panel.appendChild(slider);
  panel.appendChild(daValue);
  panel.appendChild(daButton);
  return panel;
}

export function buildBanner(message: string, onRetry: () => void): HTMLElement {
  const banner = el("div", "retry-banner");
  banner.appendChild(el("span", undefined, message));
  const button = el("button", "retry-button", "Retry");
  button.addEventListener("click", onRetry);
  banner.appendChild(button);
  return banner;
}

export function buildDone(): HTMLElement {
  return el("div", "all-done", "All items judged. Thank you!");
}
