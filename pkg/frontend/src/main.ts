/** Application bootstrap: drive one annotator through the item queue.
 *
 * The server is the source of truth: every submit is an idempotent upsert
 * and fetching an item restores previously judged dimensions, so a reload
 * mid-item loses nothing.  Network failures show a retry banner and keep
 * local choices.
 */

import { AnnotationApi, ApiError } from "./api.js";
import {
  buildBanner,
  buildDone,
  buildMqmDaPanel,
  buildPairwiseView,
} from "./render.js";
import { PairwiseItemState } from "./state.js";
import { isDone, ViewItem } from "./types.js";

export class App {
  private state: PairwiseItemState | null = null;

  constructor(
    private readonly api: AnnotationApi,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
    let payload;
    try {
      payload = await this.api.nextItem();
    } catch (error) {
      this.showBanner(error, () => void this.loadNext());
      return;
    }
    if (isDone(payload)) {
      this.root.replaceChildren(buildDone());
      return;
    }
    this.renderItem(payload);
  }

  private renderItem(item: ViewItem): void {
    const state = new PairwiseItemState(item);
    this.state = state;
    const view = buildPairwiseView(item, state, {
      onChoice: (dimension, choice) => state.choose(dimension, choice),
      onSubmit: () => void this.submit(item),
    });
    for (const textBox of view.querySelectorAll<HTMLElement>(
      ".candidate-text",
    )) {
      const candidate = textBox.dataset.candidate as "a" | "b";
      textBox.parentElement?.appendChild(
        buildMqmDaPanel(candidate, textBox, {
          onMqm: (cand, start, end, category, severity) =>
            void this.api
              .submitMqm(item.item_id, cand, start, end, category, severity)
              .catch((error) => this.showBanner(error, () => undefined)),
          onDa: (cand, value) =>
            void this.api
              .submitDa(item.item_id, cand, value)
              .catch((error) => this.showBanner(error, () => undefined)),
        }),
      );
    }
    this.root.replaceChildren(view);
  }

  private async submit(item: ViewItem): Promise<void> {
    const state = this.state;
    if (!state || !state.canSubmit) return;
    try {
      for (const [dimension, choice] of state.pendingSubmissions()) {
        await this.api.submitPairwise(item.item_id, dimension, choice);
        state.markSubmitted(dimension, choice);
      }
    } catch (error) {
      // keep in-progress choices; user can retry the submit
      this.showBanner(error, () => void this.submit(item));
      return;
    }
    await this.loadNext();
  }

  private showBanner(error: unknown, onRetry: () => void): void {
    const message =
      error instanceof ApiError ? error.message : "request failed";
    const existing = this.root.querySelector(".retry-banner");
    existing?.remove();
    this.root.prepend(buildBanner(`Server unreachable: ${message}`, onRetry));
  }
}

export function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const annotator =
    new URLSearchParams(window.location.search).get("annotator") ?? "anon";
  const api = new AnnotationApi(undefined, "", annotator);
  void new App(api, root).start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootstrap();
}
