/** Local judging state for one pairwise item.
 *
 * Submission is gated on all three dimensions being chosen; choices made
 * before a network hiccup survive (they live here, not in the DOM).
 */

import { Choice, DIMENSIONS, Dimension, ViewItem } from "./types.js";

export class PairwiseItemState {
  private readonly choices = new Map<Dimension, Choice>();
  private readonly submitted = new Set<Dimension>();

  constructor(readonly item: ViewItem) {
    for (const [dimension, choice] of Object.entries(item.judged ?? {})) {
      this.choices.set(dimension as Dimension, choice as Choice);
      this.submitted.add(dimension as Dimension);
    }
  }

  choose(dimension: Dimension, choice: Choice): void {
    this.choices.set(dimension, choice);
  }

  choiceFor(dimension: Dimension): Choice | undefined {
    return this.choices.get(dimension);
  }

  /** All three dimension rows have a selection. */
  get complete(): boolean {
    return DIMENSIONS.every((dimension) => this.choices.has(dimension));
  }

  get canSubmit(): boolean {
    return this.complete;
  }

  /** Dimensions still needing a POST (previously stored ones are skipped
   * unless the local choice changed). */
  pendingSubmissions(): Array<[Dimension, Choice]> {
    const pending: Array<[Dimension, Choice]> = [];
    for (const dimension of DIMENSIONS) {
      const choice = this.choices.get(dimension);
      if (choice === undefined) continue;
      if (
        this.submitted.has(dimension) &&
        this.item.judged?.[dimension] === choice
      ) {
        continue;
      }
      pending.push([dimension, choice]);
    }
    return pending;
  }

  markSubmitted(dimension: Dimension, choice: Choice): void {
    this.submitted.add(dimension);
    this.item.judged = { ...(this.item.judged ?? {}), [dimension]: choice };
  }
}
