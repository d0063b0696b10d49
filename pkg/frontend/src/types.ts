/** Payload shapes of the annotation server API (all mapping-blind). */

export type Dimension = "accuracy" | "fluency" | "style_term";

export const DIMENSIONS: readonly Dimension[] = [
  "accuracy",
  "fluency",
  "style_term",
];

export type Choice =
  | "a_much_better"
  | "a_slightly_better"
  | "tie"
  | "b_slightly_better"
  | "b_much_better";

export const CHOICES: readonly Choice[] = [
  "a_much_better",
  "a_slightly_better",
  "tie",
  "b_slightly_better",
  "b_much_better",
];

export const CHOICE_LABELS: Record<Choice, string> = {
  a_much_better: "A much better",
  a_slightly_better: "A slightly better",
  tie: "Tie",
  b_slightly_better: "B slightly better",
  b_much_better: "B much better",
};

export type MqmCategory =
  | "accuracy"
  | "fluency"
  | "style"
  | "terminology"
  | "other";

export const MQM_CATEGORIES: readonly MqmCategory[] = [
  "accuracy",
  "fluency",
  "style",
  "terminology",
  "other",
];

export type MqmSeverity = "minor" | "major" | "critical";

export const MQM_SEVERITIES: readonly MqmSeverity[] = [
  "minor",
  "major",
  "critical",
];

/** One pairwise item as served to annotators: never contains the hidden
 * initial/refined assignment. */
export interface ViewItem {
  item_id: string;
  lp: string;
  source: string;
  candidate_a: string;
  candidate_b: string;
  judged?: Partial<Record<Dimension, Choice>>;
}

export interface NextItemDone {
  done: true;
}

export type NextItemResponse = ViewItem | NextItemDone;

export function isDone(payload: NextItemResponse): payload is NextItemDone {
  return (payload as NextItemDone).done === true;
}

export interface SubmitResponse {
  ok: boolean;
  judged?: Partial<Record<Dimension, Choice>>;
}

/** Keys that must never appear in any payload the client receives. */
export const FORBIDDEN_PAYLOAD_KEYS = ["a_is", "mapping", "system"] as const;
