/** Typed client for the annotation server; fetch is injectable for tests. */

import {
  Choice,
  Dimension,
  FORBIDDEN_PAYLOAD_KEYS,
  MqmCategory,
  MqmSeverity,
  NextItemResponse,
  SubmitResponse,
  ViewItem,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status?: number,
  ) {
    super(message);
  }
}

/** Defense in depth: reject any server payload that carries system-identity
 * keys, so a misconfigured server cannot un-blind the interface. */
export function assertBlind(payload: unknown): void {
  if (Array.isArray(payload)) {
    payload.forEach(assertBlind);
    return;
  }
  if (payload && typeof payload === "object") {
    for (const [key, value] of Object.entries(payload)) {
      if ((FORBIDDEN_PAYLOAD_KEYS as readonly string[]).includes(key)) {
        throw new ApiError(`payload contains forbidden key: ${key}`);
      }
      assertBlind(value);
    }
  }
}

export class AnnotationApi {
  constructor(
    private readonly fetchImpl: FetchLike = (input, init) =>
      fetch(input, init),
    private readonly base: string = "",
    readonly annotator: string = "anon",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, init);
    } catch (error) {
      throw new ApiError(`network failure: ${String(error)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(detail, response.status);
    }
    const payload = (await response.json()) as T;
    assertBlind(payload);
    return payload;
  }

  listItems(): Promise<ViewItem[]> {
    return this.request<ViewItem[]>(
      `/api/items?annotator=${encodeURIComponent(this.annotator)}`,
    );
  }

  nextItem(): Promise<NextItemResponse> {
    return this.request<NextItemResponse>(
      `/api/items/next?annotator=${encodeURIComponent(this.annotator)}`,
    );
  }

  submitPairwise(
    itemId: string,
    dimension: Dimension,
    choice: Choice,
  ): Promise<SubmitResponse> {
    return this.request<SubmitResponse>(`/api/items/${itemId}/pairwise`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ dimension, choice, annotator: this.annotator }),
    });
  }

  submitMqm(
    itemId: string,
    candidate: "a" | "b",
    start: number,
    end: number,
    category: MqmCategory,
    severity: MqmSeverity,
  ): Promise<SubmitResponse> {
    return this.request<SubmitResponse>(`/api/items/${itemId}/mqm`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        candidate,
        start,
        end,
        category,
        severity,
        annotator: this.annotator,
      }),
    });
  }

  submitDa(
    itemId: string,
    candidate: "a" | "b",
    value: number,
  ): Promise<SubmitResponse> {
    return this.request<SubmitResponse>(`/api/items/${itemId}/da`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ candidate, value, annotator: this.annotator }),
    });
  }
}
