import { describe, expect, it } from "vitest";

import { AnnotationApi, ApiError, assertBlind } from "../src/api.js";
import { isDone } from "../src/types.js";
import { FakeServer } from "./fake_server.js";

describe("assertBlind", () => {
  it("accepts clean payloads", () => {
    expect(() =>
      assertBlind({ item_id: "x", candidate_a: "t", nested: [{ lp: "en-de" }] }),
    ).not.toThrow();
  });

  it("rejects payloads with mapping keys at any depth", () => {
    expect(() => assertBlind({ a_is: "refined" })).toThrow(ApiError);
    expect(() => assertBlind({ items: [{ deep: { a_is: "x" } }] })).toThrow(
      /forbidden key/,
    );
  });
});

describe("AnnotationApi", () => {
  it("fetches blind items and submits judgments", async () => {
    const server = new FakeServer(2);
    const api = new AnnotationApi(server.fetch);
    const next = await api.nextItem();
    expect(isDone(next)).toBe(false);
    if (!isDone(next)) {
      const submit = await api.submitPairwise(next.item_id, "fluency", "tie");
      expect(submit.ok).toBe(true);
      expect(submit.judged?.fluency).toBe("tie");
    }
  });

  it("maps HTTP errors to ApiError with the server detail", async () => {
    const server = new FakeServer(1);
    const api = new AnnotationApi(server.fetch);
    await expect(
      api.submitPairwise("item-0000", "adequacy" as never, "tie"),
    ).rejects.toThrow(/unknown dimension/);
  });

  it("wraps network failures", async () => {
    const api = new AnnotationApi(async () => {
      throw new Error("connection refused");
    });
    await expect(api.nextItem()).rejects.toThrow(/network failure/);
  });

  it("walks the whole queue to done", async () => {
    const server = new FakeServer(2);
    const api = new AnnotationApi(server.fetch);
    for (let i = 0; i < 2; i++) {
      const item = await api.nextItem();
      expect(isDone(item)).toBe(false);
      if (isDone(item)) break;
      for (const dimension of ["accuracy", "fluency", "style_term"] as const) {
        await api.submitPairwise(item.item_id, dimension, "tie");
      }
    }
    expect(isDone(await api.nextItem())).toBe(true);
  });
});
