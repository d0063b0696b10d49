// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { AnnotationApi, assertBlind } from "../src/api.js";
import { App } from "../src/main.js";
import { buildMqmDaPanel, buildPairwiseView } from "../src/render.js";
import { PairwiseItemState } from "../src/state.js";
import { DIMENSIONS, ViewItem } from "../src/types.js";
import { FakeServer } from "./fake_server.js";

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

function pickChoice(
  root: HTMLElement,
  dimension: string,
  value: string,
): void {
  const row = root.querySelector<HTMLElement>(
    `.dimension-row[data-dimension="${dimension}"]`,
  );
  expect(row).toBeTruthy();
  const input = row!.querySelector<HTMLInputElement>(
    `input[value="${value}"]`,
  );
  expect(input).toBeTruthy();
  input!.checked = true;
  input!.dispatchEvent(new Event("change"));
}

describe("pairwise view", () => {
  const item: ViewItem = {
    item_id: "item-0000",
    lp: "en-de",
    source: "the source",
    candidate_a: "shared words plus alpha",
    candidate_b: "shared words plus beta",
  };

  it("disables submit until all three dimensions are chosen", () => {
    const state = new PairwiseItemState(item);
    let submitted = false;
    const view = buildPairwiseView(item, state, {
      onChoice: (dimension, choice) => state.choose(dimension, choice),
      onSubmit: () => {
        submitted = true;
      },
    });
    document.body.replaceChildren(view);
    const button = view.querySelector<HTMLButtonElement>(".submit-button")!;
    expect(button.disabled).toBe(true);
    button.click();
    expect(submitted).toBe(false);

    pickChoice(view, "accuracy", "tie");
    expect(button.disabled).toBe(true);
    pickChoice(view, "fluency", "a_much_better");
    expect(button.disabled).toBe(true);
    pickChoice(view, "style_term", "b_slightly_better");
    expect(button.disabled).toBe(false);
    button.click();
    expect(submitted).toBe(true);
  });

  it("renders source, both candidates and diff highlights", () => {
    const state = new PairwiseItemState(item);
    const view = buildPairwiseView(item, state, {
      onChoice: () => undefined,
      onSubmit: () => undefined,
    });
    document.body.replaceChildren(view);
    expect(view.querySelector(".source-text")!.textContent).toBe("the source");
    const candidates = view.querySelectorAll(".candidate-text");
    expect(candidates).toHaveLength(2);
    const changed = view.querySelectorAll(".diff-changed");
    const changedText = Array.from(changed, (node) => node.textContent?.trim());
    expect(changedText).toContain("alpha");
    expect(changedText).toContain("beta");
    // A/B labels never reveal which candidate is the refined one
    expect(view.textContent).not.toMatch(/refined/i);
    expect(view.textContent).not.toMatch(/initial/i);
  });

  it("restores previously judged dimensions into the radio rows", () => {
    const state = new PairwiseItemState({
      ...item,
      judged: { fluency: "a_slightly_better" },
    });
    const view = buildPairwiseView(item, state, {
      onChoice: () => undefined,
      onSubmit: () => undefined,
    });
    const checked = view.querySelector<HTMLInputElement>(
      '.dimension-row[data-dimension="fluency"] input:checked',
    );
    expect(checked?.value).toBe("a_slightly_better");
  });

  it("offers exactly minor/major/critical severities in the MQM panel", () => {
    const textBox = document.createElement("div");
    textBox.textContent = item.candidate_a;
    const panel = buildMqmDaPanel("a", textBox, {
      onMqm: () => undefined,
      onDa: () => undefined,
    });
    const severities = Array.from(
      panel.querySelectorAll<HTMLOptionElement>(".mqm-severity option"),
      (option) => option.value,
    );
    expect(severities).toEqual(["minor", "major", "critical"]);
    const categories = panel.querySelectorAll(".mqm-category option");
    expect(categories).toHaveLength(5);
    const slider = panel.querySelector<HTMLInputElement>(".da-slider")!;
    expect([slider.min, slider.max]).toEqual(["0", "100"]);
  });
});

describe("scripted browser session", () => {
  beforeEach(() => {
    document.body.innerHTML = '<main id="app"></main>';
  });

  it("judges ten items; export de-randomizes to the scripted truth", async () => {
    const server = new FakeServer(10, 21);
    const api = new AnnotationApi(server.fetch);
    const root = document.getElementById("app")!;
    const app = new App(api, root);
    await app.start();
    await flush();

    // ground truth script, applied to every dimension of item k
    const script: Array<"refined" | "tie" | "initial"> = [
      ...Array(7).fill("refined"),
      ...Array(2).fill("tie"),
      "initial",
    ];
    const verdictByItem = new Map<string, "refined" | "tie" | "initial">();

    for (let turn = 0; turn < 10; turn++) {
      const view = root.querySelector<HTMLElement>(".pairwise-item");
      expect(view).toBeTruthy();
      const itemId = view!.dataset.itemId!;
      const verdict = script[turn];
      verdictByItem.set(itemId, verdict);

      // a human picks by reading the texts; this fixture embeds the system
      // name in the candidate text purely for scripting
      const candidateA = view!.querySelector<HTMLElement>(
        '.candidate-text[data-candidate="a"]',
      )!.textContent!;
      const aIsRefined = candidateA.startsWith("refined");
      let choice: string;
      if (verdict === "tie") {
        choice = "tie";
      } else if (verdict === "refined") {
        choice = aIsRefined ? "a_much_better" : "b_much_better";
      } else {
        choice = aIsRefined ? "b_slightly_better" : "a_slightly_better";
      }

      const button = view!.querySelector<HTMLButtonElement>(".submit-button")!;
      expect(button.disabled).toBe(true); // blocked until all three chosen
      for (const dimension of DIMENSIONS) {
        pickChoice(view!, dimension, choice);
      }
      expect(button.disabled).toBe(false);
      button.click();
      await flush();
      await flush();
    }

    expect(root.textContent).toContain("All items judged");

    // the de-randomized outcomes equal the scripted ground truth
    for (const [itemId, verdict] of verdictByItem) {
      for (const dimension of DIMENSIONS) {
        expect(server.outcome(itemId, dimension)).toBe(verdict);
      }
    }
    const outcomes = Array.from(verdictByItem.values());
    expect(outcomes.filter((o) => o === "refined")).toHaveLength(7);
    expect(outcomes.filter((o) => o === "tie")).toHaveLength(2);
    expect(outcomes.filter((o) => o === "initial")).toHaveLength(1);

    // no payload fetched during the whole session carried system identities
    expect(server.fetchedPayloads.length).toBeGreaterThan(0);
    for (const payload of server.fetchedPayloads) {
      expect(() => assertBlind(payload)).not.toThrow();
    }
  });

  it("shows a retry banner on network failure and keeps choices", async () => {
    const server = new FakeServer(1);
    let failNext = false;
    const flaky = async (input: string, init?: RequestInit) => {
      if (failNext && init?.method === "POST") {
        throw new Error("socket hangup");
      }
      return server.fetch(input, init);
    };
    const api = new AnnotationApi(flaky);
    const root = document.getElementById("app")!;
    const app = new App(api, root);
    await app.start();
    await flush();

    const view = root.querySelector<HTMLElement>(".pairwise-item")!;
    for (const dimension of DIMENSIONS) {
      pickChoice(view, dimension, "tie");
    }
    failNext = true;
    view.querySelector<HTMLButtonElement>(".submit-button")!.click();
    await flush();
    await flush();
    expect(root.querySelector(".retry-banner")).toBeTruthy();
    // choices survive the failure: retry succeeds without re-picking
    failNext = false;
    root.querySelector<HTMLButtonElement>(".retry-button")!.click();
    await flush();
    await flush();
    expect(root.textContent).toContain("All items judged");
  });
});
