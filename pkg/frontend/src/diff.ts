/** Word-level diff highlighting between the two candidates.
 *
 * Presentation only: the highlights steer the eye to where A and B differ
 * and are never sent to the server or stored with judgments.
 */

export interface DiffPiece {
  text: string;
  changed: boolean;
}

function tokenize(text: string): string[] {
  return text.match(/\S+\s*/g) ?? [];
}

/** Boolean keep-masks from a longest-common-subsequence alignment. */
function lcsKeepMasks(a: string[], b: string[]): [boolean[], boolean[]] {
  const m = a.length;
  const n = b.length;
  const table: number[][] = Array.from({ length: m + 1 }, () =>
    new Array<number>(n + 1).fill(0),
  );
  for (let i = 1; i <= m; i++) {
    for (let j = 1; j <= n; j++) {
      table[i][j] =
        a[i - 1].trim() === b[j - 1].trim()
          ? table[i - 1][j - 1] + 1
          : Math.max(table[i][j - 1], table[i - 1][j]);
    }
  }
  const keepA = new Array<boolean>(m).fill(false);
  const keepB = new Array<boolean>(n).fill(false);
  let i = m;
  let j = n;
  while (i > 0 && j > 0) {
    if (a[i - 1].trim() === b[j - 1].trim()) {
      keepA[i - 1] = true;
      keepB[j - 1] = true;
      i--;
      j--;
    } else if (table[i][j - 1] >= table[i - 1][j]) {
      j--;
    } else {
      i--;
    }
  }
  return [keepA, keepB];
}

function pieces(tokens: string[], keep: boolean[]): DiffPiece[] {
  const out: DiffPiece[] = [];
  for (let i = 0; i < tokens.length; i++) {
    const changed = !keep[i];
    const last = out[out.length - 1];
    if (last && last.changed === changed) {
      last.text += tokens[i];
    } else {
      out.push({ text: tokens[i], changed });
    }
  }
  return out;
}

/** Diff both candidates against each other; changed runs get highlighted. */
export function diffCandidates(
  a: string,
  b: string,
): { a: DiffPiece[]; b: DiffPiece[] } {
  const tokensA = tokenize(a);
  const tokensB = tokenize(b);
  const [keepA, keepB] = lcsKeepMasks(tokensA, tokensB);
  return { a: pieces(tokensA, keepA), b: pieces(tokensB, keepB) };
}
