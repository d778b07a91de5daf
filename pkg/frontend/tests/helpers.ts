import type {
  DraftPayload,
  HealthStatus,
  ModelCard,
  ScoreClient,
  ScoreResult,
  WhatIf,
} from "../src/api";

export interface Deferred<T> {
  promise: Promise<T>;
  resolve(value: T): void;
  reject(reason: unknown): void;
}

export function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (reason: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

/** Drain the microtask queue a few turns so awaited responses settle. */
export async function flush(turns = 6): Promise<void> {
  for (let i = 0; i < turns; i += 1) await Promise.resolve();
}

export interface MkScoreOpts {
  whatIf?: WhatIf[];
  words?: number;
  narratives?: string[];
  gratitude?: boolean;
  reciprocity?: boolean;
  image?: boolean;
  toggles?: string[];
}

export function mkScore(probability: number, opts: MkScoreOpts = {}): ScoreResult {
  const words = opts.words ?? 50;
  return {
    probability,
    logit: 0,
    intercept: 0,
    factors: [
      {
        name: "length_100w",
        raw: words,
        encoded: words / 100,
        coefficient: 0.5,
        contribution: 0,
      },
    ],
    detected: {
      narratives: opts.narratives ?? [],
      gratitude: opts.gratitude ?? false,
      reciprocity: opts.reciprocity ?? false,
      image: opts.image ?? false,
    },
    what_if: opts.whatIf ?? [],
    features: {},
    schema_id: "test-schema",
    toggles: opts.toggles ?? [],
  };
}

/**
 * A score client whose responses are resolved by hand, so tests can hold
 * requests open, answer them out of order, or fail them.
 */
export class ManualClient implements ScoreClient {
  calls: DraftPayload[] = [];
  pending: Deferred<ScoreResult>[] = [];

  score(draft: DraftPayload): Promise<ScoreResult> {
    this.calls.push(JSON.parse(JSON.stringify(draft)) as DraftPayload);
    const d = deferred<ScoreResult>();
    this.pending.push(d);
    return d.promise;
  }

  model(): Promise<ModelCard> {
    return Promise.reject(new Error("model card not stubbed"));
  }

  health(): Promise<HealthStatus> {
    return Promise.resolve({ status: "ok", model_loaded: true });
  }
}
