/**
 * JSON types mirroring the scoring service and a thin fetch client.
 *
 * The UI is a pure consumer of this API: every probability it shows comes
 * back from one of these calls, nothing is recomputed client-side.
 */

export interface UserMeta {
  karma?: number;
  posted_before?: boolean;
  account_age_days?: number;
}

export interface DraftPayload {
  title: string;
  body: string;
  timestamp?: number;
  user?: UserMeta;
  toggles?: string[];
}

export interface Factor {
  name: string;
  raw: number | boolean;
  encoded: number;
  coefficient: number;
  contribution: number;
}

export interface Detected {
  narratives: string[];
  gratitude: boolean;
  reciprocity: boolean;
  image: boolean;
}

export interface WhatIf {
  toggle: string;
  change: string;
  probability: number;
  delta: number;
}

export interface ScoreResult {
  probability: number;
  logit: number;
  intercept: number;
  factors: Factor[];
  detected: Detected;
  what_if: WhatIf[];
  features: Record<string, number>;
  schema_id: string;
  toggles: string[];
}

export interface ModelCard {
  scheme: string;
  schema_id: string;
  epoch: number;
  corpus_fingerprint: string | null;
  intercept: number;
  coefficients: Record<string, number>;
  feature_names: string[];
  l1_penalty: number;
  encoder: Record<string, unknown>;
  available_toggles: string[];
}

export interface HealthStatus {
  status: string;
  model_loaded: boolean;
}

export interface ScoreClient {
  score(draft: DraftPayload): Promise<ScoreResult>;
  model(): Promise<ModelCard>;
  health(): Promise<HealthStatus>;
}

export class HttpScoreClient implements ScoreClient {
  constructor(private readonly baseUrl: string) {}

  async score(draft: DraftPayload): Promise<ScoreResult> {
    const res = await fetch(`${this.baseUrl}/v1/score`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(draft),
    });
    if (!res.ok) throw new Error(`score failed: HTTP ${res.status}`);
    return (await res.json()) as ScoreResult;
  }

  async model(): Promise<ModelCard> {
    const res = await fetch(`${this.baseUrl}/v1/model`);
    if (!res.ok) throw new Error(`model card failed: HTTP ${res.status}`);
    return (await res.json()) as ModelCard;
  }

  async health(): Promise<HealthStatus> {
    const res = await fetch(`${this.baseUrl}/healthz`);
    if (!res.ok) throw new Error(`health check failed: HTTP ${res.status}`);
    return (await res.json()) as HealthStatus;
  }
}
