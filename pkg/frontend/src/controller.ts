/**
 * View-model and request orchestration for the drafting coach.
 *
 * The controller owns the editor state and talks to the scoring service;
 * the DOM layer renders whatever state() returns and forwards events back.
 * Every probability shown anywhere originates from a service response: the
 * controller stores and forwards numbers, it never does model math.
 *
 * Live-typing contract: score requests are debounced (400 ms of idle time
 * by default), at most one request is in flight per editor, and every fired
 * request carries a monotonically increasing version. A response is applied
 * only if its version is still the newest one issued; responses for
 * superseded drafts are discarded, so the gauge always shows the last
 * completed score of the current text.
 */
import type {
  DraftPayload,
  ScoreClient,
  ScoreResult,
  UserMeta,
  WhatIf,
} from "./api";

export interface Chip extends WhatIf {
  disabled: boolean;
}

export interface ChecklistItem {
  key: string;
  label: string;
  present: boolean;
  detail: string;
}

export interface HistoryPoint {
  at: number;
  probability: number;
}

export interface CoachViewState {
  title: string;
  body: string;
  pending: boolean;
  error: string | null;
  score: ScoreResult | null;
  gauge: number | null;
  chips: Chip[];
  checklist: ChecklistItem[];
  suggestion: string | null;
  toggles: string[];
  history: HistoryPoint[];
}

export interface CoachOptions {
  debounceMs?: number;
  now?: () => number;
}

const NARRATIVE_LABELS: Record<string, string> = {
  money: "money troubles",
  job: "job situation",
  student: "student life",
  family: "family",
  craving: "craving",
};

export class CoachController {
  private readonly client: ScoreClient;
  private readonly debounceMs: number;
  private readonly now: () => number;

  private title = "";
  private body = "";
  private user: UserMeta | null = null;
  private timestamp: number | null = null;
  private toggles: string[] = [];

  private score: ScoreResult | null = null;
  private gauge: number | null = null;
  private suggestion: string | null = null;
  private error: string | null = null;
  private pending = false;
  private history: HistoryPoint[] = [];

  private timer: ReturnType<typeof setTimeout> | null = null;
  private version = 0;
  private inFlight = false;
  private queued = false;
  private listeners: Array<(s: CoachViewState) => void> = [];

  constructor(client: ScoreClient, opts: CoachOptions = {}) {
    this.client = client;
    this.debounceMs = opts.debounceMs ?? 400;
    this.now = opts.now ?? Date.now;
  }

  onChange(fn: (s: CoachViewState) => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }

  state(): CoachViewState {
    return {
      title: this.title,
      body: this.body,
      pending: this.pending,
      error: this.error,
      score: this.score,
      gauge: this.gauge,
      chips: this.chips(),
      checklist: this.checklist(),
      suggestion: this.suggestion,
      toggles: [...this.toggles],
      history: [...this.history],
    };
  }

  /** Update the draft text and schedule a debounced re-score. */
  setDraft(title: string, body: string): void {
    if (title === this.title && body === this.body) return;
    this.title = title;
    this.body = body;
    this.pending = true;
    this.schedule();
    this.emit();
  }

  /** Poster metadata sent with score requests (karma, prior posts, age). */
  setUser(user: UserMeta | null): void {
    this.user = user;
    this.pending = true;
    this.schedule();
    this.emit();
  }

  /** Pin the draft timestamp; null lets the service use "now". */
  setTimestamp(ts: number | null): void {
    this.timestamp = ts;
    this.pending = true;
    this.schedule();
    this.emit();
  }

  /** Score the current state immediately (startup baseline, manual retry). */
  refresh(): void {
    this.pending = true;
    this.requestNow();
    this.emit();
  }

  /**
   * Commit a what-if chip: show the service-advertised probability for the
   * toggle right away, remember the toggle for subsequent scores, and
   * confirm with an immediate re-score. The draft text is never edited;
   * chips whose factor is already present (delta 0) are inert.
   */
  applyChip(toggle: string): void {
    const last = this.score;
    if (!last) return;
    const hit = last.what_if.find((w) => w.toggle === toggle);
    if (!hit || hit.delta === 0) return;
    if (!this.toggles.includes(toggle)) this.toggles.push(toggle);
    this.gauge = hit.probability;
    this.suggestion = hit.change;
    this.pending = true;
    this.requestNow();
    this.emit();
  }

  private schedule(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.requestNow();
    }, this.debounceMs);
  }

  private requestNow(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.version += 1;
    if (this.inFlight) {
      this.queued = true;
      return;
    }
    void this.fire(this.version);
  }

  private payload(): DraftPayload {
    const p: DraftPayload = {
      title: this.title,
      body: this.body,
      toggles: [...this.toggles],
    };
    if (this.user) p.user = this.user;
    if (this.timestamp !== null) p.timestamp = this.timestamp;
    return p;
  }

  private async fire(version: number): Promise<void> {
    this.inFlight = true;
    try {
      const result = await this.client.score(this.payload());
      if (version === this.version) {
        this.score = result;
        this.gauge = result.probability;
        this.error = null;
        this.pending = false;
        this.history.push({ at: this.now(), probability: result.probability });
      }
      // Superseded responses fall through untouched: a newer request is
      // queued below and the stale numbers never reach the screen.
    } catch (err) {
      if (version === this.version) {
        this.error = err instanceof Error ? err.message : String(err);
        this.pending = false;
        // The last good score stays on screen.
      }
    } finally {
      this.inFlight = false;
      if (this.queued) {
        this.queued = false;
        void this.fire(this.version);
      }
    }
    this.emit();
  }

  private chips(): Chip[] {
    const s = this.score;
    if (!s) return [];
    return [...s.what_if]
      .sort((a, b) => b.delta - a.delta || a.toggle.localeCompare(b.toggle))
      .map((w) => ({ ...w, disabled: w.delta === 0 }));
  }

  private factorRaw(name: string): number | boolean | null {
    const f = this.score?.factors.find((x) => x.name === name);
    return f ? f.raw : null;
  }

  private checklist(): ChecklistItem[] {
    const s = this.score;
    if (!s) return [];
    const items: ChecklistItem[] = [];
    for (const [name, label] of Object.entries(NARRATIVE_LABELS)) {
      const present = s.detected.narratives.includes(name);
      items.push({
        key: `narrative_${name}`,
        label,
        present,
        detail: present ? "mentioned" : "not mentioned",
      });
    }
    items.push({
      key: "gratitude",
      label: "says thanks",
      present: s.detected.gratitude,
      detail: s.detected.gratitude ? "found" : "missing",
    });
    items.push({
      key: "reciprocity",
      label: "offers to pay it forward",
      present: s.detected.reciprocity,
      detail: s.detected.reciprocity ? "found" : "missing",
    });
    items.push({
      key: "image",
      label: "evidence link",
      present: s.detected.image,
      detail: s.detected.image ? "found" : "missing",
    });
    const words = this.factorRaw("length_100w");
    if (typeof words === "number") {
      items.push({
        key: "length",
        label: "length",
        present: words > 0,
        detail: `${Math.round(words)} words`,
      });
    }
    return items;
  }

  private emit(): void {
    const s = this.state();
    for (const fn of [...this.listeners]) fn(s);
  }
}
