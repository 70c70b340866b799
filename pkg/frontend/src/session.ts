import { ApiError, ListingClient } from "./api.js";
import type { FixtureEntry, PipelineTrace, PublishResult, Trailer } from "./types.js";

export type StreamPhase = "idle" | "streaming" | "done" | "failed";

// Every terminal service status renders as its own badge; nothing is silent.
export const STATUS_BADGES: Record<string, string> = {
  Complete: "complete",
  Truncated: "truncated",
  SafetyHalted: "safety-halted",
  TimedOut: "timed-out",
  BackendError: "backend-error",
};

export interface SessionState {
  phase: StreamPhase;
  liveText: string;
  editText: string;
  chips: string[];
  status: string | null;
  statusReason: string | null;
  trace: PipelineTrace | null;
  draftId: string | null;
  published: PublishResult | null;
  notice: string | null;
  error: string | null;
  canRetry: boolean;
  firstChunkLatencyMs: number | null;
  generationCount: number;
}

type Listener = (state: Readonly<SessionState>) => void;

function initialState(chips: string[]): SessionState {
  return {
    phase: "idle",
    liveText: "",
    editText: "",
    chips: [...chips],
    status: null,
    statusReason: null,
    trace: null,
    draftId: null,
    published: null,
    notice: null,
    error: null,
    canRetry: false,
    firstChunkLatencyMs: null,
    generationCount: 0,
  };
}

/**
 * One seller composing one listing: holds the append-only live text, the
 * separate edit buffer, the ordered template chips, and the stream status.
 * A regenerate always cancels the previous stream first; late events from a
 * cancelled stream are dropped by generation token.
 */
export class ComposerSession {
  private listeners: Listener[] = [];
  private current: SessionState;
  private controller: AbortController | null = null;
  private generationToken = 0;
  private readonly defaultChips: string[];

  constructor(
    private readonly client: ListingClient,
    public fixture: FixtureEntry,
    defaultTemplate: string[],
    private readonly now: () => number = () =>
      typeof performance !== "undefined" ? performance.now() : Date.now(),
  ) {
    this.defaultChips = [...defaultTemplate];
    this.current = initialState(this.defaultChips);
  }

  state(): Readonly<SessionState> {
    return this.current;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<SessionState>): void {
    this.current = { ...this.current, ...patch };
    for (const listener of this.listeners) listener(this.current);
  }

  // -- template chips ----------------------------------------------------

  removeChip(name: string): void {
    this.update({ chips: this.current.chips.filter((c) => c !== name) });
  }

  addChip(name: string): void {
    const trimmed = name.trim();
    if (!trimmed || this.current.chips.includes(trimmed)) return;
    this.update({ chips: [...this.current.chips, trimmed] });
  }

  moveChip(from: number, to: number): void {
    const chips = [...this.current.chips];
    if (from < 0 || from >= chips.length || to < 0 || to >= chips.length) return;
    const [chip] = chips.splice(from, 1);
    chips.splice(to, 0, chip);
    this.update({ chips });
  }

  resetChips(): void {
    this.update({ chips: [...this.defaultChips] });
  }

  setEditText(text: string): void {
    // The explicit edit buffer is the only client-side mutation path;
    // liveText stays exactly what the service streamed.
    this.update({ editText: text });
  }

  setFixture(fixture: FixtureEntry): void {
    this.fixture = fixture;
  }

  // -- streaming -----------------------------------------------------------

  cancel(): void {
    this.controller?.abort();
    this.controller = null;
  }

  async start(): Promise<void> {
    this.cancel(); // single active generation per session
    const token = ++this.generationToken;
    const controller = new AbortController();
    this.controller = controller;
    const startedAt = this.now();
    this.update({
      phase: "streaming",
      liveText: "",
      editText: "",
      status: null,
      statusReason: null,
      trace: null,
      draftId: null,
      published: null,
      notice: null,
      error: null,
      canRetry: false,
      firstChunkLatencyMs: null,
      generationCount: this.current.generationCount + 1,
    });
    try {
      await this.client.generate(
        {
          request_id: `ui-${Date.now()}-${token}`,
          user_id: "composer",
          image_ref: this.fixture.image_ref,
          image_embedding: this.fixture.embedding,
          options: { template: [...this.current.chips] },
        },
        {
          onChunk: (text) => {
            if (token !== this.generationToken) return;
            const patch: Partial<SessionState> = {
              liveText: this.current.liveText + text,
            };
            if (this.current.firstChunkLatencyMs === null) {
              patch.firstChunkLatencyMs = this.now() - startedAt;
            }
            this.update(patch);
          },
          onTrailer: (trailer) => {
            if (token !== this.generationToken) return;
            this.finishStream(trailer);
          },
        },
        controller.signal,
      );
    } catch (error) {
      if (token !== this.generationToken) return; // superseded by a regenerate
      if (controller.signal.aborted) return; // cancelled on purpose
      this.update({
        phase: "failed",
        error: describeError(error),
        canRetry: true, // session (chips, fixture, partial text) is preserved
      });
    }
  }

  private finishStream(trailer: Trailer): void {
    const notice = noticeFor(trailer);
    this.update({
      phase: "done",
      status: trailer.status,
      statusReason: trailer.reason ?? trailer.error ?? null,
      trace: trailer.trace ?? null,
      draftId: trailer.draft_id || null,
      editText: this.current.liveText,
      notice,
    });
  }

  async retry(): Promise<void> {
    await this.start();
  }

  // -- publishing -----------------------------------------------------------

  canPublish(): boolean {
    return (
      this.current.phase === "done" &&
      this.current.draftId !== null &&
      this.current.published === null
    );
  }

  async publish(): Promise<void> {
    if (!this.canPublish() || this.current.draftId === null) return;
    try {
      const result = await this.client.publish(this.current.draftId, this.current.editText);
      this.update({ published: result, error: null });
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.update({ error: "Already published: this draft can only be published once." });
      } else {
        this.update({ error: describeError(error) });
      }
    }
  }
}

function noticeFor(trailer: Trailer): string | null {
  switch (trailer.status) {
    case "SafetyHalted":
      return "Generation was halted by the content safety check. You can edit the draft manually and publish.";
    case "TimedOut":
      return "Generation timed out. The partial draft is kept so you can finish it manually.";
    case "Truncated":
      return "Output reached the length limit and was truncated.";
    case "BackendError":
      return "The generator backend failed; the partial draft is editable below.";
    default:
      return null;
  }
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return `Service error (${error.status}). Check the service and try again.`;
  }
  if (error instanceof Error) return `Network failure: ${error.message}. Retry when ready.`;
  return "Unknown error";
}
