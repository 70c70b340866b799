import { consumeSse } from "./sse.js";
import type {
  FixtureEntry,
  GenerateRequest,
  HealthInfo,
  PublishResult,
  Trailer,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
    public readonly detail?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let detail: unknown;
  try {
    detail = await response.json();
  } catch {
    detail = undefined;
  }
  throw new ApiError(`HTTP ${response.status}`, response.status, detail);
}

export interface StreamHandlers {
  onChunk(text: string): void;
  onTrailer(trailer: Trailer): void;
}

/** Typed client for the listing service; baseUrl "" means same origin. */
export class ListingClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async generate(
    request: GenerateRequest,
    handlers: StreamHandlers,
    signal?: AbortSignal,
  ): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/listings:generate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
      signal,
    });
    await raiseForStatus(response);
    await consumeSse(response, (event) => {
      if (event.event === "chunk") {
        handlers.onChunk((JSON.parse(event.data) as { text: string }).text);
      } else if (event.event === "trailer") {
        handlers.onTrailer(JSON.parse(event.data) as Trailer);
      }
    });
  }

  async publish(draftId: string, finalText: string): Promise<PublishResult> {
    const response = await this.fetchFn(
      `${this.baseUrl}/v1/drafts/${encodeURIComponent(draftId)}:publish`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ final_text: finalText }),
      },
    );
    await raiseForStatus(response);
    return (await response.json()) as PublishResult;
  }

  async getDraft(draftId: string): Promise<Record<string, unknown>> {
    const response = await this.fetchFn(
      `${this.baseUrl}/v1/drafts/${encodeURIComponent(draftId)}`,
    );
    await raiseForStatus(response);
    return (await response.json()) as Record<string, unknown>;
  }

  async health(): Promise<HealthInfo> {
    const response = await this.fetchFn(`${this.baseUrl}/healthz`);
    await raiseForStatus(response);
    return (await response.json()) as HealthInfo;
  }

  /** Fixture gallery shipped with the static bundle. */
  async fixtures(path = "fixtures.json"): Promise<FixtureEntry[]> {
    const response = await this.fetchFn(path);
    await raiseForStatus(response);
    return (await response.json()) as FixtureEntry[];
  }
}
