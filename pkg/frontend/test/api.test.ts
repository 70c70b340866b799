import { describe, expect, it } from "vitest";

import { ApiError, ListingClient } from "../src/api.js";
import type { Trailer } from "../src/types.js";

function sseResponse(frames: string[], pieceSize = 7): Response {
  const payload = frames.join("");
  const bytes = new TextEncoder().encode(payload);
  let offset = 0;
  const stream = new ReadableStream<Uint8Array>({
    pull(controller) {
      if (offset >= bytes.length) {
        controller.close();
        return;
      }
      controller.enqueue(bytes.slice(offset, offset + pieceSize));
      offset += pieceSize;
    },
  });
  return new Response(stream, {
    status: 200,
    headers: { "Content-Type": "text/event-stream" },
  });
}

describe("ListingClient.generate", () => {
  it("dispatches chunk and trailer events from an SSE body", async () => {
    const frames = [
      'event: chunk\ndata: {"text": "Personal "}\n\n',
      'event: chunk\ndata: {"text": "used phone"}\n\n',
      'event: trailer\ndata: {"status": "Complete", "draft_id": "d1", "trace": {"variant": "ImageOnly", "instruction": "i", "stages": []}}\n\n',
    ];
    const sent: RequestInit[] = [];
    const client = new ListingClient("http://svc", ((url: string, init: RequestInit) => {
      sent.push(init);
      expect(url).toBe("http://svc/v1/listings:generate");
      return Promise.resolve(sseResponse(frames));
    }) as unknown as typeof fetch);

    const chunks: string[] = [];
    let trailer: Trailer | null = null;
    await client.generate(
      { image_ref: "x", image_embedding: [0.5], options: { template: ["Brand"] } },
      { onChunk: (text) => chunks.push(text), onTrailer: (t) => (trailer = t) },
    );
    expect(chunks.join("")).toBe("Personal used phone");
    expect(trailer!.status).toBe("Complete");
    expect(trailer!.draft_id).toBe("d1");
    const body = JSON.parse(String(sent[0].body));
    expect(body.options.template).toEqual(["Brand"]);
  });

  it("throws ApiError with the HTTP status on rejection", async () => {
    const client = new ListingClient("", (() =>
      Promise.resolve(
        new Response(JSON.stringify({ detail: { error: "unsafe_image" } }), { status: 400 }),
      )) as unknown as typeof fetch);
    await expect(
      client.generate(
        { image_ref: "x", image_embedding: [1] },
        { onChunk: () => {}, onTrailer: () => {} },
      ),
    ).rejects.toMatchObject({ name: "ApiError", status: 400 });
  });
});

describe("ListingClient.publish", () => {
  it("posts final text and parses the adoption metrics", async () => {
    const calls: Array<{ url: string; body: string }> = [];
    const client = new ListingClient("", ((url: string, init: RequestInit) => {
      calls.push({ url, body: String(init.body) });
      return Promise.resolve(
        new Response(
          JSON.stringify({
            draft_id: "d9",
            published: true,
            retained_ratio: 1.0,
            quality_score: 0.71,
          }),
          { status: 200 },
        ),
      );
    }) as unknown as typeof fetch);
    const result = await client.publish("d9", "final text");
    expect(calls[0].url).toBe("/v1/drafts/d9:publish");
    expect(JSON.parse(calls[0].body)).toEqual({ final_text: "final text" });
    expect(result.retained_ratio).toBe(1.0);
  });

  it("maps 409 onto ApiError", async () => {
    const client = new ListingClient("", (() =>
      Promise.resolve(new Response("{}", { status: 409 }))) as unknown as typeof fetch);
    await expect(client.publish("d1", "x")).rejects.toMatchObject({ status: 409 });
  });
});

describe("ListingClient.fixtures", () => {
  it("loads the fixture gallery", async () => {
    const client = new ListingClient("", (() =>
      Promise.resolve(
        new Response(JSON.stringify([{ name: "a", image_ref: "r", embedding: [1] }]), {
          status: 200,
        }),
      )) as unknown as typeof fetch);
    const fixtures = await client.fixtures();
    expect(fixtures).toHaveLength(1);
    expect(fixtures[0].image_ref).toBe("r");
  });
});
