import { ListingClient } from "./api.js";
import { ComposerSession } from "./session.js";
import { ComposerView } from "./view.js";
import type { FixtureEntry } from "./types.js";

// Default chips mirror the demo taxonomy's phone template; the trace echo
// shows the exact template actually used for any fixture.
const DEFAULT_TEMPLATE = [
  "Brand",
  "Model",
  "Storage Capacity",
  "Color",
  "Version",
  "Screen Condition",
];

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const client = new ListingClient("");

  const healthLine = document.getElementById("health");
  try {
    const health = await client.health();
    if (healthLine) {
      healthLine.textContent = `service ok — ${health.products} products, index ${health.index_size}`;
    }
  } catch {
    if (healthLine) healthLine.textContent = "service unreachable";
  }

  let fixtures: FixtureEntry[] = [];
  try {
    fixtures = await client.fixtures("fixtures.json");
  } catch {
    root.textContent =
      "No fixtures.json found next to the bundle. Generate one with: listingkit fixtures --out <ui dist dir>";
    return;
  }
  if (fixtures.length === 0) {
    root.textContent = "fixtures.json is empty";
    return;
  }

  const session = new ComposerSession(client, fixtures[0], DEFAULT_TEMPLATE);
  new ComposerView(root, fixtures, session, {
    onFixtureChange: (fixture) => session.setFixture(fixture),
    onGenerate: () => void session.start(),
    onCancel: () => session.cancel(),
    onRetry: () => void session.retry(),
    onPublish: () => void session.publish(),
  });
}

void boot();
