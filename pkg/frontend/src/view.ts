import type { ComposerSession, SessionState } from "./session.js";
import { STATUS_BADGES } from "./session.js";
import type { FixtureEntry } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface ViewHooks {
  onFixtureChange(fixture: FixtureEntry): void;
  onGenerate(): void;
  onCancel(): void;
  onRetry(): void;
  onPublish(): void;
}

export class ComposerView {
  private root: HTMLElement;
  private fixtureSelect = el("select", "fixture-select");
  private chipsRow = el("div", "chips");
  private chipInput = el("input", "chip-input");
  private liveText = el("pre", "live-text");
  private statusBadge = el("span", "badge");
  private noticeBox = el("div", "notice");
  private errorBox = el("div", "error");
  private editArea = el("textarea", "edit-area");
  private publishButton = el("button", "primary", "Publish");
  private publishResult = el("div", "publish-result");
  private generateButton = el("button", "primary", "Generate");
  private cancelButton = el("button", "", "Cancel");
  private retryButton = el("button", "", "Retry");
  private tracePanel = el("div", "trace");

  constructor(
    root: HTMLElement,
    private fixtures: FixtureEntry[],
    private session: ComposerSession,
    private hooks: ViewHooks,
  ) {
    this.root = root;
    this.build();
    session.subscribe((state) => this.render(state));
    this.render(session.state());
  }

  private build(): void {
    const pickRow = el("div", "row");
    pickRow.append(el("label", "", "Product fixture: "), this.fixtureSelect);
    for (const fixture of this.fixtures) {
      const option = el("option");
      option.value = fixture.image_ref;
      option.textContent = fixture.name;
      this.fixtureSelect.append(option);
    }
    this.fixtureSelect.addEventListener("change", () => {
      const fixture = this.fixtures.find((f) => f.image_ref === this.fixtureSelect.value);
      if (fixture) this.hooks.onFixtureChange(fixture);
    });

    const chipsSection = el("section", "panel");
    chipsSection.append(el("h2", "", "Attribute template"));
    chipsSection.append(this.chipsRow);
    const chipControls = el("div", "row");
    this.chipInput.placeholder = "add attribute…";
    const addButton = el("button", "", "Add");
    addButton.addEventListener("click", () => {
      this.session.addChip(this.chipInput.value);
      this.chipInput.value = "";
    });
    const resetButton = el("button", "", "Reset");
    resetButton.addEventListener("click", () => this.session.resetChips());
    chipControls.append(this.chipInput, addButton, resetButton);
    chipsSection.append(chipControls);

    const actions = el("div", "row actions");
    this.generateButton.addEventListener("click", () => this.hooks.onGenerate());
    this.cancelButton.addEventListener("click", () => this.hooks.onCancel());
    this.retryButton.addEventListener("click", () => this.hooks.onRetry());
    actions.append(this.generateButton, this.cancelButton, this.retryButton);

    const livePanel = el("section", "panel");
    const liveHeader = el("div", "row");
    liveHeader.append(el("h2", "", "Generated description"), this.statusBadge);
    livePanel.append(liveHeader, this.liveText, this.noticeBox, this.errorBox);

    const editPanel = el("section", "panel");
    editPanel.append(el("h2", "", "Your edit"));
    this.editArea.rows = 5;
    this.editArea.addEventListener("input", () => this.session.setEditText(this.editArea.value));
    this.publishButton.addEventListener("click", () => this.hooks.onPublish());
    editPanel.append(this.editArea, this.publishButton, this.publishResult);

    this.root.append(pickRow, chipsSection, actions, livePanel, editPanel, this.tracePanel);
  }

  private render(state: Readonly<SessionState>): void {
    this.renderChips(state);
    this.liveText.textContent = state.liveText;
    this.statusBadge.textContent =
      state.phase === "streaming" ? "streaming" : state.status ?? state.phase;
    this.statusBadge.className = `badge badge-${
      state.phase === "streaming"
        ? "streaming"
        : state.status
          ? (STATUS_BADGES[state.status] ?? "unknown")
          : state.phase
    }`;
    this.noticeBox.textContent = state.notice ?? "";
    this.noticeBox.style.display = state.notice ? "block" : "none";
    this.errorBox.textContent = state.error ?? "";
    this.errorBox.style.display = state.error ? "block" : "none";
    this.retryButton.style.display = state.canRetry ? "inline-block" : "none";
    this.cancelButton.style.display = state.phase === "streaming" ? "inline-block" : "none";
    this.generateButton.textContent = state.generationCount > 0 ? "Regenerate" : "Generate";
    this.generateButton.disabled = state.phase === "streaming";

    if (this.editArea.value !== state.editText) this.editArea.value = state.editText;
    this.publishButton.disabled = !this.session.canPublish();
    if (state.published) {
      const ratio = state.published.retained_ratio;
      const quality = state.published.quality_score;
      this.publishResult.textContent =
        `Published. Retained ${(ratio ?? 0) * 100}% of the generated text; ` +
        `quality score ${quality === null ? "n/a" : Math.round(quality * 1000) / 10}.`;
    } else {
      this.publishResult.textContent = "";
    }
    this.renderTrace(state);
  }

  private renderChips(state: Readonly<SessionState>): void {
    this.chipsRow.replaceChildren();
    state.chips.forEach((name, i) => {
      const chip = el("span", "chip");
      chip.append(el("span", "chip-name", name));
      const left = el("button", "chip-btn", "◀");
      left.title = "move earlier";
      left.addEventListener("click", () => this.session.moveChip(i, i - 1));
      const right = el("button", "chip-btn", "▶");
      right.title = "move later";
      right.addEventListener("click", () => this.session.moveChip(i, i + 1));
      const remove = el("button", "chip-btn chip-remove", "×");
      remove.title = `remove ${name}`;
      remove.addEventListener("click", () => this.session.removeChip(name));
      chip.append(left, right, remove);
      this.chipsRow.append(chip);
    });
  }

  private renderTrace(state: Readonly<SessionState>): void {
    this.tracePanel.replaceChildren();
    if (!state.trace) return;
    const heading = el("h2", "", `Pipeline trace — variant ${state.trace.variant}`);
    this.tracePanel.append(heading);
    const table = el("table", "trace-table");
    const head = el("tr");
    for (const title of ["stage", "outcome", "ms", "fallback"]) {
      head.append(el("th", "", title));
    }
    table.append(head);
    for (const stage of state.trace.stages) {
      const row = el("tr", stage.fallback_taken ? "fallback-row" : "");
      row.append(
        el("td", "", stage.stage),
        el("td", "", stage.outcome),
        el("td", "", stage.duration_ms.toFixed(2)),
        el("td", "", stage.fallback_taken ? "yes" : ""),
      );
      table.append(row);
    }
    this.tracePanel.append(table);
    const details = el("details");
    details.append(el("summary", "", "Instruction sent to the generator"));
    details.append(el("pre", "instruction-echo", state.trace.instruction));
    this.tracePanel.append(details);
  }
}
