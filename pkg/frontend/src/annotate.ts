/** Annotation flow: fetch next -> render choices -> submit -> advance.
 *
 * Exactly one choice per instance per annotator: the submit button stays
 * disabled until a choice is made, a per-instance idempotency key makes
 * double submits harmless, and drafts survive network failures locally.
 */

import { ApiClient, ApiError } from "./api.js";
import { sentenceView } from "./render.js";
import { NOT_SURE, type QueueInstance } from "./types.js";

interface Draft {
  choice: string | null;
  comment: string;
  key: string;
}

function freshKey(): string {
  return `k-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

export class AnnotateController {
  private instance: QueueInstance | null = null;
  private labels: string[] = [];
  private done = 0;
  private total = 0;
  private draft: Draft = { choice: null, comment: "", key: freshKey() };
  private busy = false;

  constructor(
    private readonly api: ApiClient,
    private readonly rootEl: HTMLElement,
    private readonly annotator: string,
    private readonly storage: Pick<Storage, "getItem" | "setItem" | "removeItem"> | null =
      typeof localStorage === "undefined" ? null : localStorage,
  ) {}

  private draftKey(uid: string): string {
    return `samasa-draft:${this.annotator}:${uid}`;
  }

  async start(): Promise<void> {
    const next = await this.api.next(this.annotator);
    this.instance = next.instance;
    this.labels = next.labels;
    this.done = next.done;
    this.total = next.total;
    this.draft = { choice: null, comment: "", key: freshKey() };
    if (this.instance && this.storage) {
      const saved = this.storage.getItem(this.draftKey(this.instance.uid));
      if (saved) this.draft = JSON.parse(saved) as Draft;
    }
    this.render();
  }

  private persistDraft(): void {
    if (this.instance && this.storage) {
      this.storage.setItem(this.draftKey(this.instance.uid), JSON.stringify(this.draft));
    }
  }

  private clearDraft(uid: string): void {
    this.storage?.removeItem(this.draftKey(uid));
  }

  choose(label: string): void {
    this.draft.choice = label;
    this.persistDraft();
    this.render();
  }

  setComment(text: string): void {
    this.draft.comment = text;
    this.persistDraft();
  }

  async submit(): Promise<void> {
    if (!this.instance || this.draft.choice === null || this.busy) return;
    const uid = this.instance.uid;
    this.busy = true;
    this.render();
    try {
      await this.api.submit(uid, {
        annotator_id: this.annotator,
        choice: this.draft.choice,
        comment: this.draft.comment,
        idempotency_key: this.draft.key,
      });
      this.clearDraft(uid);
      this.busy = false;
      await this.start(); // advance to the next instance
    } catch (err) {
      // keep the draft, surface the failure, let the user retry
      this.busy = false;
      this.render(err instanceof ApiError ? err.message : String(err));
    }
  }

  render(error?: string): void {
    const root = this.rootEl;
    root.replaceChildren();
    if (this.instance) {
      root.dataset.uid = this.instance.uid;
    } else {
      delete root.dataset.uid;
    }

    const progress = document.createElement("p");
    progress.className = "progress";
    progress.textContent = `${this.done} / ${this.total} annotated`;
    root.appendChild(progress);

    if (error) {
      const banner = document.createElement("div");
      banner.className = "error-banner";
      banner.setAttribute("role", "alert");
      banner.textContent = `submission failed (${error}) — your choice is kept, retry below`;
      root.appendChild(banner);
    }

    if (!this.instance) {
      const doneMsg = document.createElement("p");
      doneMsg.className = "all-done";
      doneMsg.textContent = "No instances left for you. Thank you!";
      root.appendChild(doneMsg);
      return;
    }

    root.appendChild(sentenceView(this.instance.tokens, this.instance.compound_index));

    const choices = document.createElement("div");
    choices.className = "choices";
    for (const label of [...this.labels, NOT_SURE]) {
      const btn = document.createElement("button");
      btn.className = "choice" + (this.draft.choice === label ? " selected" : "");
      btn.textContent = label === NOT_SURE ? "Not sure" : label;
      btn.dataset.label = label;
      btn.addEventListener("click", () => this.choose(label));
      choices.appendChild(btn);
    }
    root.appendChild(choices);

    const comment = document.createElement("textarea");
    comment.className = "comment";
    comment.placeholder = "optional comment (ambiguity, concerns, ...)";
    comment.value = this.draft.comment;
    comment.addEventListener("input", () => this.setComment(comment.value));
    root.appendChild(comment);

    const submit = document.createElement("button");
    submit.className = "submit";
    submit.textContent = this.busy ? "submitting..." : "submit";
    submit.disabled = this.draft.choice === null || this.busy;
    submit.addEventListener("click", () => void this.submit());
    root.appendChild(submit);
  }
}
