/** Prediction inspector: type a sentence, pick the compound token, read the
 * model's report (label, confidence bars, tag chips, heatmaps). */

import { ApiClient, ApiError } from "./api.js";
import { reportView } from "./render.js";

export class InspectController {
  private tokens: string[] = [];
  private compoundIndex: number | null = null;
  private error: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly rootEl: HTMLElement,
  ) {}

  setSentence(text: string): void {
    this.tokens = text.trim().split(/\s+/).filter((t) => t.length > 0);
    this.compoundIndex = null;
    this.error = null;
    this.render();
  }

  pickCompound(index: number): void {
    this.compoundIndex = index;
    this.error = null;
    this.render();
  }

  canSubmit(): boolean {
    if (this.compoundIndex === null) return false;
    const tok = this.tokens[this.compoundIndex];
    return tok !== undefined && tok.split("-").filter((p) => p.length > 0).length === 2;
  }

  async inspect(): Promise<void> {
    if (!this.canSubmit()) return;
    try {
      const report = await this.api.predict(this.tokens, this.compoundIndex!);
      this.error = null;
      this.render(reportView(report));
    } catch (err) {
      this.error = err instanceof ApiError ? err.message : String(err);
      this.render();
    }
  }

  render(reportEl?: HTMLElement): void {
    const root = this.rootEl;
    root.replaceChildren();

    const input = document.createElement("input");
    input.className = "sentence-input";
    input.placeholder = "sentence with one compound token (components joined by -)";
    input.value = this.tokens.join(" ");
    input.addEventListener("change", () => this.setSentence(input.value));
    root.appendChild(input);

    if (this.tokens.length > 0) {
      const hint = document.createElement("p");
      hint.className = "hint";
      hint.textContent = "pick the compound token:";
      root.appendChild(hint);
      const picker = document.createElement("div");
      picker.className = "token-picker";
      this.tokens.forEach((tok, i) => {
        const btn = document.createElement("button");
        const isCompoundShaped = tok.split("-").filter((p) => p.length > 0).length === 2;
        btn.className = "token-choice" + (this.compoundIndex === i ? " selected" : "");
        btn.textContent = tok;
        btn.disabled = !isCompoundShaped;
        btn.dataset.index = String(i);
        btn.addEventListener("click", () => this.pickCompound(i));
        picker.appendChild(btn);
      });
      root.appendChild(picker);
    }

    const submit = document.createElement("button");
    submit.className = "inspect-submit";
    submit.textContent = "inspect";
    submit.disabled = !this.canSubmit();
    submit.addEventListener("click", () => void this.inspect());
    root.appendChild(submit);

    if (this.error) {
      const banner = document.createElement("div");
      banner.className = "error-inline";
      banner.textContent = this.error;
      root.appendChild(banner);
    }
    if (reportEl) root.appendChild(reportEl);
  }
}
