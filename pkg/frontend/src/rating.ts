/**
 * ACR rating capture: five labeled options, exactly one selection, and
 * submission that only advances on a server acknowledgement.  Failed
 * submissions surface a retry prompt; duplicates show a notice and advance.
 */

import { ACR_OPTIONS } from "./types.js";

export class RatingPanel {
  private readonly panel: HTMLDivElement;
  private readonly submitButton: HTMLButtonElement;
  private readonly notice: HTMLDivElement;
  private selected: number | null = null;
  private resolveSelection: ((score: number) => void) | undefined;

  constructor(root: HTMLElement) {
    this.panel = document.createElement("div");
    this.panel.className = "sq-rating-panel";
    this.panel.hidden = true;

    const prompt = document.createElement("p");
    prompt.className = "sq-rating-prompt";
    prompt.textContent = "How was the experience of the last sequence?";
    this.panel.appendChild(prompt);

    const options = document.createElement("div");
    options.className = "sq-rating-options";
    for (const option of ACR_OPTIONS) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = "sq-rating-option";
      button.dataset.score = String(option.score);
      button.textContent = option.label;
      button.addEventListener("click", () => this.select(option.score));
      options.appendChild(button);
    }
    this.panel.appendChild(options);

    this.submitButton = document.createElement("button");
    this.submitButton.type = "button";
    this.submitButton.className = "sq-rating-submit";
    this.submitButton.textContent = "Submit rating";
    this.submitButton.disabled = true;
    this.submitButton.addEventListener("click", () => {
      if (this.selected !== null && this.resolveSelection) {
        const resolve = this.resolveSelection;
        this.resolveSelection = undefined;
        resolve(this.selected);
      }
    });
    this.panel.appendChild(this.submitButton);

    this.notice = document.createElement("div");
    this.notice.className = "sq-rating-notice";
    this.panel.appendChild(this.notice);

    root.appendChild(this.panel);
  }

  private select(score: number): void {
    this.selected = score;
    this.submitButton.disabled = false;
    for (const el of this.panel.querySelectorAll<HTMLButtonElement>(".sq-rating-option")) {
      el.classList.toggle("selected", Number(el.dataset.score) === score);
    }
  }

  get submitEnabled(): boolean {
    return !this.submitButton.disabled;
  }

  showNotice(text: string): void {
    this.notice.textContent = text;
  }

  /** Present the options and resolve with the chosen score on submit. */
  collect(): Promise<number> {
    this.selected = null;
    this.submitButton.disabled = true;
    this.notice.textContent = "";
    this.panel.hidden = false;
    for (const el of this.panel.querySelectorAll(".sq-rating-option")) {
      el.classList.remove("selected");
    }
    return new Promise((resolve) => {
      this.resolveSelection = (score) => {
        this.panel.hidden = true;
        resolve(score);
      };
    });
  }

  /** Blocking retry prompt after a failed submission. */
  askRetry(message: string): Promise<void> {
    this.panel.hidden = false;
    this.notice.textContent = message;
    const button = document.createElement("button");
    button.type = "button";
    button.className = "sq-rating-retry";
    button.textContent = "Retry";
    this.notice.appendChild(button);
    return new Promise((resolve) => {
      button.addEventListener("click", () => {
        this.notice.textContent = "";
        this.panel.hidden = true;
        resolve();
      });
    });
  }
}
