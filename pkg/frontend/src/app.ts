import { ReviewApi } from "./api.js";
import { ReviewController } from "./controller.js";
import { actionForKey } from "./keyboard.js";
import { pickInstance } from "./hitTest.js";
import type { InstanceBox } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  parent: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  parent.appendChild(node);
  return node;
}

/**
 * DOM shell around ReviewController. The frame itself arrives as a
 * server-rendered overlay PNG; this layer adds only interaction
 * chrome: bbox outlines, labels, the review cursor and a status bar.
 */
export class ReviewApp {
  private readonly root: HTMLElement;
  private readonly api: ReviewApi;
  private readonly controller: ReviewController;
  private readonly image: HTMLImageElement;
  private readonly chrome: HTMLDivElement;
  private readonly status: HTMLDivElement;
  private readonly hint: HTMLDivElement;
  private readonly auditView: HTMLPreElement;
  private instances: InstanceBox[] = [];
  private cursor: InstanceBox | null = null;

  constructor(root: HTMLElement, api: ReviewApi, controller: ReviewController) {
    this.root = root;
    this.api = api;
    this.controller = controller;
    const stage = el("div", "stage", root);
    stage.style.position = "relative";
    this.image = el("img", "frame", stage);
    this.image.draggable = false;
    this.chrome = el("div", "chrome", stage);
    this.chrome.style.position = "absolute";
    this.chrome.style.inset = "0";
    this.status = el("div", "status", root);
    this.hint = el("div", "hint", root);
    this.auditView = el("pre", "audit", root);
    this.image.addEventListener("click", (ev) => this.onClick(ev));
    document.addEventListener("keydown", (ev) => this.onKey(ev));
  }

  static async mount(
    root: HTMLElement,
    baseUrl: string,
    sessionId: string,
  ): Promise<ReviewApp> {
    const api = new ReviewApi(baseUrl);
    const sequences = await api.listSequences();
    const sequence = sequences[0];
    if (sequence === undefined) {
      throw new Error("service exposes no sequences");
    }
    const state = await api.sessionState(sessionId);
    const app = new ReviewApp(
      root,
      api,
      new ReviewController(api, sessionId, sequence, state, {
        events: {
          onHint: (message) => app.showHint(message),
          onNotice: (message) => app.showHint(message),
          onStatus: () => app.renderStatus(),
        },
      }),
    );
    await app.showFrame();
    return app;
  }

  async showFrame(): Promise<void> {
    const view = this.controller.view;
    this.image.src = this.api.frameImageUrl(
      this.controller.sequence.name,
      view.frameId,
    );
    this.instances = await this.api.frameInstances(
      this.controller.sequence.name,
      view.frameId,
    );
    this.cursor = this.controller.nextUnreviewed(this.instances);
    this.render();
  }

  private showHint(message: string): void {
    this.hint.textContent = message;
    this.render();
  }

  /** Map a client-space click onto frame pixel coordinates. */
  private frameCoords(ev: MouseEvent): { x: number; y: number } {
    const rect = this.image.getBoundingClientRect();
    const scaleX = rect.width > 0 ? this.image.naturalWidth / rect.width : 1;
    const scaleY = rect.height > 0 ? this.image.naturalHeight / rect.height : 1;
    return {
      x: Math.floor((ev.clientX - rect.left) * scaleX),
      y: Math.floor((ev.clientY - rect.top) * scaleY),
    };
  }

  private onClick(ev: MouseEvent): void {
    const { x, y } = this.frameCoords(ev);
    if (this.controller.view.mode === "target-pick") {
      const hit = this.controller.pickTarget(x, y, this.instances);
      if (hit !== null) {
        this.cursor = hit;
        this.showHint(`target set to instance ${hit.index}`);
      }
    } else {
      this.cursor = pickInstance(this.instances, x, y);
      if (this.cursor === null) {
        this.showHint("click landed on background, nothing selected");
      }
    }
    this.render();
  }

  private onKey(ev: KeyboardEvent): void {
    const action = actionForKey(ev.key, this.controller.view.mode);
    if (action === null) return;
    ev.preventDefault();
    switch (action.type) {
      case "next-frame":
        this.controller.view.nextFrame();
        void this.showFrame();
        return;
      case "prev-frame":
        this.controller.view.prevFrame();
        void this.showFrame();
        return;
      case "toggle":
        this.controller.view.toggle(action.layer);
        break;
      case "mode":
        this.controller.view.setMode(action.mode);
        this.cursor = this.controller.nextUnreviewed(this.instances);
        break;
      case "verdict":
        if (this.cursor !== null) {
          this.controller.mark(this.cursor, action.verdict);
          this.cursor = this.controller.nextUnreviewed(this.instances);
        } else {
          this.showHint("no instance under review on this frame");
        }
        break;
      case "missed":
        this.controller.markMissed();
        break;
    }
    this.render();
  }

  private render(): void {
    this.renderChrome();
    this.renderStatus();
    this.auditView.textContent = this.controller.audit.render();
  }

  private renderChrome(): void {
    const view = this.controller.view;
    this.chrome.replaceChildren();
    // baked hull curves live in the server overlay; the toggle dims them
    this.image.style.opacity = view.overlays.hulls ? "1" : "0.35";
    if (!view.overlays.bboxes && !view.overlays.labels) return;
    const rect = this.image.getBoundingClientRect();
    const scaleX =
      this.image.naturalWidth > 0 ? rect.width / this.image.naturalWidth : 1;
    const scaleY =
      this.image.naturalHeight > 0 ? rect.height / this.image.naturalHeight : 1;
    for (const inst of this.instances) {
      const [x0, y0, x1, y1] = inst.bbox;
      const marks = this.controller.marksFor(view.frameId, inst.index);
      const isTarget =
        this.controller.target !== null &&
        this.controller.target.frame === view.frameId &&
        this.controller.target.instance === inst.index;
      if (view.overlays.bboxes) {
        const box = el("div", "bbox", this.chrome);
        box.style.position = "absolute";
        box.style.left = `${x0 * scaleX}px`;
        box.style.top = `${y0 * scaleY}px`;
        box.style.width = `${(x1 - x0 + 1) * scaleX}px`;
        box.style.height = `${(y1 - y0 + 1) * scaleY}px`;
        box.style.border =
          this.cursor !== null && this.cursor.index === inst.index
            ? "2px solid #ff0"
            : "1px solid #0f0";
        if (isTarget) box.style.border = "2px solid #f0f";
        if (marks.flagged) box.style.borderStyle = "dashed";
      }
      if (view.overlays.labels) {
        const label = el("div", "label", this.chrome);
        label.style.position = "absolute";
        label.style.left = `${x0 * scaleX}px`;
        label.style.top = `${Math.max(0, y0 * scaleY - 14)}px`;
        label.style.font = "11px monospace";
        label.style.color = "#0f0";
        const verdict = marks.verdict === null ? "" : ` ${marks.verdict}`;
        label.textContent = `#${inst.index}${verdict}${marks.flagged ? " flagged" : ""}`;
      }
    }
  }

  private renderStatus(): void {
    const view = this.controller.view;
    this.status.textContent =
      `${this.controller.sequence.name} frame ${view.frameId} ` +
      `(${view.frameIndex + 1}/${view.frames.length}) mode=${view.mode} ` +
      `pending=${view.pendingEdits} queue=${this.controller.queueStatus} ` +
      `revision=${this.controller.revision}`;
  }
}
