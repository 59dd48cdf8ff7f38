// Frame-sequence playback by timed image swapping. Frames are fetched as
// blobs and shown through object URLs, so the DOM never exposes the
// server-side media paths (which embed model names).

import { frameUrl, StudyApi } from "./api.js";
import { SequenceMeta } from "./types.js";

export class FramePlayer {
  private objectUrls: string[] = [];
  private timer: number | undefined;
  private index = 0;

  constructor(
    private img: HTMLImageElement,
    private mediaUrl: string,
    private api: StudyApi,
  ) {}

  async load(): Promise<void> {
    const meta: SequenceMeta = await this.api.getSequenceMeta(this.mediaUrl);
    const frames = Math.max(1, meta.count);
    for (let i = 0; i < frames; i++) {
      const resp = await fetch(frameUrl(this.mediaUrl, i));
      if (!resp.ok) break;
      this.objectUrls.push(URL.createObjectURL(await resp.blob()));
    }
    if (this.objectUrls.length === 0) {
      throw new Error("no frames available");
    }
    this.img.src = this.objectUrls[0]!;
    const interval = 1000 / (meta.fps > 0 ? meta.fps : 8);
    if (this.objectUrls.length > 1) {
      this.timer = window.setInterval(() => this.step(), interval);
    }
  }

  private step(): void {
    this.index = (this.index + 1) % this.objectUrls.length;
    this.img.src = this.objectUrls[this.index]!;
  }

  dispose(): void {
    if (this.timer !== undefined) window.clearInterval(this.timer);
    for (const url of this.objectUrls) URL.revokeObjectURL(url);
    this.objectUrls = [];
  }
}
