import type { DisplaySnapshot } from "./types.js";

export interface OverlayElements {
  name: HTMLElement;
  summary: HTMLElement;
  meta: HTMLElement;
  staleBadge: HTMLElement;
}

/** Render the AR overlay stand-in; flashes on every revision change. */
export function renderOverlay(el: OverlayElements, snapshot: DisplaySnapshot): void {
  el.name.textContent = snapshot.name ?? "(nobody recognized yet)";
  el.summary.textContent = snapshot.short_summary ?? "";
  el.meta.textContent = `rev ${snapshot.revision}` +
    (snapshot.updated_at ? ` · ${snapshot.updated_at}` : "");
  el.name.classList.remove("flash");
  void (el.name as HTMLElement).offsetWidth; // restart the CSS animation
  el.name.classList.add("flash");
}

export function setStale(el: OverlayElements, stale: boolean): void {
  el.staleBadge.hidden = !stale;
}
