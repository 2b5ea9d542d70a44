// Uploads are keyed by a UTC DATE-TIME filename the server parses.

export function captureFilename(kind: "image" | "audio", at: Date = new Date()): string {
  const p = (n: number) => String(n).padStart(2, "0");
  const stamp =
    `${at.getUTCFullYear()}${p(at.getUTCMonth() + 1)}${p(at.getUTCDate())}` +
    `-${p(at.getUTCHours())}${p(at.getUTCMinutes())}${p(at.getUTCSeconds())}`;
  return `${stamp}.${kind === "image" ? "jpg" : "wav"}`;
}

export const FILENAME_RE = /^\d{8}-\d{6}\.(jpg|png|wav)$/;
