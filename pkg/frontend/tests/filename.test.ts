import { describe, expect, it } from "vitest";
import { captureFilename, FILENAME_RE } from "../src/filename.js";

describe("captureFilename", () => {
  it("formats a UTC DATE-TIME stem with the kind's extension", () => {
    const at = new Date(Date.UTC(2024, 4, 14, 13, 5, 22));
    expect(captureFilename("image", at)).toBe("20240514-130522.jpg");
    expect(captureFilename("audio", at)).toBe("20240514-130522.wav");
  });

  it("zero-pads every field", () => {
    const at = new Date(Date.UTC(2024, 0, 2, 3, 4, 5));
    expect(captureFilename("image", at)).toBe("20240102-030405.jpg");
  });

  it("always matches the upload contract", () => {
    for (let i = 0; i < 50; i++) {
      const at = new Date(Date.UTC(2024, i % 12, (i % 27) + 1, i % 24, i % 60, (i * 7) % 60));
      expect(captureFilename(i % 2 ? "image" : "audio", at)).toMatch(FILENAME_RE);
    }
  });
});
