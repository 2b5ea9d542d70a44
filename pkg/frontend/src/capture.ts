import type { ApiClient } from "./api.js";
import { captureFilename } from "./filename.js";
import type { JobView, MediaAccepted } from "./types.js";

export interface JobProgress {
  accepted: MediaAccepted;
  job: JobView;
}

/** Poll a job until it settles (done or dead). */
export async function watchJob(
  client: ApiClient,
  jobId: string,
  onUpdate?: (job: JobView) => void,
  opts: { intervalMs?: number; timeoutMs?: number } = {},
): Promise<JobView> {
  const interval = opts.intervalMs ?? 250;
  const deadline = Date.now() + (opts.timeoutMs ?? 60_000);
  for (;;) {
    const job = await client.getJob(jobId);
    onUpdate?.(job);
    if (job.status === "done" || job.status === "dead") return job;
    if (Date.now() > deadline) throw new Error(`job ${jobId} did not settle`);
    await new Promise((r) => setTimeout(r, interval));
  }
}

/**
 * Capture and record actions: each POSTs the picked file under a generated
 * DATE-TIME filename and surfaces job progress. At most one recording may be
 * in flight at a time.
 */
export class CaptureController {
  private recording = false;

  constructor(private client: ApiClient, private now: () => Date = () => new Date()) {}

  get recordingActive(): boolean {
    return this.recording;
  }

  async captureImage(payload: Blob, onUpdate?: (job: JobView) => void): Promise<JobProgress> {
    const accepted = await this.client.uploadMedia(captureFilename("image", this.now()), payload);
    const job = await watchJob(this.client, accepted.job_id, onUpdate);
    return { accepted, job };
  }

  async recordAudio(payload: Blob, onUpdate?: (job: JobView) => void): Promise<JobProgress> {
    if (this.recording) throw new Error("a recording is already in progress");
    this.recording = true;
    try {
      const accepted = await this.client.uploadMedia(captureFilename("audio", this.now()), payload);
      const job = await watchJob(this.client, accepted.job_id, onUpdate);
      return { accepted, job };
    } finally {
      this.recording = false;
    }
  }
}
