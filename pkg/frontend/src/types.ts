// Wire types mirroring docs/wire/*.schema.json. The console talks only to
// these documented endpoints; contract tests validate samples against the
// schema files.

export interface DisplaySnapshot {
  name: string | null;
  short_summary: string | null;
  revision: number;
  updated_at: string | null;
}

export interface MediaAccepted {
  media_id: string;
  job_id: string;
}

export type JobStatus = "queued" | "running" | "done" | "failed" | "dead";

export interface JobView {
  job_id: string;
  kind: string;
  media_id: string | null;
  priority: number;
  status: JobStatus;
  attempts: number;
  enqueued_at: string;
  error: string | null;
}

export interface ContactSummary {
  person_id: string;
  display_name: string;
  n_conversations: number;
  last_seen: string;
  thumbnail: string | null;
}

export interface TranscriptView {
  slices: [string, string][];
  merged_text: string;
  timestamped_text: string;
}

export interface ConversationView {
  conversation_id: string;
  started_at: string;
  short_summary: string;
  note: string[];
  todos: string[];
  transcript: TranscriptView;
  source_media: string[];
  extraction_failed: boolean;
}

export interface ContactRecord {
  person_id: string;
  display_name: string;
  created_at: string;
  thumbnail: string | null;
  embeddings: { embedding_id: string; source_media: string | null }[];
  conversations: ConversationView[];
}

export interface ConversationEdit {
  conversation_id: string;
  note?: string[];
  short_summary?: string;
  todos?: string[];
}

export interface ContactPatch {
  display_name?: string;
  conversations?: ConversationEdit[];
}
