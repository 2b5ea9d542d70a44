import { ApiClient, ApiError } from "./api.js";
import type { ContactRecord, ContactSummary, ConversationView } from "./types.js";

export interface BrowserEvents {
  onContacts?: (contacts: ContactSummary[]) => void;
  onRecord?: (record: ContactRecord | null) => void;
  onOrphans?: (orphans: ConversationView[]) => void;
  onError?: (message: string) => void;
}

/**
 * Memory browser state: contacts, one open record, orphans. Edits apply
 * optimistically and roll back when the server answers 422.
 */
export class MemoryBrowser {
  contacts: ContactSummary[] = [];
  record: ContactRecord | null = null;
  orphans: ConversationView[] = [];

  constructor(private client: ApiClient, private events: BrowserEvents = {}) {}

  async refresh(q?: string): Promise<void> {
    this.contacts = await this.client.listContacts(q);
    this.events.onContacts?.(this.contacts);
    this.orphans = await this.client.listOrphans();
    this.events.onOrphans?.(this.orphans);
  }

  async open(personId: string): Promise<ContactRecord> {
    this.record = await this.client.getContact(personId);
    this.events.onRecord?.(this.record);
    return this.record;
  }

  /** Optimistic rename; resolves false (with rollback) when rejected. */
  async rename(personId: string, displayName: string): Promise<boolean> {
    const contact = this.contacts.find((c) => c.person_id === personId);
    const previousList = contact?.display_name;
    const previousRecord = this.record?.display_name;
    if (contact) contact.display_name = displayName;
    if (this.record?.person_id === personId) this.record.display_name = displayName;
    this.events.onContacts?.(this.contacts);
    this.events.onRecord?.(this.record);
    try {
      const updated = await this.client.patchContact(personId, { display_name: displayName });
      if (this.record?.person_id === personId) {
        this.record = updated;
        this.events.onRecord?.(this.record);
      }
      return true;
    } catch (err) {
      if (contact && previousList !== undefined) contact.display_name = previousList;
      if (this.record?.person_id === personId && previousRecord !== undefined) {
        this.record.display_name = previousRecord;
      }
      this.events.onContacts?.(this.contacts);
      this.events.onRecord?.(this.record);
      this.surface(err);
      return false;
    }
  }

  /** Optimistic one-sentence summary edit with rollback on 422. */
  async editSummary(personId: string, conversationId: string, summary: string): Promise<boolean> {
    const conv = this.record?.person_id === personId
      ? this.record.conversations.find((c) => c.conversation_id === conversationId)
      : undefined;
    const previous = conv?.short_summary;
    if (conv) conv.short_summary = summary;
    this.events.onRecord?.(this.record);
    try {
      const updated = await this.client.patchContact(personId, {
        conversations: [{ conversation_id: conversationId, short_summary: summary }],
      });
      this.record = updated;
      this.events.onRecord?.(this.record);
      return true;
    } catch (err) {
      if (conv && previous !== undefined) conv.short_summary = previous;
      this.events.onRecord?.(this.record);
      this.surface(err);
      return false;
    }
  }

  async attachOrphan(conversationId: string, personId: string): Promise<boolean> {
    try {
      await this.client.attachOrphan(conversationId, personId);
      await this.refresh();
      if (this.record?.person_id === personId) await this.open(personId);
      return true;
    } catch (err) {
      this.surface(err);
      return false;
    }
  }

  private surface(err: unknown): void {
    const message = err instanceof ApiError ? err.message : String(err);
    this.events.onError?.(message);
  }
}
