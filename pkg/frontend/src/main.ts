import { ApiClient } from "./api.js";
import { MemoryBrowser } from "./browser.js";
import { CaptureController } from "./capture.js";
import { renderOverlay, setStale, type OverlayElements } from "./overlay.js";
import { DisplayPoller, MIN_POLL_INTERVAL_MS } from "./poller.js";
import type { ContactRecord, ContactSummary, ConversationView, JobView } from "./types.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function toast(message: string): void {
  const area = byId<HTMLDivElement>("toasts");
  const item = document.createElement("div");
  item.className = "toast";
  item.textContent = message;
  area.appendChild(item);
  setTimeout(() => item.remove(), 6000);
}

function jobLine(job: JobView): string {
  const error = job.error ? ` — ${job.error}` : "";
  return `${job.kind} · ${job.status} (attempt ${job.attempts})${error}`;
}

window.addEventListener("load", () => {
  const token = new URLSearchParams(window.location.search).get("token") ?? undefined;
  const client = new ApiClient({ token });
  const capture = new CaptureController(client);

  // -- overlay ---------------------------------------------------------------

  const overlayEls: OverlayElements = {
    name: byId("overlay-name"),
    summary: byId("overlay-summary"),
    meta: byId("overlay-meta"),
    staleBadge: byId("overlay-stale"),
  };
  const poller = new DisplayPoller(client, {
    onSnapshot: (snapshot) => renderOverlay(overlayEls, snapshot),
    onStale: (stale) => setStale(overlayEls, stale),
  });
  const intervalInput = byId<HTMLInputElement>("poll-interval");
  intervalInput.value = String(poller.interval);
  intervalInput.min = String(MIN_POLL_INTERVAL_MS);
  intervalInput.onchange = () => {
    poller.setInterval(Number(intervalInput.value) || 2000);
    intervalInput.value = String(poller.interval);
  };
  poller.start();

  // -- capture / record -------------------------------------------------------

  const jobLog = byId<HTMLUListElement>("job-log");
  const progress = (job: JobView) => {
    const existing = document.getElementById(`job-${job.job_id}`);
    if (existing) {
      existing.textContent = jobLine(job);
      return;
    }
    const item = document.createElement("li");
    item.id = `job-${job.job_id}`;
    item.textContent = jobLine(job);
    jobLog.prepend(item);
  };

  const captureInput = byId<HTMLInputElement>("capture-file");
  byId<HTMLButtonElement>("capture-btn").onclick = async () => {
    const file = captureInput.files?.[0];
    if (!file) return toast("pick an image file first");
    try {
      const { job } = await capture.captureImage(file, progress);
      if (job.status === "dead") toast(`capture failed: ${job.error}`);
      await browser.refresh();
    } catch (err) {
      toast(String(err));
    }
  };

  const recordInput = byId<HTMLInputElement>("record-file");
  const recordBtn = byId<HTMLButtonElement>("record-btn");
  recordBtn.onclick = async () => {
    const file = recordInput.files?.[0];
    if (!file) return toast("pick an audio file first");
    recordBtn.disabled = true;
    try {
      const { job } = await capture.recordAudio(file, progress);
      if (job.status === "dead") toast(`recording failed: ${job.error}`);
      await browser.refresh();
    } catch (err) {
      toast(String(err));
    } finally {
      recordBtn.disabled = false;
    }
  };

  // -- memory browser -----------------------------------------------------------

  const contactList = byId<HTMLUListElement>("contact-list");
  const recordPane = byId<HTMLDivElement>("record-pane");
  const orphanList = byId<HTMLUListElement>("orphan-list");

  const renderContacts = (contacts: ContactSummary[]) => {
    contactList.replaceChildren(...contacts.map((c) => {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = "#";
      link.textContent = `${c.display_name} (${c.n_conversations})`;
      link.onclick = (e) => {
        e.preventDefault();
        void browser.open(c.person_id);
      };
      item.appendChild(link);
      const seen = document.createElement("span");
      seen.className = "muted";
      seen.textContent = ` last seen ${c.last_seen}`;
      item.appendChild(seen);
      return item;
    }));
  };

  const renderRecord = (record: ContactRecord | null) => {
    if (!record) {
      recordPane.replaceChildren();
      return;
    }
    recordPane.replaceChildren();
    const title = document.createElement("h3");
    title.textContent = record.display_name;
    title.id = "record-name";
    recordPane.appendChild(title);

    const renameRow = document.createElement("div");
    const renameInput = document.createElement("input");
    renameInput.value = record.display_name;
    renameInput.id = "rename-input";
    const renameBtn = document.createElement("button");
    renameBtn.textContent = "rename";
    renameBtn.onclick = () => void browser.rename(record.person_id, renameInput.value);
    renameRow.append(renameInput, renameBtn);
    recordPane.appendChild(renameRow);

    for (const conv of record.conversations) {
      const box = document.createElement("details");
      const head = document.createElement("summary");
      head.textContent = `${conv.started_at} — ${conv.short_summary}`;
      box.appendChild(head);

      const summaryInput = document.createElement("input");
      summaryInput.value = conv.short_summary;
      const summaryBtn = document.createElement("button");
      summaryBtn.textContent = "save summary";
      summaryBtn.onclick = () =>
        void browser.editSummary(record.person_id, conv.conversation_id, summaryInput.value);
      box.append(summaryInput, summaryBtn);

      const note = document.createElement("ul");
      note.replaceChildren(...conv.note.map((line) => {
        const li = document.createElement("li");
        li.textContent = line;
        return li;
      }));
      box.appendChild(note);

      if (conv.todos.length) {
        const todos = document.createElement("p");
        todos.textContent = `to-do: ${conv.todos.join("; ")}`;
        box.appendChild(todos);
      }
      const transcript = document.createElement("pre");
      transcript.textContent = conv.transcript.timestamped_text;
      box.appendChild(transcript);
      recordPane.appendChild(box);
    }
  };

  const renderOrphans = (orphans: ConversationView[]) => {
    orphanList.replaceChildren(...orphans.map((o) => {
      const item = document.createElement("li");
      item.textContent = `${o.started_at} — ${o.short_summary || o.transcript.merged_text.slice(0, 60)} `;
      const attach = document.createElement("button");
      attach.textContent = "attach to open contact";
      attach.onclick = () => {
        if (!browser.record) return toast("open a contact first");
        void browser.attachOrphan(o.conversation_id, browser.record.person_id);
      };
      item.appendChild(attach);
      return item;
    }));
  };

  const browser = new MemoryBrowser(client, {
    onContacts: renderContacts,
    onRecord: renderRecord,
    onOrphans: renderOrphans,
    onError: toast,
  });

  byId<HTMLInputElement>("contact-search").oninput = (e) => {
    void browser.refresh((e.target as HTMLInputElement).value || undefined);
  };
  void browser.refresh();
});
