// Browser entry point: pick a bundled pipeline (or paste one) and drive
// a guided session.

import { createApp } from "./main";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const picker = document.getElementById("examples") as HTMLSelectElement;
  const source = document.getElementById("source") as HTMLTextAreaElement;
  const startBtn = document.getElementById("start") as HTMLButtonElement;
  const undoBtn = document.getElementById("undo") as HTMLButtonElement;

  let examples: Record<string, string> = {};
  try {
    examples = await (await fetch("/examples")).json();
  } catch {
    /* examples are a convenience; pasting still works */
  }
  for (const name of Object.keys(examples)) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    picker.appendChild(opt);
  }
  picker.addEventListener("change", () => {
    source.value = examples[picker.value] ?? "";
  });
  if (Object.keys(examples).length) {
    picker.value = Object.keys(examples)[0];
    source.value = examples[picker.value];
  }

  const app = createApp(root);
  startBtn.addEventListener("click", async () => {
    try {
      await app.start(source.value);
      document.getElementById("loader")!.hidden = true;
    } catch (exc) {
      app.toast(`${exc}`);
    }
  });
  undoBtn.addEventListener("click", () => app.undo());
}

boot();
