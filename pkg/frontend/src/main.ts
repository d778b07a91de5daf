import { HttpScoreClient } from "./api";
import { CoachController } from "./controller";
import { renderCoach } from "./view";

const base =
  (window as { ASKWELL_API?: string }).ASKWELL_API ?? "http://127.0.0.1:8023";

const controller = new CoachController(new HttpScoreClient(base));
const panel = document.getElementById("panel") as HTMLElement;
const title = document.getElementById("title") as HTMLInputElement;
const body = document.getElementById("body") as HTMLTextAreaElement;

const sync = () => controller.setDraft(title.value, body.value);
title.addEventListener("input", sync);
body.addEventListener("input", sync);

controller.onChange((state) => {
  renderCoach(panel, state, { onChip: (t) => controller.applyChip(t) });
});

// Baseline score for the empty editor on load.
controller.refresh();
