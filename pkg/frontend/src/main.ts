/** Browser entry point: ?api=<service base url> selects the backend. */

import { StudyApi } from "./api.js";
import { StudyApp } from "./app.js";
import { HtmlVideoLoader } from "./player.js";

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const apiBase = params.get("api") ?? "http://127.0.0.1:8321";
  const participant = params.get("participant") ?? undefined;
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");

  const app = new StudyApp(root, new StudyApi(apiBase), {
    loader: new HtmlVideoLoader(),
  });
  app
    .run(participant)
    .then((result) => {
      console.log(`submitted ${result.submitted.length} ratings`);
    })
    .catch((err) => {
      const banner = document.createElement("div");
      banner.className = "sq-error";
      banner.textContent = `study failed: ${String(err)}`;
      root.appendChild(banner);
    });
}

main();
