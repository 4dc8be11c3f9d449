/** Two-route single-page app: #/annotate and #/inspect. The API base comes
 * from the ?api= query parameter (persisted to localStorage) and defaults to
 * the local service. */

import { AnnotateController } from "./annotate.js";
import { ApiClient } from "./api.js";
import { InspectController } from "./inspect.js";

const DEFAULT_API = "http://127.0.0.1:8570";

function apiBase(): string {
  const fromQuery = new URLSearchParams(location.search).get("api");
  if (fromQuery) {
    localStorage.setItem("samasa-api", fromQuery);
    return fromQuery;
  }
  return localStorage.getItem("samasa-api") ?? DEFAULT_API;
}

function annotatorId(): string {
  const fromQuery = new URLSearchParams(location.search).get("annotator");
  if (fromQuery) {
    localStorage.setItem("samasa-annotator", fromQuery);
    return fromQuery;
  }
  let id = localStorage.getItem("samasa-annotator");
  if (!id) {
    id = `anno-${Math.random().toString(36).slice(2, 8)}`;
    localStorage.setItem("samasa-annotator", id);
  }
  return id;
}

function route(): void {
  const main = document.getElementById("main");
  if (!main) return;
  const api = new ApiClient(apiBase());
  const hash = location.hash || "#/annotate";
  for (const link of document.querySelectorAll("nav a")) {
    link.classList.toggle("active", link.getAttribute("href") === hash);
  }
  main.replaceChildren();
  if (hash.startsWith("#/inspect")) {
    new InspectController(api, main).render();
  } else {
    void new AnnotateController(api, main, annotatorId()).start();
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
