/** Browser entry point: boots the app against the same-origin service. */

import { ApiClient, ChatApp, sessionIdFromLocation } from "./app.js";

const root = document.getElementById("root");
if (!root) throw new Error("missing #root element");

const app = new ChatApp(root, new ApiClient(""), {
  sessionId: sessionIdFromLocation(window.location),
  onSessionCreated(id) {
    const url = new URL(window.location.href);
    url.searchParams.set("session", id);
    window.history.replaceState(null, "", url);
  },
});

void app.boot();
