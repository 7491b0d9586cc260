import { ApiClient } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "http://127.0.0.1:8000";

const root = document.getElementById("root");
if (!root) throw new Error("missing #root element");

new App(root, new ApiClient(apiBase)).start();
