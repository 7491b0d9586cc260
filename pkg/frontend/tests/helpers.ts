// Shared DOM-test utilities.

import { request as httpRequest } from "node:http";

/** Minimal fetch over node:http for tests that talk to a live server.
 * One fresh connection per request: reusing keep-alive sockets races the
 * server's idle timeout and produces sporadic hang-ups mid-suite. The app
 * under test still drives the real DOM, only the transport differs. */
export const nodeFetch = ((url: RequestInfo | URL, init?: RequestInit): Promise<Response> =>
  new Promise((resolve, reject) => {
    const target = new URL(String(url));
    const req = httpRequest(
      target,
      {
        method: init?.method ?? "GET",
        headers: { ...((init?.headers as Record<string, string>) ?? {}), Connection: "close" },
        agent: false,
      },
      (res) => {
        const chunks: Buffer[] = [];
        res.on("data", (chunk) => chunks.push(chunk));
        res.on("end", () => {
          const body = Buffer.concat(chunks).toString("utf-8");
          resolve({
            ok: (res.statusCode ?? 500) < 400,
            status: res.statusCode ?? 500,
            json: async () => JSON.parse(body || "null"),
          } as Response);
        });
      },
    );
    req.on("error", reject);
    if (init?.body) req.write(init.body);
    req.end();
  })) as typeof fetch;

export async function until<T>(probe: () => T | null | undefined | false, timeoutMs = 5000): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = probe();
    if (value) return value;
    if (Date.now() > deadline) throw new Error("condition not met in time");
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

export function q<T extends HTMLElement = HTMLElement>(testId: string): T {
  const node = document.querySelector(`[data-testid="${testId}"]`);
  if (!node) throw new Error(`no element with data-testid=${testId}`);
  return node as T;
}

export function maybe(testId: string): HTMLElement | null {
  return document.querySelector(`[data-testid="${testId}"]`) as HTMLElement | null;
}

export function setValue(input: HTMLElement, value: string): void {
  (input as HTMLInputElement).value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

export function click(node: HTMLElement): void {
  node.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}

export async function flush(times = 8): Promise<void> {
  for (let i = 0; i < times; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
