/* Spawns the real Python service with the scripted provider so the UI
 * tests are end-to-end over live HTTP. */

import { spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURE = join(dirname(fileURLToPath(import.meta.url)), "fixtures", "script.json");

export const RESCUE_TEXT =
	"The ant fell into water. A dove dropped a leaf next to the ant. The ant was saved.";
export const MORAL = "kindness is never wasted";

export interface ServiceHandle {
	baseUrl: string;
	stop(): void;
}

export async function startService(): Promise<ServiceHandle> {
	const port = 8400 + Math.floor(Math.random() * 400);
	const dataDir = mkdtempSync(join(tmpdir(), "storyloom-ui-"));
	let stderr = "";
	const child = spawn("storyloom", ["serve", "--port", String(port)], {
		env: {
			...process.env,
			DATA_DIR: dataDir,
			LLM_PROVIDER: "scripted",
			LLM_SCRIPT: FIXTURE,
		},
		stdio: ["ignore", "ignore", "pipe"],
	});
	child.stderr?.on("data", (chunk: Buffer) => {
		stderr += chunk.toString();
	});
	const baseUrl = `http://127.0.0.1:${port}`;
	const deadline = Date.now() + 20000;
	for (;;) {
		try {
			const response = await fetch(`${baseUrl}/domains`);
			if (response.ok) break;
		} catch {
			/* not listening yet */
		}
		if (Date.now() > deadline) {
			child.kill();
			throw new Error(`service did not come up on ${baseUrl}\n${stderr}`);
		}
		await sleep(100);
	}
	return {
		baseUrl,
		stop() {
			child.kill();
			rmSync(dataDir, { recursive: true, force: true });
		},
	};
}

export function sleep(ms: number): Promise<void> {
	return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function waitFor(
	predicate: () => boolean,
	label: string,
	timeoutMs = 10000,
): Promise<void> {
	const deadline = Date.now() + timeoutMs;
	while (!predicate()) {
		if (Date.now() > deadline) throw new Error(`timed out waiting for ${label}`);
		await sleep(25);
	}
}

export function mount(): HTMLElement {
	const host = document.createElement("div");
	document.body.appendChild(host);
	return host;
}

/** Click helper that also works on SVG elements (no HTMLElement.click). */
export function click(element: Element): void {
	element.dispatchEvent(new Event("click", { bubbles: true }));
}
