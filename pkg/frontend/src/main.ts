/* App shell: base-URL setting, space creation, and view switching. */

import { ApiClient } from "./api.js";
import { describeError, EditorView } from "./editor.js";
import { PlayView } from "./play.js";
import type { SpaceDoc } from "./types.js";

export const DEFAULT_BASE_URL = "http://127.0.0.1:8000";

export class App {
	api: ApiClient;
	space: SpaceDoc | null = null;
	editor: EditorView | null = null;
	play: PlayView | null = null;

	constructor(
		readonly root: HTMLElement,
		baseUrl: string = DEFAULT_BASE_URL,
	) {
		this.api = new ApiClient(baseUrl);
		this.root.innerHTML = `
		<header class="topbar">
			<strong>storyloom</strong>
			<label>service <input class="base-url" value="${baseUrl}" size="28" /></label>
			<nav>
				<button class="show-editor" disabled>Editor</button>
				<button class="show-play" disabled>Play</button>
			</nav>
		</header>
		<section class="start-panel">
			<h2>Start from an example story</h2>
			<textarea class="narrative" rows="6" placeholder="Paste your story..."></textarea>
			<input class="moral" placeholder="story moral, e.g. kindness is never wasted" />
			<button class="create-space">Create narrative space</button>
			<span class="start-status" role="status"></span>
		</section>
		<main class="view-host"></main>`;

		this.query(".base-url").addEventListener("change", (event) => {
			this.api = new ApiClient((event.target as HTMLInputElement).value);
		});
		this.query(".create-space").addEventListener("click", () => {
			void this.createSpace();
		});
		this.query(".show-editor").addEventListener("click", () => {
			void this.showEditor();
		});
		this.query(".show-play").addEventListener("click", () => {
			void this.showPlay();
		});
	}

	private get doc(): Document {
		return this.root.ownerDocument;
	}

	private query<T extends HTMLElement = HTMLElement>(selector: string): T {
		const node = this.root.querySelector<T>(selector);
		if (!node) throw new Error(`app shell is missing ${selector}`);
		return node;
	}

	async createSpace(): Promise<void> {
		const narrative = this.query<HTMLTextAreaElement>(".narrative").value;
		const moral = this.query<HTMLInputElement>(".moral").value;
		const status = this.query(".start-status");
		status.textContent = "extracting the pivot...";
		try {
			this.space = await this.api.createSpace("fairytale_forest", narrative, moral);
		} catch (error) {
			status.textContent = describeError(error);
			return;
		}
		status.textContent = `space ${this.space.id} ready`;
		this.query<HTMLButtonElement>(".show-editor").disabled = false;
		this.query<HTMLButtonElement>(".show-play").disabled = false;
		await this.showEditor();
	}

	async showEditor(): Promise<void> {
		if (!this.space) return;
		this.play?.dispose();
		this.play = null;
		const host = this.query(".view-host");
		host.replaceChildren(this.doc.createElement("div"));
		this.editor = new EditorView(host.firstElementChild as HTMLElement, this.api, this.space.id);
		await this.editor.refresh();
	}

	async showPlay(): Promise<void> {
		if (!this.space) return;
		const domain = await this.api.getDomain(this.space.domain_ref);
		const playable = domain.characters.find((c) => c.player_controllable);
		const player = playable?.id ?? domain.characters[0].id;
		const session = await this.api.createSession(this.space.id, player);
		const host = this.query(".view-host");
		host.replaceChildren(this.doc.createElement("div"));
		this.play = new PlayView(
			host.firstElementChild as HTMLElement,
			this.api,
			domain,
			session.id,
			player,
		);
		await this.play.refresh();
	}
}

declare global {
	interface Window {
		storyloomApp?: App;
	}
}

if (typeof document !== "undefined" && document.getElementById("app")) {
	window.storyloomApp = new App(document.getElementById("app") as HTMLElement);
}
