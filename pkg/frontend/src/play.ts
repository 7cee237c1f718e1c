/* Turn-based play view: the unfolding plot on the left, a pinpad of
 * schema actions with argument pickers on the right. Rejections from the
 * simulation surface inline without advancing the turn. */

import { ApiClient, ApiError } from "./api.js";
import { describeError } from "./editor.js";
import type { ActionSpecDoc, DomainDoc, PlotDoc, SessionDoc } from "./types.js";

export const EVENT_SEPARATOR_TEXT = "------ New Event is Happening ------";
const POLL_INTERVAL_MS = 150;

export class PlayView {
	session: SessionDoc | null = null;
	plot: PlotDoc | null = null;
	chosenAction: ActionSpecDoc | null = null;
	private pollTimer: ReturnType<typeof setTimeout> | null = null;

	constructor(
		readonly root: HTMLElement,
		readonly api: ApiClient,
		readonly domain: DomainDoc,
		readonly sessionId: string,
		readonly playerCharacter: string,
	) {
		this.root.innerHTML = `
		<div class="play">
			<section class="panel transcript-panel">
				<h2>Story</h2>
				<div class="transcript"></div>
				<div class="summary hidden"></div>
			</section>
			<aside class="panel pinpad-panel">
				<h2>Your move, ${playerCharacter}</h2>
				<div class="session-status" role="status"></div>
				<div class="pinpad"></div>
				<form class="action-form hidden">
					<div class="argument-pickers"></div>
					<button type="submit" class="submit-action">Do it</button>
				</form>
				<div class="rejection" role="alert"></div>
			</aside>
		</div>`;

		const pinpad = this.query(".pinpad");
		for (const spec of domain.actions) {
			const button = this.doc.createElement("button");
			button.textContent = spec.name;
			button.className = "pinpad-action";
			button.dataset.action = spec.name;
			button.addEventListener("click", () => this.chooseAction(spec.name));
			pinpad.appendChild(button);
		}
		this.query<HTMLFormElement>(".action-form").addEventListener("submit", (event) => {
			event.preventDefault();
			void this.submitChosenAction();
		});
	}

	private get doc(): Document {
		return this.root.ownerDocument;
	}

	private query<T extends HTMLElement = HTMLElement>(selector: string): T {
		const node = this.root.querySelector<T>(selector);
		if (!node) throw new Error(`play view is missing ${selector}`);
		return node;
	}

	async refresh(): Promise<void> {
		this.session = await this.api.getSession(this.sessionId);
		this.plot = await this.api.getSessionPlot(this.sessionId);
		this.renderTranscript();
		this.renderStatus();
		if (this.session.status === "compiling") {
			this.schedulePoll();
		}
	}

	private schedulePoll(): void {
		if (this.pollTimer) clearTimeout(this.pollTimer);
		this.pollTimer = setTimeout(() => {
			void this.refresh();
		}, POLL_INTERVAL_MS);
	}

	dispose(): void {
		if (this.pollTimer) clearTimeout(this.pollTimer);
	}

	private renderTranscript(): void {
		const transcript = this.query(".transcript");
		transcript.replaceChildren();
		if (!this.plot) return;
		const interludes = new Map(this.plot.interludes.map((gap) => [gap.after_event, gap]));
		for (const segment of this.plot.segments) {
			const separator = this.doc.createElement("div");
			separator.className = "event-separator";
			separator.textContent = EVENT_SEPARATOR_TEXT;
			transcript.appendChild(separator);
			if (segment.fulfilled_by_player) {
				const note = this.doc.createElement("p");
				note.className = "fulfilled-note";
				note.textContent = "(your actions already fulfilled this event)";
				transcript.appendChild(note);
			}
			for (const record of segment.records) {
				transcript.appendChild(this.recordLine(record.subject, record.action,
					record.arguments, record.thought, "plot"));
			}
			const gap = interludes.get(segment.event_index);
			for (const record of gap?.records ?? []) {
				transcript.appendChild(this.recordLine(record.subject, record.action,
					record.arguments, record.thought, record.origin));
			}
		}
		const summaryHost = this.query(".summary");
		if (this.plot.summary && this.session?.status === "finished") {
			summaryHost.classList.remove("hidden");
			summaryHost.textContent = `summary of the story: ${this.plot.summary}`;
		} else {
			summaryHost.classList.add("hidden");
			summaryHost.textContent = "";
		}
	}

	private recordLine(
		subject: string,
		action: string,
		args: string[],
		thought: string | undefined,
		origin: string,
	): HTMLElement {
		const line = this.doc.createElement("p");
		line.className = `record origin-${origin}`;
		let text = `${subject} ${action}(${args.join(", ")})`;
		if (thought) text += ` - thinking "${thought}"`;
		line.textContent = origin === "player" ? `[you] ${text}` : text;
		return line;
	}

	private renderStatus(): void {
		const status = this.session?.status ?? "unknown";
		this.query(".session-status").textContent = {
			awaiting_player: "choose your next action",
			compiling: "the story is unfolding...",
			finished: "the narrative has ended",
			failed: `the story could not continue: ${this.plot?.failure ?? ""}`,
		}[status as "awaiting_player" | "compiling" | "finished" | "failed"] ?? status;
		const disable = status !== "awaiting_player";
		this.root
			.querySelectorAll<HTMLButtonElement>(".pinpad-action, .submit-action")
			.forEach((button) => {
				button.disabled = disable;
			});
	}

	chooseAction(name: string): void {
		const spec = this.domain.actions.find((a) => a.name === name);
		if (!spec) return;
		this.chosenAction = spec;
		const form = this.query(".action-form");
		form.classList.remove("hidden");
		const pickers = this.query(".argument-pickers");
		pickers.replaceChildren();
		for (const param of spec.parameters) {
			const label = this.doc.createElement("label");
			label.textContent = `${param.role}: `;
			if (param.kind === "free-text") {
				const input = this.doc.createElement("input");
				input.type = "text";
				input.className = "argument-input";
				input.dataset.role = param.role;
				label.appendChild(input);
			} else {
				const select = this.doc.createElement("select");
				select.className = "argument-picker";
				select.dataset.role = param.role;
				const pool =
					param.kind === "character"
						? this.domain.characters.map((c) => c.id)
						: this.domain.locations.map((l) => l.id);
				for (const value of pool) {
					const option = this.doc.createElement("option");
					option.value = value;
					option.textContent = value;
					select.appendChild(option);
				}
				label.appendChild(select);
			}
			pickers.appendChild(label);
		}
	}

	/** Current pinpad form contents as an action instance. */
	composeAction(): { subject: string; action: string; arguments: string[] } | null {
		if (!this.chosenAction) return null;
		const args: string[] = [];
		for (const param of this.chosenAction.parameters) {
			const picker = this.root.querySelector<HTMLInputElement | HTMLSelectElement>(
				`.argument-pickers [data-role="${param.role}"]`,
			);
			args.push(picker?.value ?? "");
		}
		return { subject: this.playerCharacter, action: this.chosenAction.name, arguments: args };
	}

	async submitChosenAction(): Promise<void> {
		const action = this.composeAction();
		if (!action) return;
		const rejection = this.query(".rejection");
		rejection.textContent = "";
		try {
			this.session = await this.api.submitAction(this.sessionId, action);
		} catch (error) {
			if (error instanceof ApiError && error.code === "not_executable") {
				rejection.textContent = `the world refuses: ${error.message}`;
				return;
			}
			rejection.textContent = describeError(error);
			return;
		}
		this.chosenAction = null;
		this.query(".action-form").classList.add("hidden");
		this.plot = await this.api.getSessionPlot(this.sessionId);
		this.renderTranscript();
		this.renderStatus();
		if (this.session.status === "compiling") this.schedulePoll();
	}
}
