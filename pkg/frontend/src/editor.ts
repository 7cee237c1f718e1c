/* Narrative-space editor: pivot, outline and variants views side by side.
 *
 * Everything rendered here derives from service responses; user actions
 * round-trip through the API and re-render from the returned documents. */

import { ApiClient, ApiError } from "./api.js";
import { renderScatter } from "./scatter.js";
import type { MappingDoc, SpaceDoc, VariantDoc } from "./types.js";
import { ABSTRACTION_LEVELS } from "./types.js";

const STAGE_COUNT = 4; // progression stages 25/50/75/100%

export class EditorView {
	space: SpaceDoc | null = null;
	mapping: MappingDoc | null = null;
	selectedVariantId: string | null = null;
	stageIndex = STAGE_COUNT - 1;
	selectedSnippet: string | null = null;

	constructor(
		readonly root: HTMLElement,
		readonly api: ApiClient,
		readonly spaceId: string,
	) {
		this.root.innerHTML = `
		<div class="editor">
			<section class="panel pivot-panel">
				<h2>Pivot</h2>
				<ol class="pivot-entries"></ol>
			</section>
			<section class="panel outline-panel">
				<h2>Outline</h2>
				<div class="outline-controls">
					<label>level
						<select class="level-select"></select>
					</label>
					<input class="user-spec" placeholder="author requirement (optional)" />
					<label>from
						<select class="source-select">
							<option value="pivot">pivot</option>
							<option value="variants">variants</option>
						</select>
					</label>
					<button class="generate-outline">Generate Outline</button>
				</div>
				<ol class="outline-events"></ol>
				<div class="abstraction-tooltip hidden">
					<span class="tooltip-snippet"></span>
					<button class="more-abstract">More Abstract</button>
					<button class="more-concrete">More Concrete</button>
					<ul class="suggestions"></ul>
				</div>
				<div class="outline-status" role="status"></div>
			</section>
			<section class="panel variants-panel">
				<h2>Variants</h2>
				<div class="variants-controls">
					<label>sets
						<select class="sets-select"></select>
					</label>
					<button class="generate-variants">Generate Variants</button>
					<label class="stage-label">stage
						<input class="progression-stage" type="range" min="0" max="${STAGE_COUNT - 1}"
							value="${STAGE_COUNT - 1}" step="1" />
					</label>
				</div>
				<div class="scatter-host"></div>
				<div class="variant-detail hidden">
					<h3 class="detail-title"></h3>
					<p class="detail-coords"></p>
					<pre class="detail-plot"></pre>
					<button class="toggle-reject"></button>
					<button class="set-pivot">Set as pivot</button>
				</div>
				<div class="variants-status" role="status"></div>
			</section>
		</div>`;

		const levelSelect = this.query<HTMLSelectElement>(".level-select");
		for (const level of ABSTRACTION_LEVELS) {
			const option = this.doc.createElement("option");
			option.value = level;
			option.textContent = level;
			levelSelect.appendChild(option);
		}
		levelSelect.value = "act";
		const setsSelect = this.query<HTMLSelectElement>(".sets-select");
		for (let n = 1; n <= 5; n++) {
			const option = this.doc.createElement("option");
			option.value = String(n);
			option.textContent = String(n);
			setsSelect.appendChild(option);
		}

		this.query(".generate-outline").addEventListener("click", () => {
			void this.generateOutline();
		});
		this.query(".generate-variants").addEventListener("click", () => {
			void this.generateVariants();
		});
		this.query<HTMLInputElement>(".progression-stage").addEventListener("input", (event) => {
			this.stageIndex = Number((event.target as HTMLInputElement).value);
			this.renderVariants();
		});
		this.query(".more-abstract").addEventListener("click", () => {
			void this.requestSuggestions("more_abstract");
		});
		this.query(".more-concrete").addEventListener("click", () => {
			void this.requestSuggestions("more_concrete");
		});
		this.query(".toggle-reject").addEventListener("click", () => {
			void this.toggleRejectSelected();
		});
		this.query(".set-pivot").addEventListener("click", () => {
			void this.promoteSelected();
		});
		this.root.addEventListener("mouseup", () => this.captureBrowserSelection());
	}

	private get doc(): Document {
		return this.root.ownerDocument;
	}

	private query<T extends HTMLElement = HTMLElement>(selector: string): T {
		const node = this.root.querySelector<T>(selector);
		if (!node) throw new Error(`editor is missing ${selector}`);
		return node;
	}

	async refresh(): Promise<void> {
		this.space = await this.api.getSpace(this.spaceId);
		this.renderPivot();
		this.renderOutline();
		this.renderVariants();
		if (this.space.outline) {
			try {
				this.mapping = await this.api.getMapping(this.spaceId);
			} catch {
				this.mapping = null; // mapping is a hover nicety, not a hard dependency
			}
		} else {
			this.mapping = null;
		}
	}

	pivotVariant(): VariantDoc | null {
		if (!this.space) return null;
		return this.space.variants.find((v) => v.id === this.space!.pivot) ?? null;
	}

	private pivotLines(): string[] {
		const pivot = this.pivotVariant();
		if (!pivot) return [];
		const lines: string[] = [];
		for (const segment of pivot.plot.segments) {
			for (const record of segment.records) {
				lines.push(`${record.subject} ${record.action}(${record.arguments.join(", ")})`);
			}
		}
		return lines;
	}

	private renderPivot(): void {
		const list = this.query(".pivot-entries");
		list.replaceChildren();
		this.pivotLines().forEach((line, index) => {
			const item = this.doc.createElement("li");
			item.textContent = line;
			item.dataset.pivotIndex = String(index);
			list.appendChild(item);
		});
	}

	private renderOutline(): void {
		const list = this.query(".outline-events");
		list.replaceChildren();
		const outline = this.space?.outline;
		if (!outline) {
			this.setStatus(".outline-status", "no outline yet - generate one");
			return;
		}
		this.setStatus(".outline-status", `level: ${outline.level}`);
		outline.events.forEach((text, index) => {
			const item = this.doc.createElement("li");
			item.textContent = text;
			item.dataset.eventIndex = String(index);
			item.addEventListener("mouseenter", () => this.highlightMapping(index));
			item.addEventListener("mouseleave", () => this.highlightMapping(null));
			list.appendChild(item);
		});
	}

	/** Highlight the pivot entries that support one outline event. */
	highlightMapping(eventIndex: number | null): void {
		const entries = this.root.querySelectorAll<HTMLElement>(".pivot-entries li");
		entries.forEach((entry) => entry.classList.remove("mapped"));
		if (eventIndex === null || !this.mapping) return;
		const range = this.mapping.ranges.find((r) => r.event === eventIndex);
		if (!range) return;
		entries.forEach((entry) => {
			const index = Number(entry.dataset.pivotIndex);
			if (index >= range.start && index < range.end) entry.classList.add("mapped");
		});
	}

	async generateOutline(): Promise<void> {
		const level = this.query<HTMLSelectElement>(".level-select").value;
		const userSpec = this.query<HTMLInputElement>(".user-spec").value.trim() || null;
		const source = this.query<HTMLSelectElement>(".source-select").value as
			| "pivot"
			| "variants";
		this.setStatus(".outline-status", "generating outline...");
		try {
			this.space = await this.api.generateOutline(this.spaceId, level, userSpec, source);
		} catch (error) {
			this.setStatus(".outline-status", describeError(error));
			return;
		}
		this.renderOutline();
		this.mapping = null;
		try {
			this.mapping = await this.api.getMapping(this.spaceId);
		} catch {
			/* keep rendering without hover mapping */
		}
	}

	// -- abstraction tooltip --------------------------------------------------

	/** Programmatic selection entry point (also fed by mouseup). */
	selectSnippet(snippet: string): void {
		const outlineText = (this.space?.outline?.events ?? []).join("\n");
		if (!snippet || !outlineText.includes(snippet)) return;
		this.selectedSnippet = snippet;
		const tooltip = this.query(".abstraction-tooltip");
		tooltip.classList.remove("hidden");
		this.query(".tooltip-snippet").textContent = snippet;
		this.query(".suggestions").replaceChildren();
	}

	private captureBrowserSelection(): void {
		const view = this.doc.defaultView;
		const selection = view?.getSelection?.();
		const text = selection?.toString().trim();
		if (text) this.selectSnippet(text);
	}

	async requestSuggestions(direction: "more_abstract" | "more_concrete"): Promise<void> {
		if (!this.selectedSnippet) return;
		const list = this.query(".suggestions");
		list.replaceChildren();
		let suggestions: string[];
		try {
			({ suggestions } = await this.api.suggest(this.spaceId, this.selectedSnippet, direction));
		} catch (error) {
			this.setStatus(".outline-status", describeError(error));
			return;
		}
		for (const suggestion of suggestions) {
			const item = this.doc.createElement("li");
			const button = this.doc.createElement("button");
			button.textContent = suggestion;
			button.className = "apply-suggestion";
			button.addEventListener("click", () => {
				void this.applySuggestion(suggestion);
			});
			item.appendChild(button);
			list.appendChild(item);
		}
	}

	async applySuggestion(replacement: string): Promise<void> {
		const outline = this.space?.outline;
		if (!outline || !this.selectedSnippet) return;
		let replaced = false;
		const events = outline.events.map((text) => {
			if (!replaced && text.includes(this.selectedSnippet!)) {
				replaced = true;
				return text.replace(this.selectedSnippet!, replacement);
			}
			return text;
		});
		if (!replaced) return;
		try {
			this.space = await this.api.editOutline(this.spaceId, events);
		} catch (error) {
			this.setStatus(".outline-status", describeError(error));
			return;
		}
		this.selectedSnippet = null;
		this.query(".abstraction-tooltip").classList.add("hidden");
		this.renderOutline();
	}

	// -- variants ---------------------------------------------------------------

	async generateVariants(): Promise<void> {
		const nSets = Number(this.query<HTMLSelectElement>(".sets-select").value);
		this.setStatus(".variants-status", "simulating variants...");
		try {
			const { job_id } = await this.api.startVariantGeneration(this.spaceId, nSets);
			const job = await this.api.waitForJob(job_id);
			if (job.status === "failed") {
				this.setStatus(".variants-status", `generation failed: ${job.error ?? "unknown"}`);
				return;
			}
			this.space = await this.api.getSpace(this.spaceId);
		} catch (error) {
			this.setStatus(".variants-status", describeError(error));
			return;
		}
		this.setStatus(".variants-status", "");
		this.renderVariants();
	}

	renderVariants(): void {
		if (!this.space) return;
		renderScatter(this.query(".scatter-host"), this.space.variants, this.space.pivot, {
			stageIndex: this.stageIndex,
			stageCount: STAGE_COUNT,
			selectedId: this.selectedVariantId,
			onSelect: (variantId) => this.selectVariant(variantId),
		});
		this.renderDetail();
	}

	selectVariant(variantId: string): void {
		this.selectedVariantId = variantId;
		this.renderVariants();
	}

	private selectedVariant(): VariantDoc | null {
		if (!this.space || !this.selectedVariantId) return null;
		return this.space.variants.find((v) => v.id === this.selectedVariantId) ?? null;
	}

	private renderDetail(): void {
		const detail = this.query(".variant-detail");
		const variant = this.selectedVariant();
		if (!variant) {
			detail.classList.add("hidden");
			return;
		}
		detail.classList.remove("hidden");
		this.query(".detail-title").textContent = `${variant.id} (${variant.player_type})`;
		this.query(".detail-coords").textContent =
			`intent ${variant.intent_distance.toFixed(2)} / ` +
			`emergence ${variant.emergence_distance.toFixed(2)}` +
			(variant.rejected ? " - rejected" : "");
		const lines: string[] = [];
		for (const segment of variant.plot.segments) {
			lines.push(`--- event ${segment.event_index} ---`);
			for (const record of segment.records) {
				lines.push(`${record.subject} ${record.action}(${record.arguments.join(", ")})`);
			}
			const gap = variant.plot.interludes.find((i) => i.after_event === segment.event_index);
			for (const record of gap?.records ?? []) {
				lines.push(`[${record.origin}] ${record.subject} ${record.action}(${record.arguments.join(", ")})`);
			}
		}
		if (variant.plot.summary) lines.push(`summary: ${variant.plot.summary}`);
		this.query(".detail-plot").textContent = lines.join("\n");
		this.query(".toggle-reject").textContent = variant.rejected ? "Restore" : "Reject";
	}

	async toggleRejectSelected(): Promise<void> {
		const variant = this.selectedVariant();
		if (!variant) return;
		try {
			this.space = variant.rejected
				? await this.api.restoreVariant(this.spaceId, variant.id)
				: await this.api.rejectVariant(this.spaceId, variant.id);
		} catch (error) {
			this.setStatus(".variants-status", describeError(error));
			return;
		}
		this.setStatus(".variants-status", "");
		this.renderVariants();
	}

	async promoteSelected(): Promise<void> {
		const variant = this.selectedVariant();
		if (!variant) return;
		try {
			this.space = await this.api.setPivot(this.spaceId, variant.id);
		} catch (error) {
			this.setStatus(".variants-status", describeError(error));
			return;
		}
		this.renderPivot();
		this.renderVariants();
	}

	private setStatus(selector: string, text: string): void {
		this.query(selector).textContent = text;
	}
}

export function describeError(error: unknown): string {
	if (error instanceof ApiError) return `${error.code}: ${error.message}`;
	return String(error);
}
