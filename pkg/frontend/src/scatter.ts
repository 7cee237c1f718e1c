/* SVG scatter plot of variants over the intent-distance (x) and
 * emergence-distance (y) dimensions, with the pivot drawn as a star.
 * The progression slider swaps in prefix-stage coordinates. */

import type { VariantDoc } from "./types.js";

const WIDTH = 420;
const HEIGHT = 320;
const PAD = 36;

export const PLAYER_COLORS: Record<string, string> = {
	positive: "#2e8b57",
	negative: "#c0392b",
	roleplayer: "#2963c7",
	human: "#7a7a7a",
};

export interface ScatterOptions {
	/** index into the progression stages; the last stage = full plot */
	stageIndex: number;
	stageCount: number;
	selectedId?: string | null;
	onSelect?: (variantId: string) => void;
}

export function variantCoordinates(
	variant: VariantDoc,
	stageIndex: number,
	stageCount: number,
): { intent: number; emergence: number } {
	const last = stageIndex >= stageCount - 1;
	const point = variant.progression[stageIndex];
	if (!last && point) {
		return { intent: point.intent_distance, emergence: point.emergence_distance };
	}
	return { intent: variant.intent_distance, emergence: variant.emergence_distance };
}

function toPixels(intent: number, emergence: number): { x: number; y: number } {
	const x = PAD + intent * (WIDTH - 2 * PAD);
	const y = HEIGHT - PAD - emergence * (HEIGHT - 2 * PAD);
	return { x, y };
}

function starPath(cx: number, cy: number, r: number): string {
	const points: string[] = [];
	for (let i = 0; i < 10; i++) {
		const radius = i % 2 === 0 ? r : r / 2.4;
		const angle = (Math.PI / 5) * i - Math.PI / 2;
		points.push(`${cx + radius * Math.cos(angle)},${cy + radius * Math.sin(angle)}`);
	}
	return `M${points.join("L")}Z`;
}

export function renderScatter(
	container: HTMLElement,
	variants: VariantDoc[],
	pivotId: string,
	options: ScatterOptions,
): void {
	const doc = container.ownerDocument;
	const SVG_NS = "http://www.w3.org/2000/svg";
	container.replaceChildren();
	const svg = doc.createElementNS(SVG_NS, "svg");
	svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
	svg.setAttribute("width", String(WIDTH));
	svg.setAttribute("height", String(HEIGHT));
	svg.setAttribute("class", "scatter");

	const axes = doc.createElementNS(SVG_NS, "path");
	axes.setAttribute(
		"d",
		`M${PAD},${PAD} L${PAD},${HEIGHT - PAD} L${WIDTH - PAD},${HEIGHT - PAD}`,
	);
	axes.setAttribute("fill", "none");
	axes.setAttribute("stroke", "#999");
	svg.appendChild(axes);

	const xLabel = doc.createElementNS(SVG_NS, "text");
	xLabel.textContent = "authorial intent distance";
	xLabel.setAttribute("x", String(WIDTH / 2));
	xLabel.setAttribute("y", String(HEIGHT - 8));
	xLabel.setAttribute("text-anchor", "middle");
	xLabel.setAttribute("class", "axis-label");
	svg.appendChild(xLabel);

	const yLabel = doc.createElementNS(SVG_NS, "text");
	yLabel.textContent = "emergence distance";
	yLabel.setAttribute("x", "12");
	yLabel.setAttribute("y", String(HEIGHT / 2));
	yLabel.setAttribute("transform", `rotate(-90 12 ${HEIGHT / 2})`);
	yLabel.setAttribute("text-anchor", "middle");
	yLabel.setAttribute("class", "axis-label");
	svg.appendChild(yLabel);

	for (const variant of variants) {
		const { intent, emergence } = variantCoordinates(
			variant,
			options.stageIndex,
			options.stageCount,
		);
		const { x, y } = toPixels(intent, emergence);
		const isPivot = variant.id === pivotId;
		const color = PLAYER_COLORS[variant.player_type] ?? "#555";
		let marker: SVGElement;
		if (isPivot) {
			marker = doc.createElementNS(SVG_NS, "path");
			marker.setAttribute("d", starPath(x, y, 10));
			marker.setAttribute("data-pivot", "true");
		} else {
			marker = doc.createElementNS(SVG_NS, "circle");
			marker.setAttribute("cx", String(x));
			marker.setAttribute("cy", String(y));
			marker.setAttribute("r", "6");
		}
		marker.setAttribute("fill", color);
		marker.setAttribute("fill-opacity", variant.rejected ? "0.18" : "0.85");
		marker.setAttribute("stroke", variant.id === options.selectedId ? "#111" : "none");
		marker.setAttribute("stroke-width", "2");
		marker.setAttribute("class", "variant-dot");
		marker.setAttribute("data-variant-id", variant.id);
		marker.setAttribute("data-player-type", variant.player_type);
		marker.setAttribute("data-rejected", String(variant.rejected));
		marker.setAttribute("data-x", intent.toFixed(4));
		marker.setAttribute("data-y", emergence.toFixed(4));
		marker.addEventListener("click", () => options.onSelect?.(variant.id));
		svg.appendChild(marker);
	}
	container.appendChild(svg);
}
