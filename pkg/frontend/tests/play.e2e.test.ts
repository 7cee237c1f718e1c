/* End-to-end play-view flow: a 3-event session finishes with a summary. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { EVENT_SEPARATOR_TEXT, PlayView } from "../src/play.js";
import { MORAL, mount, RESCUE_TEXT, startService, waitFor, type ServiceHandle } from "./helpers.js";

let service: ServiceHandle;
let api: ApiClient;

beforeAll(async () => {
	service = await startService();
	api = new ApiClient(service.baseUrl);
});

afterAll(() => {
	service.stop();
});

async function preparedSession() {
	const space = await api.createSpace("fairytale_forest", RESCUE_TEXT, MORAL);
	await api.generateOutline(space.id, "act", null, "pivot");
	const session = await api.createSession(space.id, "dove");
	const domain = await api.getDomain(space.domain_ref);
	return { space, session, domain };
}

function pickArgument(root: HTMLElement, role: string, value: string): void {
	const picker = root.querySelector<HTMLInputElement | HTMLSelectElement>(
		`.argument-pickers [data-role="${role}"]`,
	);
	if (!picker) throw new Error(`no picker for role ${role}`);
	picker.value = value;
}

describe("play view", () => {
	it("plays a three-event session to the summary", async () => {
		const { session, domain } = await preparedSession();
		expect(session.status).toBe("awaiting_player");

		const root = mount();
		const view = new PlayView(root, api, domain, session.id, "dove");
		await view.refresh();

		// the first compiled segment renders behind a separator
		expect(root.querySelectorAll(".event-separator").length).toBe(1);
		expect(root.querySelector(".transcript")!.textContent).toContain("hunter attack(dove)");
		expect(root.querySelector(".session-status")!.textContent).toContain("choose your next action");

		// the pinpad offers every schema action
		const pinpadActions = [...root.querySelectorAll(".pinpad-action")].map(
			(b) => b.textContent,
		);
		expect(pinpadActions).toEqual(["moveTo", "speakTo", "kill", "attack", "think", "save"]);

		// choosing speakTo opens a character picker plus a text field
		(root.querySelector(".pinpad-action[data-action='speakTo']") as HTMLButtonElement).click();
		const listenerPicker = root.querySelector(".argument-pickers select[data-role='listener']");
		const utteranceInput = root.querySelector(".argument-pickers input[data-role='utterance']");
		expect(listenerPicker).not.toBeNull();
		expect(utteranceInput).not.toBeNull();
		expect(listenerPicker!.querySelectorAll("option").length).toBe(6);

		// an invalid action is rejected inline without advancing the turn
		pickArgument(root, "listener", "witch");
		pickArgument(root, "utterance", "hi there");
		await view.submitChosenAction(); // dove is at the brook, the witch at the forest
		expect(root.querySelector(".rejection")!.textContent).toContain("not colocated");
		expect((await api.getSession(session.id)).status).toBe("awaiting_player");
		expect(root.querySelectorAll(".event-separator").length).toBe(1);

		// valid turn: move to the forest, then ask the witch for help
		(root.querySelector(".pinpad-action[data-action='moveTo']") as HTMLButtonElement).click();
		pickArgument(root, "destination", "forest");
		await view.submitChosenAction();
		expect(root.querySelector(".transcript")!.textContent).toContain("[you] dove moveTo(forest)");

		(root.querySelector(".pinpad-action[data-action='speakTo']") as HTMLButtonElement).click();
		pickArgument(root, "listener", "witch");
		pickArgument(root, "utterance", "Can you help us?");
		await view.submitChosenAction();
		await waitFor(
			() => root.querySelectorAll(".event-separator").length === 2,
			"second segment to compile",
		);

		// second turn finishes the outline
		(root.querySelector(".pinpad-action[data-action='think']") as HTMLButtonElement).click();
		pickArgument(root, "content", "I hope the ant is safe.");
		await view.submitChosenAction();
		(root.querySelector(".pinpad-action[data-action='moveTo']") as HTMLButtonElement).click();
		pickArgument(root, "destination", "brook");
		await view.submitChosenAction();

		await waitFor(
			() => root.querySelectorAll(".event-separator").length === 3,
			"third segment to compile",
		);
		await waitFor(
			() => (root.querySelector(".session-status")!.textContent ?? "").includes("ended"),
			"session to finish",
		);
		expect(root.querySelector(".summary")!.classList.contains("hidden")).toBe(false);
		expect(root.querySelector(".summary")!.textContent).toContain(
			"The dove sought help and the forest found peace.",
		);
		// the pinpad locks once the narrative is over
		const disabled = [...root.querySelectorAll<HTMLButtonElement>(".pinpad-action")].every(
			(b) => b.disabled,
		);
		expect(disabled).toBe(true);
		expect(root.querySelector(".transcript")!.textContent).toContain(EVENT_SEPARATOR_TEXT);

		const plot = await api.getSessionPlot(session.id);
		expect(plot.segments.length).toBe(3);
	});
});
