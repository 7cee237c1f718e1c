/* Typed client over the service endpoints. The UI keeps no world state of
 * its own: every mutation round-trips through here. */

import type {
	ActionInstanceDoc,
	DomainDoc,
	GraphExportDoc,
	JobDoc,
	MappingDoc,
	PlotDoc,
	SessionDoc,
	SpaceDoc,
} from "./types.js";

export class ApiError extends Error {
	constructor(
		readonly status: number,
		readonly code: string,
		message: string,
	) {
		super(message);
		this.name = "ApiError";
	}
}

interface ErrorDetail {
	code?: string;
	message?: string;
}

export class ApiClient {
	constructor(
		readonly baseUrl: string,
		private readonly fetchImpl: typeof fetch = globalThis.fetch.bind(globalThis),
	) {}

	private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
		const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
			method,
			headers: body === undefined ? undefined : { "Content-Type": "application/json" },
			body: body === undefined ? undefined : JSON.stringify(body),
		});
		if (!response.ok) {
			let detail: ErrorDetail = {};
			try {
				const payload = (await response.json()) as { detail?: ErrorDetail | string };
				if (typeof payload.detail === "string") {
					detail = { message: payload.detail };
				} else if (payload.detail) {
					detail = payload.detail;
				}
			} catch {
				/* non-JSON error body */
			}
			throw new ApiError(
				response.status,
				detail.code ?? "http_error",
				detail.message ?? `${method} ${path} failed with ${response.status}`,
			);
		}
		return (await response.json()) as T;
	}

	getDomain(domainId: string): Promise<DomainDoc> {
		return this.request("GET", `/domains/${domainId}`);
	}

	createSpace(domainId: string, narrativeText: string, moral: string): Promise<SpaceDoc> {
		return this.request("POST", "/spaces", {
			domain_id: domainId,
			narrative_text: narrativeText,
			moral,
		});
	}

	getSpace(spaceId: string): Promise<SpaceDoc> {
		return this.request("GET", `/spaces/${spaceId}`);
	}

	generateOutline(
		spaceId: string,
		level: string,
		userSpec: string | null,
		source: "pivot" | "variants",
	): Promise<SpaceDoc> {
		return this.request("POST", `/spaces/${spaceId}/outline`, {
			level,
			user_spec: userSpec,
			source,
		});
	}

	editOutline(spaceId: string, events: string[]): Promise<SpaceDoc> {
		return this.request("PUT", `/spaces/${spaceId}/outline`, { events });
	}

	suggest(
		spaceId: string,
		snippet: string,
		direction: "more_abstract" | "more_concrete",
	): Promise<{ snippet: string; direction: string; suggestions: string[] }> {
		return this.request("POST", `/spaces/${spaceId}/outline/suggest`, { snippet, direction });
	}

	getMapping(spaceId: string): Promise<MappingDoc> {
		return this.request("GET", `/spaces/${spaceId}/outline/mapping`);
	}

	setPivot(spaceId: string, variantId: string): Promise<SpaceDoc> {
		return this.request("POST", `/spaces/${spaceId}/pivot`, { variant_id: variantId });
	}

	rejectVariant(spaceId: string, variantId: string): Promise<SpaceDoc> {
		return this.request("POST", `/spaces/${spaceId}/variants/${variantId}/reject`);
	}

	restoreVariant(spaceId: string, variantId: string): Promise<SpaceDoc> {
		return this.request("POST", `/spaces/${spaceId}/variants/${variantId}/restore`);
	}

	startVariantGeneration(spaceId: string, nSets: number): Promise<{ job_id: string }> {
		return this.request("POST", `/spaces/${spaceId}/variants`, { n_sets: nSets });
	}

	getJob(jobId: string): Promise<JobDoc> {
		return this.request("GET", `/jobs/${jobId}`);
	}

	async waitForJob(jobId: string, timeoutMs = 20000, intervalMs = 100): Promise<JobDoc> {
		const deadline = Date.now() + timeoutMs;
		for (;;) {
			const job = await this.getJob(jobId);
			if (job.status !== "running") return job;
			if (Date.now() > deadline) throw new Error(`job ${jobId} still running after ${timeoutMs}ms`);
			await new Promise((resolve) => setTimeout(resolve, intervalMs));
		}
	}

	mergeGraph(spaceId: string, comparator: "exact" | "judged" = "exact"): Promise<GraphExportDoc> {
		return this.request("POST", `/spaces/${spaceId}/graph`, { comparator });
	}

	createSession(spaceId: string, playerCharacter: string): Promise<SessionDoc> {
		return this.request("POST", "/sessions", {
			space_id: spaceId,
			player_character: playerCharacter,
		});
	}

	getSession(sessionId: string): Promise<SessionDoc> {
		return this.request("GET", `/sessions/${sessionId}`);
	}

	getSessionPlot(sessionId: string): Promise<PlotDoc> {
		return this.request("GET", `/sessions/${sessionId}/plot`);
	}

	submitAction(sessionId: string, action: ActionInstanceDoc): Promise<SessionDoc> {
		return this.request("POST", `/sessions/${sessionId}/action`, { action_instance: action });
	}
}
