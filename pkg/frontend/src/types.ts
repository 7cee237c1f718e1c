/* Service document shapes, mirroring the JSON the endpoints emit. */

export interface CharacterDoc {
	id: string;
	name: string;
	description: string;
	player_controllable: boolean;
}

export interface LocationDoc {
	id: string;
	name: string;
}

export interface ActionParameterDoc {
	role: string;
	kind: "character" | "location" | "free-text";
}

export interface ActionSpecDoc {
	name: string;
	parameters: ActionParameterDoc[];
	requires_colocation: boolean;
	mutates_world: boolean;
}

export interface DomainDoc {
	title: string;
	characters: CharacterDoc[];
	locations: LocationDoc[];
	actions: ActionSpecDoc[];
}

export interface ActionInstanceDoc {
	subject: string;
	action: string;
	arguments: string[];
	thought?: string;
}

export interface RecordDoc extends ActionInstanceDoc {
	origin: string;
	turn: number;
	deltas: [string, unknown, unknown][];
}

export interface SegmentDoc {
	event_index: number;
	fulfilled_by_player: boolean;
	records: RecordDoc[];
}

export interface InterludeDoc {
	after_event: number;
	records: RecordDoc[];
}

export interface PlotDoc {
	segments: SegmentDoc[];
	interludes: InterludeDoc[];
	summary: string;
	complete: boolean;
	failure: string | null;
}

export interface ProgressionPointDoc {
	stage: number;
	intent_distance: number;
	emergence_distance: number;
}

export interface VariantDoc {
	id: string;
	player_type: "positive" | "negative" | "roleplayer" | "human";
	intent_distance: number;
	emergence_distance: number;
	progression: ProgressionPointDoc[];
	rejected: boolean;
	source_text: string;
	plot: PlotDoc;
}

export interface OutlineDoc {
	events: string[];
	level: string;
	moral: string;
	user_spec: string | null;
}

export interface SpaceDoc {
	id: string;
	domain_ref: string;
	pivot: string;
	moral: string;
	outline: OutlineDoc | null;
	variants: VariantDoc[];
}

export interface JobDoc {
	id: string;
	space_id: string;
	status: "running" | "done" | "failed";
	error: string | null;
	variant_ids: string[];
}

export interface MappingRangeDoc {
	event: number;
	start: number;
	end: number;
}

export interface MappingDoc {
	ranges: MappingRangeDoc[];
	uncovered: number[];
}

export interface SessionDoc {
	id: string;
	space_ref: string;
	player_character: string;
	status: "awaiting_player" | "compiling" | "finished" | "failed";
	next_outline_index: number;
	accepted_action?: { subject: string; action: string; arguments: string[]; turn: number };
}

export interface GraphExportDoc {
	graphs: {
		nodes: { id: string; label: string }[];
		edges: { from: string; to: string }[];
	}[];
}

export const ABSTRACTION_LEVELS = ["beat", "scene", "sequence", "act", "story"] as const;
