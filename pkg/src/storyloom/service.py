"""HTTP service exposing the authoring and play flows.

Thin FastAPI bindings over the engine modules, with file-backed
persistence. Errors carry machine-readable codes: 404 for unknown ids,
409 for wrong session status or conflicting edits, 422 for invalid
payloads (including actions the world rejects), 502 for provider
failures.

Env: ``DATA_DIR`` (documents), ``PORT`` (serve), ``LLM_PROVIDER`` /
``LLM_SCRIPT`` / ``LLM_BASE_URL`` / ``LLM_API_KEY`` / ``LLM_MODEL``.
"""

from __future__ import annotations

import json
import logging
import os
import threading

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import abstraction, graph, llm, players
from .compiler import CompilerConfig, GameLoop
from .domain import StoryDomain, domain_to_dict, load_domain
from .errors import (
    CompilationError,
    DomainParseError,
    DomainValidationError,
    ExtractionError,
    PreconditionError,
    ProviderError,
    WorldError,
)
from .narrative import (
    AbstractionLevel,
    NarrativeSpace,
    extract_pivot,
    reject_variant,
    restore_variant,
    set_pivot,
    space_from_dict,
    space_to_dict,
)
from .plots import action_from_dict
from .store import DocumentStore
from .world import default_placement, init_world

log = logging.getLogger("storyloom.service")


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


class CreateSpaceBody(BaseModel):
    domain_id: str
    narrative_text: str
    moral: str = ""


class OutlineBody(BaseModel):
    level: str = "act"
    user_spec: str | None = None
    source: str = Field(default="pivot", pattern="^(pivot|variants)$")


class OutlineEditBody(BaseModel):
    events: list[str]
    level: str | None = None


class SuggestBody(BaseModel):
    snippet: str
    direction: str


class PivotBody(BaseModel):
    variant_id: str


class VariantsBody(BaseModel):
    n_sets: int = 1


class GraphBody(BaseModel):
    comparator: str = Field(default="exact", pattern="^(exact|judged)$")


class CreateSessionBody(BaseModel):
    space_id: str
    player_character: str
    placement: dict[str, str] | None = None


class ActionBody(BaseModel):
    action_instance: dict


def create_app(store: DocumentStore, provider, config: CompilerConfig | None = None) -> FastAPI:
    app = FastAPI(title="storyloom", version="0.1.0")
    # the browser client is served from a different origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    config = config or CompilerConfig()
    store.ensure_reference_domain()

    # -- helpers -------------------------------------------------------------

    def load_space(space_id: str) -> NarrativeSpace:
        doc = store.get("spaces", space_id)
        if doc is None:
            raise _error(404, "unknown_space", f"no space {space_id!r}")
        return space_from_dict(doc)

    def load_domain_doc(domain_id: str) -> StoryDomain:
        doc = store.get("domains", domain_id)
        if doc is None:
            raise _error(404, "unknown_domain", f"no domain {domain_id!r}")
        return load_domain(json.dumps(doc))

    def save_space(space: NarrativeSpace) -> dict:
        doc = space_to_dict(space)
        store.put("spaces", space.id, doc)
        return doc

    def require_outline(space: NarrativeSpace):
        if space.outline is None or not space.outline.events:
            raise _error(422, "no_outline", "the space has no outline yet")

    # -- domains ---------------------------------------------------------------

    @app.get("/domains")
    def list_domains():
        return {"domains": store.list_ids("domains")}

    @app.get("/domains/{domain_id}")
    def get_domain(domain_id: str):
        doc = store.get("domains", domain_id)
        if doc is None:
            raise _error(404, "unknown_domain", f"no domain {domain_id!r}")
        return doc

    @app.post("/domains/{domain_id}", status_code=201)
    def put_domain(domain_id: str, doc: dict):
        try:
            domain = load_domain(json.dumps(doc))
        except (DomainParseError, DomainValidationError) as exc:
            raise _error(422, "invalid_domain", str(exc))
        store.put("domains", domain_id, domain_to_dict(domain))
        return {"id": domain_id}

    # -- narrative spaces --------------------------------------------------------

    @app.post("/spaces", status_code=201)
    def create_space(body: CreateSpaceBody):
        domain = load_domain_doc(body.domain_id)
        if not body.narrative_text.strip():
            raise _error(422, "empty_narrative", "narrative_text must not be empty")
        try:
            pivot = extract_pivot(body.narrative_text, domain, provider, moral=body.moral)
        except ExtractionError as exc:
            raise _error(422, "no_events", str(exc))
        except ProviderError as exc:
            raise _error(502, "provider_error", str(exc))
        space = NarrativeSpace(
            id=store.next_id("spaces"),
            domain_ref=body.domain_id,
            pivot_id=pivot.id,
            moral=body.moral,
            variants=[pivot],
        )
        return save_space(space)

    @app.get("/spaces/{space_id}")
    def get_space(space_id: str):
        doc = store.get("spaces", space_id)
        if doc is None:
            raise _error(404, "unknown_space", f"no space {space_id!r}")
        return doc

    @app.post("/spaces/{space_id}/pivot")
    def post_pivot(space_id: str, body: PivotBody):
        with store.lock("spaces", space_id):
            space = load_space(space_id)
            try:
                set_pivot(space, body.variant_id)
            except KeyError as exc:
                raise _error(404, "unknown_variant", str(exc))
            except ValueError as exc:
                raise _error(409, "variant_rejected", str(exc))
            return save_space(space)

    @app.post("/spaces/{space_id}/variants/{variant_id}/reject")
    def post_reject(space_id: str, variant_id: str):
        with store.lock("spaces", space_id):
            space = load_space(space_id)
            try:
                reject_variant(space, variant_id)
            except KeyError as exc:
                raise _error(404, "unknown_variant", str(exc))
            except ValueError as exc:
                raise _error(409, "pivot_rejected", str(exc))
            return save_space(space)

    @app.post("/spaces/{space_id}/variants/{variant_id}/restore")
    def post_restore(space_id: str, variant_id: str):
        with store.lock("spaces", space_id):
            space = load_space(space_id)
            try:
                restore_variant(space, variant_id)
            except KeyError as exc:
                raise _error(404, "unknown_variant", str(exc))
            return save_space(space)

    @app.post("/spaces/{space_id}/outline")
    def post_outline(space_id: str, body: OutlineBody):
        with store.lock("spaces", space_id):
            space = load_space(space_id)
            domain = load_domain_doc(space.domain_ref)
            try:
                level = AbstractionLevel.parse(body.level)
            except ValueError as exc:
                raise _error(422, "invalid_level", str(exc))
            instances = [space.pivot()] if body.source == "pivot" else space.active_variants()
            try:
                space.outline = abstraction.instances_to_outline(
                    instances, level, body.user_spec, domain, provider, moral=space.moral
                )
            except ProviderError as exc:
                raise _error(502, "provider_error", str(exc))
            except ValueError as exc:
                raise _error(422, "invalid_outline_request", str(exc))
            return save_space(space)

    @app.put("/spaces/{space_id}/outline")
    def put_outline(space_id: str, body: OutlineEditBody):
        """Persist a hand-edited outline (e.g. an applied tooltip suggestion)."""
        from .narrative import make_outline

        with store.lock("spaces", space_id):
            space = load_space(space_id)
            require_outline(space)
            level = space.outline.level
            if body.level is not None:
                try:
                    level = AbstractionLevel.parse(body.level)
                except ValueError as exc:
                    raise _error(422, "invalid_level", str(exc))
            try:
                space.outline = make_outline(
                    body.events, level, moral=space.moral, user_spec=space.outline.user_spec
                )
            except ValueError as exc:
                raise _error(422, "invalid_outline", str(exc))
            return save_space(space)

    @app.post("/spaces/{space_id}/outline/suggest")
    def post_suggest(space_id: str, body: SuggestBody):
        space = load_space(space_id)
        require_outline(space)
        try:
            suggestions = abstraction.abstraction_suggest(
                body.snippet, body.direction, space.outline, provider
            )
        except ValueError as exc:
            raise _error(422, "invalid_suggestion_request", str(exc))
        except ProviderError as exc:
            raise _error(502, "provider_error", str(exc))
        return {"snippet": body.snippet, "direction": body.direction, "suggestions": suggestions}

    @app.get("/spaces/{space_id}/outline/mapping")
    def get_mapping(space_id: str):
        space = load_space(space_id)
        require_outline(space)
        try:
            mapping = abstraction.map_outline_to_pivot(space.outline, space.pivot(), provider)
        except ValueError as exc:
            raise _error(422, "invalid_mapping_request", str(exc))
        except ProviderError as exc:
            raise _error(502, "provider_error", str(exc))
        return {
            "ranges": [{"event": i, "start": s, "end": e} for i, (s, e) in enumerate(mapping.ranges)],
            "uncovered": mapping.uncovered,
        }

    # -- variant generation (jobs) ------------------------------------------------

    @app.post("/spaces/{space_id}/variants", status_code=202)
    def post_variants(space_id: str, body: VariantsBody):
        space = load_space(space_id)
        require_outline(space)
        if not 1 <= body.n_sets <= 5:
            raise _error(422, "invalid_n_sets", "n_sets must be between 1 and 5")
        domain = load_domain_doc(space.domain_ref)
        job_id = store.next_id("jobs")
        store.put("jobs", job_id, {"id": job_id, "space_id": space_id,
                                   "status": "running", "error": None, "variant_ids": []})

        def run():
            try:
                generated = players.generate_variants(space, body.n_sets, domain, provider, config)
                with store.lock("spaces", space_id):
                    current = load_space(space_id)
                    existing = {v.id for v in current.variants}
                    for v in generated:
                        serial = 0
                        vid = v.id
                        while vid in existing:
                            serial += 1
                            vid = f"{v.id}.{serial}"
                        v.id = vid
                        existing.add(vid)
                        current.variants.append(v)
                    save_space(current)
                store.put("jobs", job_id, {"id": job_id, "space_id": space_id, "status": "done",
                                           "error": None, "variant_ids": [v.id for v in generated]})
            except Exception as exc:  # job boundary: report, don't crash the service
                log.exception("variant generation job %s failed", job_id)
                store.put("jobs", job_id, {"id": job_id, "space_id": space_id, "status": "failed",
                                           "error": str(exc), "variant_ids": []})

        threading.Thread(target=run, daemon=True).start()
        return {"job_id": job_id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        doc = store.get("jobs", job_id)
        if doc is None:
            raise _error(404, "unknown_job", f"no job {job_id!r}")
        return doc

    # -- graph export ---------------------------------------------------------------

    @app.post("/spaces/{space_id}/graph")
    def post_graph(space_id: str, body: GraphBody):
        space = load_space(space_id)
        comparator = graph.exact_comparator
        if body.comparator == "judged":
            comparator = graph.JudgedComparator(provider)
        paths = graph.paths_from_variants(space.active_variants())
        try:
            result = graph.merge_paths(paths, comparator)
        except ProviderError as exc:
            raise _error(502, "provider_error", str(exc))
        return graph.export_graph(result)

    # -- play sessions -----------------------------------------------------------------

    def session_status(loop_phase: str) -> str:
        if loop_phase == "player":
            return "awaiting_player"
        if loop_phase in ("compile", "npc"):
            return "compiling"
        if loop_phase == "done":
            return "finished"
        return "failed"

    def session_doc(session_id: str, space: NarrativeSpace, player_character: str,
                    loop: GameLoop) -> dict:
        return {
            "id": session_id,
            "space_ref": space.id,
            "player_character": player_character,
            "status": session_status(loop.phase),
            "next_outline_index": loop.next_event,
            "state": loop.to_state(),
        }

    def rebuild_loop(doc: dict) -> tuple[NarrativeSpace, GameLoop]:
        space = load_space(doc["space_ref"])
        domain = load_domain_doc(space.domain_ref)
        loop = GameLoop.from_state(
            doc["state"], space.outline, domain, provider,
            config=config, player_character=doc["player_character"],
        )
        return space, loop

    def advance_until_player(loop: GameLoop) -> None:
        """Run npc/compile phases until player input is needed or the end."""
        while not loop.finished and loop.phase in ("npc", "compile"):
            if loop.phase == "npc":
                loop.npc_phase()
            else:
                loop.compile_next_event()
        if loop.phase == "done":
            loop.finish()

    def public_session(doc: dict) -> dict:
        return {k: v for k, v in doc.items() if k != "state"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        space = load_space(body.space_id)
        require_outline(space)
        domain = load_domain_doc(space.domain_ref)
        if not domain.has_character(body.player_character):
            raise _error(422, "unknown_character", f"no character {body.player_character!r}")
        try:
            world = init_world(domain, body.placement or default_placement(domain))
        except WorldError as exc:
            raise _error(422, "invalid_placement", str(exc))
        loop = GameLoop(space.outline, domain, world, provider,
                        config=config, player_character=body.player_character)
        session_id = store.next_id("sessions")
        try:
            advance_until_player(loop)
        except CompilationError:
            pass  # loop is marked failed; the doc records it
        except ProviderError as exc:
            raise _error(502, "provider_error", str(exc))
        doc = session_doc(session_id, space, body.player_character, loop)
        store.put("sessions", session_id, doc)
        return public_session(doc)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        doc = store.get("sessions", session_id)
        if doc is None:
            raise _error(404, "unknown_session", f"no session {session_id!r}")
        return public_session(doc)

    @app.get("/sessions/{session_id}/plot")
    def get_session_plot(session_id: str):
        doc = store.get("sessions", session_id)
        if doc is None:
            raise _error(404, "unknown_session", f"no session {session_id!r}")
        return doc["state"]["plot"]

    @app.post("/sessions/{session_id}/action")
    def post_action(session_id: str, body: ActionBody):
        with store.lock("sessions", session_id):
            doc = store.get("sessions", session_id)
            if doc is None:
                raise _error(404, "unknown_session", f"no session {session_id!r}")
            if doc["status"] != "awaiting_player":
                raise _error(409, "wrong_status",
                             f"session is {doc['status']}, not awaiting_player")
            space, loop = rebuild_loop(doc)
            try:
                action = action_from_dict(body.action_instance)
            except (KeyError, TypeError) as exc:
                raise _error(422, "invalid_action", f"malformed action instance: {exc}")
            try:
                record = loop.player_action(action)
            except (PreconditionError, WorldError) as exc:
                raise _error(422, "not_executable", getattr(exc, "reason", str(exc)))
            if loop.phase != "player":
                # turn complete: run the interlude and the next event now
                doc["status"] = "compiling"
                store.put("sessions", session_id, doc)
                try:
                    advance_until_player(loop)
                except CompilationError:
                    pass
                except ProviderError as exc:
                    doc = session_doc(session_id, space, doc["player_character"], loop)
                    store.put("sessions", session_id, doc)
                    raise _error(502, "provider_error", str(exc))
            doc = session_doc(session_id, space, doc["player_character"], loop)
            store.put("sessions", session_id, doc)
            response = public_session(doc)
            response["accepted_action"] = {
                "subject": record.action.subject,
                "action": record.action.action,
                "arguments": list(record.action.arguments),
                "turn": record.turn,
            }
            return response

    return app


def app_from_env() -> FastAPI:
    """App factory for ``uvicorn --factory storyloom.service:app_from_env``."""
    data_dir = os.environ.get("DATA_DIR", "./data")
    return create_app(DocumentStore(data_dir), llm.provider_from_env())
