/**
 * Typed client for the recommendation service.
 *
 * The UI carries no recommendation logic: every structure here mirrors a
 * server payload one-to-one, and the client never reorders or recomputes
 * anything it receives.
 */

export interface KbSummary {
    id: string;
    level: 'control' | 'pattern';
    description: string;
    patterns: number;
    context_properties: number;
    pattern_properties: number;
    filters: number;
    criteria: string[];
}

export interface AnswerLogEntry {
    property: string;
    value: string;
    at: string;
    source: 'user' | 'inherited';
}

export interface ConflictDiagnosis {
    conflict: [string, string][];
    messages: Record<string, string>;
    unconditional: string[];
}

export interface TranscriptEvent {
    event: string;
    at: string;
    [key: string]: unknown;
}

export type SessionStateName =
    | 'eliciting'
    | 'recommending'
    | 'awaiting_selection'
    | 'conflicted'
    | 'done';

export interface SessionSnapshot {
    schema_version: number;
    id: string;
    requirement: string;
    stage: 'sp' | 'sdp';
    state: SessionStateName;
    control_kb: string;
    active_kb: string;
    selected_sp: string | null;
    selected_sdp: string | null;
    context: Record<string, string>;
    answer_log: AnswerLogEntry[];
    sp_context: Record<string, string>;
    recommended: string[] | null;
    conflict: ConflictDiagnosis | null;
    transcript: TranscriptEvent[];
    feasible_count: number;
}

export interface Question {
    property: string;
    text: string;
    description: string;
    options: string[];
    impact_preview: Record<string, number | null>;
}

export interface QuestionPayload {
    question: Question | null;
    state: SessionStateName;
}

export interface AnswerOutcome {
    accepted: boolean;
    feasible_count: number;
    conflict: ConflictDiagnosis | null;
    state: SessionStateName;
}

export interface RetractOutcome {
    state: SessionStateName;
    feasible_count: number;
}

export interface Contribution {
    weight: number;
    utility: number;
    product: number;
}

export interface RecommendationEntry {
    rank: number;
    pattern: string;
    score: number;
    contributions: Record<string, Contribution>;
    description: string;
}

export interface ExclusionEntry {
    pattern: string;
    violated: { filter: string; message: string }[];
}

export interface RecommendationPayload {
    kb: string;
    context: Record<string, string>;
    weights: Record<string, number>;
    fired_rules: string[];
    recommendations: RecommendationEntry[];
    exclusions: ExclusionEntry[];
}

export interface AssistantExchange {
    question: string;
    answer: string;
    source: 'stub' | 'external';
    cited_elements: string[];
}

interface ErrorEnvelope {
    error: { code: string; message: string; details: unknown };
}

/** Service error carrying the uniform envelope; retryable by re-issuing the action. */
export class ApiError extends Error {
    readonly code: string;
    readonly status: number;
    readonly details: unknown;

    constructor(status: number, envelope: ErrorEnvelope['error']) {
        super(envelope.message);
        this.name = 'ApiError';
        this.status = status;
        this.code = envelope.code;
        this.details = envelope.details;
    }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
    private readonly base: string;
    private readonly fetchImpl: FetchLike;

    constructor(baseUrl: string, fetchImpl?: FetchLike) {
        this.base = baseUrl.replace(/\/$/, '');
        this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
    }

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const init: RequestInit = { method, headers: {} };
        if (body !== undefined) {
            init.headers = { 'content-type': 'application/json' };
            init.body = JSON.stringify(body);
        }
        let response: Response;
        try {
            response = await this.fetchImpl(`${this.base}${path}`, init);
        } catch (cause) {
            throw new ApiError(0, {
                code: 'unreachable',
                message: 'the recommendation service is not reachable',
                details: String(cause),
            });
        }
        if (!response.ok) {
            let envelope: ErrorEnvelope['error'] = {
                code: 'unknown',
                message: `unexpected status ${response.status}`,
                details: null,
            };
            try {
                envelope = ((await response.json()) as ErrorEnvelope).error ?? envelope;
            } catch {
                // non-JSON error body: keep the fallback envelope
            }
            throw new ApiError(response.status, envelope);
        }
        return (await response.json()) as T;
    }

    listKbs(): Promise<KbSummary[]> {
        return this.request('GET', '/kbs');
    }

    createSession(requirement: string, kb: string): Promise<SessionSnapshot> {
        return this.request('POST', '/sessions', { requirement, kb });
    }

    getSession(id: string): Promise<SessionSnapshot> {
        return this.request('GET', `/sessions/${id}`);
    }

    nextQuestion(id: string): Promise<QuestionPayload> {
        return this.request('GET', `/sessions/${id}/question`);
    }

    answer(id: string, property: string, value: string): Promise<AnswerOutcome> {
        return this.request('POST', `/sessions/${id}/answers`, { property, value });
    }

    retract(id: string, property: string): Promise<RetractOutcome> {
        return this.request('DELETE', `/sessions/${id}/answers/${property}`);
    }

    askAssistant(id: string, question: string): Promise<AssistantExchange> {
        return this.request('POST', `/sessions/${id}/assistant`, { question });
    }

    recommendations(id: string): Promise<RecommendationPayload> {
        return this.request('GET', `/sessions/${id}/recommendations`);
    }

    select(id: string, pattern: string): Promise<SessionSnapshot> {
        return this.request('POST', `/sessions/${id}/selection`, { pattern });
    }
}
