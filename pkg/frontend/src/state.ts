/**
 * View state: a mirror of the latest service responses plus the few
 * UI-only fields (pending flag, comparison picks, draft inputs).
 * Nothing in here is derived by client-side recommendation logic.
 */

import type {
    AssistantExchange,
    KbSummary,
    Question,
    RecommendationPayload,
    SessionSnapshot,
} from './api.js';

export type Screen = 'start' | 'questions' | 'recommendations' | 'done';

export interface UiError {
    message: string;
    code: string;
    /** Re-issues the failed action; wired to the banner's retry button. */
    retry: (() => void) | null;
}

export interface ViewState {
    screen: Screen;
    kbs: KbSummary[];
    session: SessionSnapshot | null;
    question: Question | null;
    recommendations: RecommendationPayload | null;
    exchanges: AssistantExchange[];
    /** Single in-flight mutation per session: actions are ignored while true. */
    pending: boolean;
    error: UiError | null;
    /** Up to two pattern ids picked for the side-by-side comparison. */
    comparison: string[];
}

export function initialState(): ViewState {
    return {
        screen: 'start',
        kbs: [],
        session: null,
        question: null,
        recommendations: null,
        exchanges: [],
        pending: false,
        error: null,
        comparison: [],
    };
}

/** Screen implied by the session the service handed back. */
export function screenFor(session: SessionSnapshot): Screen {
    switch (session.state) {
        case 'eliciting':
        case 'conflicted':
        case 'recommending':
            return 'questions';
        case 'awaiting_selection':
            return 'recommendations';
        case 'done':
            return 'done';
    }
}

/** Answered properties in answer order, straight from the snapshot. */
export function answeredEntries(session: SessionSnapshot) {
    return session.answer_log.map((entry) => ({
        property: entry.property,
        value: entry.value,
        inherited: entry.source === 'inherited',
    }));
}
