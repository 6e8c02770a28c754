import { describe, expect, it } from 'vitest';

import type { SessionSnapshot } from '../src/api.js';
import { answeredEntries, initialState, screenFor } from '../src/state.js';

function snapshot(overrides: Partial<SessionSnapshot>): SessionSnapshot {
    return {
        schema_version: 1,
        id: 's',
        requirement: 'r',
        stage: 'sp',
        state: 'eliciting',
        control_kb: 'authn',
        active_kb: 'authn',
        selected_sp: null,
        selected_sdp: null,
        context: {},
        answer_log: [],
        sp_context: {},
        recommended: null,
        conflict: null,
        transcript: [],
        feasible_count: 6,
        ...overrides,
    };
}

describe('screenFor', () => {
    it('maps session states onto screens', () => {
        expect(screenFor(snapshot({ state: 'eliciting' }))).toBe('questions');
        expect(screenFor(snapshot({ state: 'conflicted' }))).toBe('questions');
        expect(screenFor(snapshot({ state: 'recommending' }))).toBe('questions');
        expect(screenFor(snapshot({ state: 'awaiting_selection' }))).toBe('recommendations');
        expect(screenFor(snapshot({ state: 'done' }))).toBe('done');
    });
});

describe('answeredEntries', () => {
    it('keeps answer order and marks inherited answers', () => {
        const session = snapshot({
            answer_log: [
                { property: 'no-users', value: 'high', at: 't', source: 'inherited' },
                { property: 'architecture', value: 'monolithic', at: 't', source: 'user' },
            ],
        });
        expect(answeredEntries(session)).toEqual([
            { property: 'no-users', value: 'high', inherited: true },
            { property: 'architecture', value: 'monolithic', inherited: false },
        ]);
    });
});

describe('initialState', () => {
    it('starts clean on the start screen', () => {
        const state = initialState();
        expect(state.screen).toBe('start');
        expect(state.pending).toBe(false);
        expect(state.comparison).toEqual([]);
    });
});
