/** Error envelope rendering, retry, done screen and transcript export. */

import { describe, expect, it } from 'vitest';

import type { SessionSnapshot } from '../src/api.js';
import { ApiClient } from '../src/api.js';
import { App } from '../src/app.js';
import { ReplayFetch, RecordedExchange } from './replayFetch.js';

const BASE = 'http://service.test';

const KBS: RecordedExchange = {
    method: 'GET',
    path: '/kbs',
    body: null,
    status: 200,
    response: JSON.stringify([
        {
            id: 'authn', level: 'control', description: '', patterns: 6,
            context_properties: 6, pattern_properties: 5, filters: 3, criteria: ['usability', 'costs'],
        },
    ]),
};

function doneSnapshot(): SessionSnapshot {
    return {
        schema_version: 1,
        id: 'abc',
        requirement: 'users must authenticate',
        stage: 'sp',
        state: 'done',
        control_kb: 'authn',
        active_kb: 'authn',
        selected_sp: 'biom-profile',
        selected_sdp: null,
        context: { 'sec-lev': 'high' },
        answer_log: [],
        sp_context: {},
        recommended: ['biom-profile'],
        conflict: null,
        transcript: [
            { event: 'session_started', at: 't' },
            { event: 'selected', at: 't', pattern: 'biom-profile' },
        ],
        feasible_count: 3,
    };
}

function makeApp(exchanges: RecordedExchange[]) {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById('app')!;
    const replay = new ReplayFetch(exchanges, BASE);
    const app = new App(root, new ApiClient(BASE, replay.fetch));
    return { app, root, replay };
}

async function settle(app: App): Promise<void> {
    for (let i = 0; i < 200 && app.state.pending; i += 1) {
        await new Promise((resolve) => setTimeout(resolve, 0));
    }
}

describe('error handling', () => {
    it('renders the envelope in a banner and retries the failed action', async () => {
        const failure: RecordedExchange = {
            method: 'POST',
            path: '/sessions',
            body: { requirement: 'r', kb: 'authn' },
            status: 400,
            response: JSON.stringify({
                error: { code: 'config', message: 'catalog temporarily unavailable', details: null },
            }),
        };
        const snapshot = { ...doneSnapshot(), state: 'eliciting' as const, selected_sp: null };
        const success: RecordedExchange = {
            method: 'POST',
            path: '/sessions',
            body: { requirement: 'r', kb: 'authn' },
            status: 201,
            response: JSON.stringify(snapshot),
        };
        const question: RecordedExchange = {
            method: 'GET',
            path: '/sessions/abc/question',
            body: null,
            status: 200,
            response: JSON.stringify({
                question: {
                    property: 'sec-lev', text: 'Security level?', description: '',
                    options: ['low', 'high'], impact_preview: { low: 6, high: 5 },
                },
                state: 'eliciting',
            }),
        };
        const { app, root, replay } = makeApp([KBS, failure, success, question]);
        await app.boot();
        await settle(app);

        (root.querySelector('#requirement') as HTMLTextAreaElement).value = 'r';
        (root.querySelector('#kb-select') as HTMLSelectElement).value = 'authn';
        (root.querySelector('[data-action="start"]') as HTMLElement).click();
        await settle(app);

        const banner = root.querySelector('[data-testid="error-banner"]');
        expect(banner).not.toBeNull();
        expect(banner!.textContent).toContain('catalog temporarily unavailable');
        expect(banner!.textContent).toContain('config');

        (root.querySelector('[data-action="retry"]') as HTMLElement).click();
        await settle(app);
        expect(root.querySelector('[data-testid="error-banner"]')).toBeNull();
        expect(root.querySelector('[data-testid="question-card"]')).not.toBeNull();
        replay.assertDrained();
    });
});

describe('done screen', () => {
    it('summarizes the session and exports the transcript', () => {
        const { app, root } = makeApp([]);
        app.state.session = doneSnapshot();
        app.state.screen = 'done';
        app.renderNow();

        const screen = root.querySelector('[data-testid="done-screen"]')!;
        expect(screen.textContent).toContain('Selected pattern: biom-profile');
        expect(screen.textContent).toContain('2 transcript events recorded');

        const exported = JSON.parse(app.exportTranscriptText());
        expect(exported.selected_sp).toBe('biom-profile');
        expect(exported.transcript.length).toBe(2);
        expect(exported.requirement).toBe('users must authenticate');
    });
});
