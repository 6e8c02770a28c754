/**
 * Application controller.
 *
 * Every user action performs exactly one mutating API call, followed by
 * the read calls needed to refresh the mirrored snapshot/question; the
 * UI re-renders from those responses and nothing else. A pending flag
 * enforces a single in-flight mutation per session: clicks while a
 * request is running are ignored and buttons render disabled.
 */

import { ApiClient, ApiError, SessionSnapshot } from './api.js';
import { initialState, screenFor, ViewState } from './state.js';
import { render } from './views.js';

export class App {
    readonly state: ViewState;
    private readonly api: ApiClient;
    private readonly root: HTMLElement;

    constructor(root: HTMLElement, api: ApiClient) {
        this.root = root;
        this.api = api;
        this.state = initialState();
        this.root.addEventListener('click', (event) => {
            const target = (event.target as HTMLElement).closest('[data-action]');
            if (!target) {
                return;
            }
            void this.dispatch(
                target.getAttribute('data-action')!,
                (name) => target.getAttribute(`data-${name}`) ?? '',
            );
        });
    }

    async boot(): Promise<void> {
        await this.run('boot', async () => {
            this.state.kbs = await this.api.listKbs();
        });
    }

    /** Routes a data-action click; exposed for scripted tests. */
    dispatch(action: string, attr: (name: string) => string): Promise<void> {
        switch (action) {
            case 'start': {
                const requirement =
                    (this.root.querySelector('#requirement') as HTMLTextAreaElement | null)?.value ?? '';
                const kb = (this.root.querySelector('#kb-select') as HTMLSelectElement | null)?.value ?? '';
                return this.start(requirement, kb);
            }
            case 'answer':
                return this.answer(attr('value'));
            case 'retract':
                return this.retract(attr('property'));
            case 'ask': {
                const input = this.root.querySelector('#assistant-input') as HTMLInputElement | null;
                return this.ask(input?.value ?? '');
            }
            case 'select':
                return this.select(attr('pattern'));
            case 'compare':
                this.toggleCompare(attr('pattern'));
                return Promise.resolve();
            case 'export':
                this.exportTranscript();
                return Promise.resolve();
            case 'retry':
                return this.retry();
            default:
                return Promise.resolve();
        }
    }

    async start(requirement: string, kb: string): Promise<void> {
        await this.run('start', async () => {
            this.state.session = await this.api.createSession(requirement, kb);
            this.state.exchanges = [];
            this.state.comparison = [];
            await this.advance();
        });
    }

    async answer(value: string): Promise<void> {
        const question = this.state.question;
        const session = this.state.session;
        if (!question || !session) {
            return;
        }
        await this.run('answer', async () => {
            await this.api.answer(session.id, question.property, value);
            await this.refreshSession();
            await this.advance();
        });
    }

    async retract(property: string): Promise<void> {
        const session = this.state.session;
        if (!session) {
            return;
        }
        await this.run('retract', async () => {
            await this.api.retract(session.id, property);
            await this.refreshSession();
            await this.advance();
        });
    }

    async ask(question: string): Promise<void> {
        const session = this.state.session;
        if (!session || !question.trim()) {
            return;
        }
        await this.run('ask', async () => {
            const exchange = await this.api.askAssistant(session.id, question);
            this.state.exchanges = [...this.state.exchanges, exchange];
        });
    }

    async select(pattern: string): Promise<void> {
        const session = this.state.session;
        if (!session) {
            return;
        }
        await this.run('select', async () => {
            this.state.session = await this.api.select(session.id, pattern);
            this.state.recommendations = null;
            this.state.comparison = [];
            this.state.exchanges = [];
            await this.advance();
        });
    }

    toggleCompare(pattern: string): void {
        const picked = this.state.comparison;
        this.state.comparison = picked.includes(pattern)
            ? picked.filter((candidate) => candidate !== pattern)
            : [...picked, pattern].slice(-2);
        this.renderNow();
    }

    /** Transcript export payload; the browser handler wraps it in a download. */
    exportTranscriptText(): string {
        const session = this.state.session;
        return JSON.stringify(
            {
                requirement: session?.requirement ?? '',
                selected_sp: session?.selected_sp ?? null,
                selected_sdp: session?.selected_sdp ?? null,
                transcript: session?.transcript ?? [],
            },
            null,
            2,
        );
    }

    private exportTranscript(): void {
        const text = this.exportTranscriptText();
        if (typeof URL.createObjectURL !== 'function') {
            return; // non-browser environment: the text accessor is the contract
        }
        const url = URL.createObjectURL(new Blob([text], { type: 'application/json' }));
        const link = document.createElement('a');
        link.href = url;
        link.download = 'session-transcript.json';
        link.click();
        URL.revokeObjectURL(url);
    }

    private async refreshSession(): Promise<void> {
        const session = this.state.session;
        if (session) {
            this.state.session = await this.api.getSession(session.id);
        }
    }

    /**
     * Pull whatever the current session state needs next: the next question
     * while eliciting, the ranked payload once elicitation is complete.
     */
    private async advance(): Promise<void> {
        const session = this.state.session;
        if (!session) {
            return;
        }
        this.state.question = null;
        if (session.state === 'eliciting') {
            const payload = await this.api.nextQuestion(session.id);
            if (payload.question) {
                this.state.question = payload.question;
                this.state.session = { ...session, state: payload.state as SessionSnapshot['state'] };
            } else {
                // Elicitation is complete; fetch the ranking and the
                // transitioned snapshot.
                this.state.recommendations = await this.api.recommendations(session.id);
                await this.refreshSession();
            }
        }
        this.state.screen = screenFor(this.state.session!);
        if (this.state.screen === 'recommendations' && !this.state.recommendations) {
            // Restored session already awaiting selection: the payload is not
            // re-fetchable by contract, so surface the recommended ids.
            this.state.recommendations = {
                kb: this.state.session!.active_kb,
                context: this.state.session!.context,
                weights: {},
                fired_rules: [],
                recommendations: (this.state.session!.recommended ?? []).map((pattern, index) => ({
                    rank: index + 1,
                    pattern,
                    score: Number.NaN,
                    contributions: {},
                    description: '',
                })),
                exclusions: [],
            };
        }
    }

    private async run(action: string, body: () => Promise<void>): Promise<void> {
        if (this.state.pending) {
            return; // single in-flight mutation per session
        }
        this.state.pending = true;
        this.state.error = null;
        this.renderNow();
        try {
            await body();
        } catch (error) {
            if (error instanceof ApiError) {
                this.state.error = {
                    message: error.message,
                    code: error.code,
                    retry: () => void this.run(action, body),
                };
            } else {
                throw error;
            }
        } finally {
            this.state.pending = false;
            this.renderNow();
        }
    }

    private async retry(): Promise<void> {
        this.state.error?.retry?.();
    }

    renderNow(): void {
        this.root.replaceChildren(render(this.state));
    }
}

export function mount(root: HTMLElement, baseUrl: string): App {
    const app = new App(root, new ApiClient(baseUrl));
    void app.boot();
    return app;
}
