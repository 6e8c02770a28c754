/**
 * Scripted fetch: replays recorded service exchanges in order and fails
 * the test on any divergence (unexpected call, wrong method/path/body).
 * This keeps the UI honest about making exactly the calls the story
 * expects, and serves real payload bytes recorded from the service.
 */

import { expect } from 'vitest';

import type { FetchLike } from '../src/api.js';

export interface RecordedExchange {
    method: string;
    path: string;
    body: unknown;
    status: number;
    response: string;
}

export interface StoryFixture {
    session_id: string;
    exchanges: RecordedExchange[];
}

export class ReplayFetch {
    private cursor = 0;

    constructor(private readonly exchanges: RecordedExchange[], private readonly base: string) {}

    get fetch(): FetchLike {
        return async (input: string, init?: RequestInit) => {
            const expected = this.exchanges[this.cursor];
            expect(expected, `unexpected extra request ${init?.method ?? 'GET'} ${input}`).toBeDefined();
            this.cursor += 1;
            expect(input).toBe(`${this.base}${expected.path}`);
            expect(init?.method ?? 'GET').toBe(expected.method);
            const sentBody = init?.body ? JSON.parse(init.body as string) : null;
            expect(sentBody).toEqual(expected.body);
            return new Response(expected.response, {
                status: expected.status,
                headers: { 'content-type': 'application/json' },
            });
        };
    }

    get consumed(): number {
        return this.cursor;
    }

    assertDrained(): void {
        expect(this.cursor).toBe(this.exchanges.length);
    }

    /** The parsed response of the exchange at `index` (for oracle comparisons). */
    payloadAt<T>(index: number): T {
        return JSON.parse(this.exchanges[index].response) as T;
    }

    findPayload<T>(predicate: (exchange: RecordedExchange) => boolean): T {
        const match = this.exchanges.find(predicate);
        expect(match).toBeDefined();
        return JSON.parse(match!.response) as T;
    }
}
