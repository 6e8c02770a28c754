import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';

describe('ApiClient', () => {
    it('unwraps the service error envelope', async () => {
        const client = new ApiClient('http://x', async () =>
            new Response(
                JSON.stringify({ error: { code: 'unknown_session', message: 'nope', details: null } }),
                { status: 404, headers: { 'content-type': 'application/json' } },
            ),
        );
        const failure = await client.getSession('missing').catch((error) => error);
        expect(failure).toBeInstanceOf(ApiError);
        expect(failure.code).toBe('unknown_session');
        expect(failure.status).toBe(404);
        expect(failure.message).toBe('nope');
    });

    it('maps network failures to a retryable unreachable error', async () => {
        const client = new ApiClient('http://x', async () => {
            throw new TypeError('fetch failed');
        });
        const failure = await client.listKbs().catch((error) => error);
        expect(failure).toBeInstanceOf(ApiError);
        expect(failure.code).toBe('unreachable');
        expect(failure.status).toBe(0);
    });

    it('tolerates non-JSON error bodies', async () => {
        const client = new ApiClient('http://x', async () => new Response('boom', { status: 502 }));
        const failure = await client.listKbs().catch((error) => error);
        expect(failure.code).toBe('unknown');
        expect(failure.status).toBe(502);
    });

    it('strips trailing slashes from the base url', async () => {
        let seen = '';
        const client = new ApiClient('http://svc/', async (input) => {
            seen = input;
            return new Response('[]', { status: 200, headers: { 'content-type': 'application/json' } });
        });
        await client.listKbs();
        expect(seen).toBe('http://svc/kbs');
    });
});
