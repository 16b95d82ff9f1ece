// API client against a mocked fetch: URLs, bodies, and error mapping.

import { afterEach, describe, expect, it, vi } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';
import { seededQueue } from './fixtures.js';

afterEach(() => {
  vi.unstubAllGlobals();
});

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

describe('ApiClient', () => {
  it('loads the queue from the documented endpoint', async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse(seededQueue()));
    vi.stubGlobal('fetch', fetchMock);
    const page = await new ApiClient().loadQueue(2, 5);
    expect(fetchMock).toHaveBeenCalledWith('/review/queue?page=2&page_size=5');
    expect(page.items).toHaveLength(3);
    expect(page.items[0]!.best_similarity).toBeCloseTo(0.987654, 9);
  });

  it('posts adjudications with the documented body', async () => {
    const fetchMock = vi
      .fn()
      .mockResolvedValue(jsonResponse({ claim_id: 'dup-0', status: 'fraud_confirmed' }));
    vi.stubGlobal('fetch', fetchMock);
    await new ApiClient().adjudicate('dup-0', 'fraud', 'rev-1', 'obvious copy');
    const [url, init] = fetchMock.mock.calls[0]!;
    expect(url).toBe('/claims/dup-0/adjudicate');
    expect(init.method).toBe('POST');
    expect(JSON.parse(init.body)).toEqual({
      decision: 'fraud',
      reviewer_id: 'rev-1',
      note: 'obvious copy',
    });
  });

  it('maps service error bodies onto ApiError', async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse(
        { code: 'illegal_transition', message: 'not flagged', details: {} },
        409,
      ),
    );
    vi.stubGlobal('fetch', fetchMock);
    const error = await new ApiClient()
      .adjudicate('dup-0', 'fraud', 'rev-1', '')
      .catch((e: unknown) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).status).toBe(409);
    expect((error as ApiError).code).toBe('illegal_transition');
    expect((error as ApiError).isConflict).toBe(true);
  });

  it('survives non-JSON error bodies', async () => {
    vi.stubGlobal(
      'fetch',
      vi.fn().mockResolvedValue(new Response('gateway exploded', { status: 502 })),
    );
    const error = await new ApiClient().loadQueue().catch((e: unknown) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).status).toBe(502);
    expect((error as ApiError).code).toBe('unknown');
  });

  it('prefixes a configured base url', async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse(seededQueue()));
    vi.stubGlobal('fetch', fetchMock);
    await new ApiClient('http://localhost:8330').loadQueue();
    expect(fetchMock.mock.calls[0]![0]).toBe(
      'http://localhost:8330/review/queue?page=1&page_size=20',
    );
  });
});
