// Thin typed client over the service endpoints. Every number the console
// renders originates from these responses; nothing is recomputed client-side.

import type { ApiErrorBody, ClaimRecord, QueuePage } from './types.js';

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, body: ApiErrorBody | null) {
    super(body?.message ?? `request failed with status ${status}`);
    this.status = status;
    this.code = body?.code ?? 'unknown';
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    body = null;
  }
  return new ApiError(response.status, body);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  loadQueue(page = 1, pageSize = 20): Promise<QueuePage> {
    return this.get<QueuePage>(`/review/queue?page=${page}&page_size=${pageSize}`);
  }

  getClaim(claimId: string): Promise<ClaimRecord> {
    return this.get<ClaimRecord>(`/claims/${encodeURIComponent(claimId)}`);
  }

  adjudicate(
    claimId: string,
    decision: 'fraud' | 'legitimate',
    reviewerId: string,
    note: string,
  ): Promise<ClaimRecord> {
    return this.post<ClaimRecord>(`/claims/${encodeURIComponent(claimId)}/adjudicate`, {
      decision,
      reviewer_id: reviewerId,
      note,
    });
  }
}
