// Seeded payloads shaped exactly like the service's JSON responses.

import type { ClaimSummary, QueuePage, ReviewItem } from '../src/types.js';

export function claimSummary(
  claimId: string,
  vehicleId: string,
  status = 'flagged',
): ClaimSummary {
  return {
    claim_id: claimId,
    vehicle_id: vehicleId,
    submitted_at: 1_700_000_000_000,
    status,
    evidence: [
      {
        image_id: `${claimId}-body`,
        kind: 'full_body',
        image_url: `/evidence/${claimId}/${claimId}-body`,
        regions: [],
      },
      {
        image_id: `${claimId}-close`,
        kind: 'close_up',
        image_url: `/evidence/${claimId}/${claimId}-close`,
        regions: [
          {
            bbox: { cx: 0.5, cy: 0.4, w: 0.3, h: 0.2 },
            class: 'scratch',
            confidence: null,
            source: 'annotation',
          },
        ],
      },
    ],
  };
}

export function reviewItem(
  claimId: string,
  vehicleId: string,
  similarity: number,
  matchedClaimId: string,
): ReviewItem {
  return {
    claim: claimSummary(claimId, vehicleId),
    assessment: {
      flagged: true,
      best: {
        claim_id: matchedClaimId,
        vehicle_id: vehicleId,
        image_id: `${matchedClaimId}-close`,
        similarity,
        rank: 1,
      },
      matches: [
        {
          claim_id: matchedClaimId,
          vehicle_id: vehicleId,
          image_id: `${matchedClaimId}-close`,
          similarity,
          rank: 1,
        },
        {
          claim_id: 'claim-far',
          vehicle_id: 'v-far',
          image_id: 'claim-far-close',
          similarity: similarity - 0.1234,
          rank: 2,
        },
      ],
      policy: { mode: 'cross_vehicle', threshold: 0.92, top_k: 10 },
    },
    best_similarity: similarity,
    matched_claims: [claimSummary(matchedClaimId, vehicleId, 'pending')],
  };
}

/** Three flagged claims in descending best-similarity order, like the
 *  service returns them. */
export function seededQueue(): QueuePage {
  const items = [
    reviewItem('dup-2', 'v002', 0.987654, 'claim-v002'),
    reviewItem('dup-0', 'v000', 0.954321, 'claim-v000'),
    reviewItem('dup-1', 'v001', 0.93, 'claim-v001'),
  ];
  return { page: 1, page_size: 20, total: items.length, items };
}

/** Minimal stateful stand-in for the claim service: queue lists flagged
 *  claims by similarity; adjudication mutates status; repeats conflict. */
export class FakeBackend {
  statuses = new Map<string, string>();
  queue: ReviewItem[];

  constructor(queue: ReviewItem[] = seededQueue().items) {
    this.queue = queue;
    for (const item of queue) this.statuses.set(item.claim.claim_id, 'flagged');
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = typeof input === 'string' ? input : input.toString();
    const adjudicate = url.match(/\/claims\/([^/]+)\/adjudicate$/);
    if (adjudicate && init?.method === 'POST') {
      const claimId = decodeURIComponent(adjudicate[1]!);
      if (this.statuses.get(claimId) !== 'flagged') {
        return new Response(
          JSON.stringify({
            code: 'illegal_transition',
            message: `claim ${claimId} is not flagged`,
            details: {},
          }),
          { status: 409, headers: { 'Content-Type': 'application/json' } },
        );
      }
      const body = JSON.parse(String(init.body)) as { decision: string };
      const status = body.decision === 'fraud' ? 'fraud_confirmed' : 'cleared';
      this.statuses.set(claimId, status);
      const item = this.queue.find((entry) => entry.claim.claim_id === claimId)!;
      return new Response(
        JSON.stringify({ ...item.claim, status, adjudication: null }),
        { status: 200, headers: { 'Content-Type': 'application/json' } },
      );
    }
    if (url.includes('/review/queue')) {
      const items = this.queue
        .filter((item) => this.statuses.get(item.claim.claim_id) === 'flagged')
        .sort((a, b) => b.best_similarity - a.best_similarity);
      const page: QueuePage = {
        page: 1,
        page_size: 20,
        total: items.length,
        items,
      };
      return new Response(JSON.stringify(page), {
        status: 200,
        headers: { 'Content-Type': 'application/json' },
      });
    }
    return new Response(
      JSON.stringify({ code: 'not_found', message: `no route ${url}`, details: {} }),
      { status: 404, headers: { 'Content-Type': 'application/json' } },
    );
  };
}
