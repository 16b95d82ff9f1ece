// Queue state machine, DOM-free so the adjudication flow is unit-testable:
// optimistic removal on decision, rollback or refresh on conflict.

import { ApiClient, ApiError } from './api.js';
import type { QueuePage, ReviewItem } from './types.js';

export type DecisionOutcome = 'applied' | 'conflict';

export class QueueController {
  items: ReviewItem[] = [];
  page = 1;
  pageSize = 20;
  total = 0;
  lastError: string | null = null;

  constructor(private readonly api: ApiClient) {}

  async refresh(): Promise<void> {
    try {
      const data: QueuePage = await this.api.loadQueue(this.page, this.pageSize);
      this.items = data.items;
      this.total = data.total;
      this.lastError = null;
    } catch (error) {
      this.lastError = error instanceof Error ? error.message : String(error);
      throw error;
    }
  }

  find(claimId: string): ReviewItem | undefined {
    return this.items.find((item) => item.claim.claim_id === claimId);
  }

  /** Optimistically drop the item, then confirm with the backend. On a 409
   *  the item was adjudicated elsewhere: refresh and report the conflict. */
  async decide(
    claimId: string,
    decision: 'fraud' | 'legitimate',
    reviewerId: string,
    note: string,
  ): Promise<DecisionOutcome> {
    const snapshotItems = this.items;
    const snapshotTotal = this.total;
    this.items = this.items.filter((item) => item.claim.claim_id !== claimId);
    this.total = Math.max(0, this.total - 1);
    try {
      await this.api.adjudicate(claimId, decision, reviewerId, note);
      return 'applied';
    } catch (error) {
      if (error instanceof ApiError && error.isConflict) {
        await this.refresh();
        return 'conflict';
      }
      this.items = snapshotItems;
      this.total = snapshotTotal;
      throw error;
    }
  }
}
