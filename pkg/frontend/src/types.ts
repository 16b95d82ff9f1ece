// API payload shapes, mirroring the service's JSON exactly.

export interface BBox {
  cx: number;
  cy: number;
  w: number;
  h: number;
}

export interface Region {
  bbox: BBox;
  class: string;
  confidence: number | null;
  source: string;
}

export interface EvidenceRef {
  image_id: string;
  kind: 'full_body' | 'close_up';
  image_url: string;
  regions: Region[];
}

export interface ClaimSummary {
  claim_id: string;
  vehicle_id: string;
  submitted_at: number;
  status: string;
  evidence: EvidenceRef[];
}

export interface MatchResult {
  claim_id: string;
  vehicle_id: string;
  image_id: string;
  similarity: number;
  rank: number;
}

export interface Assessment {
  flagged: boolean;
  best: MatchResult | null;
  matches: MatchResult[];
  policy: { mode: string; threshold: number; top_k: number };
}

export interface ReviewItem {
  claim: ClaimSummary;
  assessment: Assessment;
  best_similarity: number;
  matched_claims: ClaimSummary[];
}

export interface QueuePage {
  page: number;
  page_size: number;
  total: number;
  items: ReviewItem[];
}

export interface ClaimRecord extends ClaimSummary {
  adjudication: {
    reviewer_id: string;
    decision: 'fraud' | 'legitimate';
    note: string;
    decided_at: number;
  } | null;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details: Record<string, unknown>;
}
