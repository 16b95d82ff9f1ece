// Pure renderers: API payloads in, HTML strings out. Keeping these free of
// DOM and fetch access is what lets the mock-API tests assert that every
// rendered number comes straight from a response payload.

import { escapeHtml, formatScore, formatTimestamp } from './format.js';
import type { ClaimSummary, EvidenceRef, Region, ReviewItem } from './types.js';

function overlayBoxes(regions: Region[]): string {
  // Overlay geometry comes from the same normalized coordinates the
  // backend stored; only unit conversion to percentages happens here.
  return regions
    .map((region) => {
      const left = (region.bbox.cx - region.bbox.w / 2) * 100;
      const top = (region.bbox.cy - region.bbox.h / 2) * 100;
      const width = region.bbox.w * 100;
      const height = region.bbox.h * 100;
      return (
        `<div class="damage-box damage-${escapeHtml(region.class)}" ` +
        `style="left:${left.toFixed(2)}%;top:${top.toFixed(2)}%;` +
        `width:${width.toFixed(2)}%;height:${height.toFixed(2)}%" ` +
        `title="${escapeHtml(region.class)}"></div>`
      );
    })
    .join('');
}

export function evidenceFigure(evidence: EvidenceRef, label: string): string {
  return `
    <figure class="evidence" data-image-id="${escapeHtml(evidence.image_id)}">
      <div class="evidence-frame">
        <img src="${escapeHtml(evidence.image_url)}" alt="${escapeHtml(label)}"
             onerror="this.closest('.evidence').classList.add('missing')">
        ${overlayBoxes(evidence.regions)}
        <div class="missing-note">image unavailable</div>
      </div>
      <figcaption>${escapeHtml(label)}</figcaption>
    </figure>`;
}

function thumbnails(claim: ClaimSummary): string {
  return claim.evidence
    .map((evidence) => evidenceFigure(evidence, evidence.kind.replace('_', ' ')))
    .join('');
}

export function queueCard(item: ReviewItem): string {
  const claim = item.claim;
  const matches = item.assessment.matches
    .map(
      (match) =>
        `<li><span class="match-rank">#${match.rank}</span> ` +
        `<span class="match-claim">${escapeHtml(match.claim_id)}</span> ` +
        `<span class="match-vehicle">${escapeHtml(match.vehicle_id)}</span> ` +
        `<span class="score">${formatScore(match.similarity)}</span></li>`,
    )
    .join('');
  return `
    <article class="queue-card" data-claim-id="${escapeHtml(claim.claim_id)}">
      <header>
        <h3>${escapeHtml(claim.claim_id)}</h3>
        <span class="vehicle">${escapeHtml(claim.vehicle_id)}</span>
        <span class="score best-score">${formatScore(item.best_similarity)}</span>
      </header>
      <div class="thumbs">${thumbnails(claim)}</div>
      <ul class="match-list">${matches}</ul>
      <footer>
        <span class="submitted">${formatTimestamp(claim.submitted_at)}</span>
        <button class="open-comparison" data-claim-id="${escapeHtml(claim.claim_id)}">
          Compare evidence
        </button>
      </footer>
    </article>`;
}

export function queueView(items: ReviewItem[], page: number, total: number): string {
  if (total === 0) {
    return `<div class="empty-state">No flagged claims. The queue is clear.</div>`;
  }
  // Cards render in payload order: the backend already ranks by similarity.
  const cards = items.map(queueCard).join('');
  return `
    <div class="queue-meta">${total} flagged claim${total === 1 ? '' : 's'} · page ${page}</div>
    <div class="queue-list">${cards}</div>`;
}

export function comparisonView(item: ReviewItem): string {
  const claim = item.claim;
  const probeCloseUps = claim.evidence.filter((e) => e.kind === 'close_up');
  const probeBodies = claim.evidence.filter((e) => e.kind === 'full_body');
  const matchSections = item.matched_claims
    .map((matched) => {
      const scores = item.assessment.matches
        .filter((match) => match.claim_id === matched.claim_id)
        .map(
          (match) =>
            `<span class="score" data-match-image="${escapeHtml(match.image_id)}">` +
            `${formatScore(match.similarity)}</span>`,
        )
        .join(' ');
      return `
        <section class="matched-claim" data-claim-id="${escapeHtml(matched.claim_id)}">
          <h4>${escapeHtml(matched.claim_id)}
            <span class="vehicle">${escapeHtml(matched.vehicle_id)}</span>
            <span class="status">${escapeHtml(matched.status)}</span> ${scores}</h4>
          <div class="thumbs">${thumbnails(matched)}</div>
        </section>`;
    })
    .join('');
  return `
    <div class="comparison" data-claim-id="${escapeHtml(claim.claim_id)}">
      <header class="comparison-header">
        <button class="back-to-queue">&larr; Queue</button>
        <h2>${escapeHtml(claim.claim_id)}</h2>
        <span class="vehicle">${escapeHtml(claim.vehicle_id)}</span>
        <span class="score best-score">best ${formatScore(item.best_similarity)}</span>
      </header>
      <div class="comparison-columns">
        <section class="probe">
          <h4>Submitted evidence</h4>
          <div class="thumbs">
            ${probeCloseUps.map((e) => evidenceFigure(e, 'close up (probe)')).join('')}
            ${probeBodies.map((e) => evidenceFigure(e, 'full body (probe)')).join('')}
          </div>
        </section>
        <section class="matches">
          <h4>Matched history</h4>
          ${matchSections || '<div class="empty-state">No matched claims on record.</div>'}
        </section>
      </div>
      <footer class="decision-bar">
        <label>Note <input type="text" class="decision-note" placeholder="optional"></label>
        <button class="decide decide-fraud" data-decision="fraud">Confirm fraud</button>
        <button class="decide decide-legitimate" data-decision="legitimate">Legitimate</button>
      </footer>
    </div>`;
}

export function errorBanner(message: string): string {
  return `
    <div class="error-banner" role="alert">
      <span>${escapeHtml(message)}</span>
      <button class="retry">Retry</button>
    </div>`;
}

export function conflictNotice(claimId: string): string {
  return `
    <div class="conflict-notice" role="status">
      ${escapeHtml(claimId)} was already adjudicated elsewhere; queue refreshed.
    </div>`;
}
