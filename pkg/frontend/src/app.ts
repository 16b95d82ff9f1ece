// DOM wiring: polling queue view, comparison drill-down, decision submit.
// All content rendering happens through the pure functions in render.ts.

import { ApiClient } from './api.js';
import { QueueController } from './controller.js';
import { comparisonView, conflictNotice, errorBanner, queueView } from './render.js';

const POLL_INTERVAL_MS = 15_000;
const REVIEWER_ID = 'console';

type View = { kind: 'queue' } | { kind: 'comparison'; claimId: string };

export function startApp(root: HTMLElement, api: ApiClient = new ApiClient()): void {
  const controller = new QueueController(api);
  let view: View = { kind: 'queue' };
  let notice = '';
  let pollTimer: number | undefined;

  function render(): void {
    if (view.kind === 'comparison') {
      const item = controller.find(view.claimId);
      if (item === undefined) {
        view = { kind: 'queue' };
      } else {
        root.innerHTML = notice + comparisonView(item);
        notice = '';
        return;
      }
    }
    root.innerHTML =
      notice + queueView(controller.items, controller.page, controller.total);
    notice = '';
  }

  async function refresh(): Promise<void> {
    try {
      await controller.refresh();
      render();
    } catch {
      // keep whatever is on screen; the banner offers a retry
      root.innerHTML =
        errorBanner(`Could not reach the claim service: ${controller.lastError}`) +
        root.innerHTML;
    }
  }

  function schedulePolling(): void {
    if (pollTimer !== undefined) window.clearInterval(pollTimer);
    pollTimer = window.setInterval(() => {
      if (view.kind === 'queue') void refresh();
    }, POLL_INTERVAL_MS);
  }

  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    if (target.closest('.retry')) {
      void refresh();
      return;
    }
    const openButton = target.closest<HTMLElement>('.open-comparison');
    if (openButton?.dataset.claimId) {
      view = { kind: 'comparison', claimId: openButton.dataset.claimId };
      render();
      return;
    }
    if (target.closest('.back-to-queue')) {
      view = { kind: 'queue' };
      render();
      return;
    }
    const decideButton = target.closest<HTMLElement>('.decide');
    if (decideButton && view.kind === 'comparison') {
      const claimId = view.claimId;
      const decision = decideButton.dataset.decision as 'fraud' | 'legitimate';
      const noteInput = root.querySelector<HTMLInputElement>('.decision-note');
      decideButton.setAttribute('disabled', 'disabled');
      void controller
        .decide(claimId, decision, REVIEWER_ID, noteInput?.value ?? '')
        .then((outcome) => {
          if (outcome === 'conflict') notice = conflictNotice(claimId);
          view = { kind: 'queue' };
          render();
        })
        .catch((error: unknown) => {
          root.innerHTML =
            errorBanner(`Decision failed: ${String(error)}`) + root.innerHTML;
        });
    }
  });

  void refresh();
  schedulePolling();
}

declare global {
  interface Window {
    __claimguardStart?: typeof startApp;
  }
}

if (typeof document !== 'undefined') {
  window.__claimguardStart = startApp;
  const mount = document.getElementById('app');
  if (mount) startApp(mount);
}
