/** DOM shell: wires the brief form, wizard, polling view, and explorer. */

import { ApiClient, ApiError, pollUntilSettled } from './api.js';
import { buildRegisterView, type RegisterFilters } from './explorer.js';
import {
  renderBriefForm,
  renderExplorer,
  renderFailed,
  renderRunning,
  renderWizard,
} from './render.js';
import type { Report, SessionEnvelope, Taxonomy } from './types.js';
import { buildWizardState } from './wizard.js';

const app = document.getElementById('app') as HTMLElement;
const client = new ApiClient(
  (window as unknown as { GUARD_API_BASE?: string }).GUARD_API_BASE ?? '',
);

let currentPage = 0;
let filters: RegisterFilters = {};
let taxonomy: Taxonomy | undefined;

function showError(id: string, message: string): void {
  const node = document.getElementById(id);
  if (node) {
    node.textContent = message;
    node.removeAttribute('hidden');
  }
}

function sessionIdFromHash(): string | null {
  const match = window.location.hash.match(/^#\/assessments\/([0-9a-f]+)/);
  return match ? match[1] : null;
}

async function boot(): Promise<void> {
  const sessionId = sessionIdFromHash();
  if (!sessionId) {
    app.innerHTML = renderBriefForm();
    bindBriefForm();
    return;
  }
  try {
    await showSession(await client.getAssessment(sessionId));
  } catch (error) {
    app.innerHTML = renderBriefForm();
    bindBriefForm();
    showError('brief-error', String(error));
  }
}

function bindBriefForm(): void {
  document.getElementById('brief-submit')?.addEventListener('click', async () => {
    const title = (document.getElementById('brief-title') as HTMLInputElement).value;
    const description = (
      document.getElementById('brief-description') as HTMLTextAreaElement
    ).value;
    try {
      const envelope = await client.createAssessment(title, description);
      window.location.hash = `#/assessments/${envelope.session.session_id}`;
      await showSession(envelope);
    } catch (error) {
      showError('brief-error', error instanceof ApiError ? error.message : String(error));
    }
  });
}

async function showSession(envelope: SessionEnvelope): Promise<void> {
  const { state } = envelope.session;
  if (state === 'intake_ready' || state === 'created') {
    showWizard(envelope);
  } else if (state === 'running') {
    await watchRun(envelope);
  } else if (state === 'complete') {
    await showExplorer(envelope);
  } else {
    app.innerHTML = renderFailed(envelope);
  }
}

function collectPageAnswers(): Record<string, string> {
  const answers: Record<string, string> = {};
  app.querySelectorAll<HTMLTextAreaElement>('[data-question-id]').forEach((area) => {
    if (area.value.trim()) {
      answers[area.dataset.questionId as string] = area.value;
    }
  });
  return answers;
}

function showWizard(envelope: SessionEnvelope): void {
  const state = buildWizardState(envelope, currentPage);
  currentPage = state.currentPage;
  app.innerHTML = renderWizard(state);

  app.querySelectorAll<HTMLButtonElement>('.dim-tab').forEach((tab) => {
    tab.addEventListener('click', async () => {
      await saveAnswers(envelope, Number(tab.dataset.page));
    });
  });
  document.getElementById('save-page')?.addEventListener('click', async () => {
    await saveAnswers(envelope, currentPage);
  });
  document.getElementById('run-assessment')?.addEventListener('click', async () => {
    await saveAnswers(envelope, currentPage, { rerender: false });
    const force =
      (document.getElementById('force-run') as HTMLInputElement | null)?.checked ??
      false;
    try {
      const running = await client.runAssessment(envelope.session.session_id, force);
      await watchRun(running);
    } catch (error) {
      // refresh from the server, then surface the error verbatim
      const fresh = await client.getAssessment(envelope.session.session_id);
      showWizard(fresh);
      showError('wizard-error', error instanceof ApiError ? error.message : String(error));
    }
  });
}

async function saveAnswers(
  envelope: SessionEnvelope,
  nextPage: number,
  options: { rerender?: boolean } = {},
): Promise<void> {
  const answers = collectPageAnswers();
  let fresh = envelope;
  try {
    if (Object.keys(answers).length > 0) {
      fresh = await client.submitAnswers(envelope.session.session_id, answers);
    } else {
      fresh = await client.getAssessment(envelope.session.session_id);
    }
  } catch (error) {
    showError('wizard-error', error instanceof ApiError ? error.message : String(error));
    return;
  }
  currentPage = nextPage;
  if (options.rerender !== false) {
    showWizard(fresh);
  }
}

async function watchRun(envelope: SessionEnvelope): Promise<void> {
  app.innerHTML = renderRunning(envelope, 'Polling for progress every second.');
  const settled = await pollUntilSettled(client, envelope.session.session_id, {
    intervalMs: 1000,
    onTick: (tick) => {
      app.innerHTML = renderRunning(tick, 'Polling for progress every second.');
    },
  });
  await showSession(settled);
}

async function showExplorer(envelope: SessionEnvelope): Promise<void> {
  const raw = await client.downloadReport(envelope.session.session_id, 'structured');
  const report = JSON.parse(raw) as Report;
  if (!taxonomy) {
    taxonomy = await client.getTaxonomy();
  }
  const view = buildRegisterView(report, filters, taxonomy);
  app.innerHTML = renderExplorer(report, view);

  const rebind = (id: string, key: keyof RegisterFilters) => {
    document.getElementById(id)?.addEventListener('change', async (event) => {
      const value = (event.target as HTMLSelectElement).value;
      filters = { ...filters, [key]: value || undefined };
      await showExplorer(envelope);
    });
  };
  rebind('filter-band', 'band');
  rebind('filter-source', 'source');
  rebind('filter-category', 'category');

  app.querySelectorAll<HTMLButtonElement>('[data-download]').forEach((button) => {
    button.addEventListener('click', async () => {
      const format = button.dataset.download as 'structured' | 'markdown' | 'html';
      // pass the API bytes through untouched
      const body = await client.downloadReport(envelope.session.session_id, format);
      const names = { structured: 'report.json', markdown: 'report.md', html: 'report.html' };
      const types = {
        structured: 'application/json',
        markdown: 'text/markdown',
        html: 'text/html',
      };
      const blob = new Blob([body], { type: types[format] });
      const link = document.createElement('a');
      link.href = URL.createObjectURL(blob);
      link.download = names[format];
      link.click();
      URL.revokeObjectURL(link.href);
    });
  });
}

window.addEventListener('hashchange', () => {
  currentPage = 0;
  filters = {};
  void boot();
});

void boot();
