/** HTML string renderers for the wizard and register explorer. */

import { bandColor, type RegisterFilters, type RegisterView } from './explorer.js';
import type { Report, SessionEnvelope } from './types.js';
import { pageCompletion, type WizardState } from './wizard.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

const esc = escapeHtml;

export function renderBriefForm(): string {
  return `
<section class="card">
  <h2>New assessment</h2>
  <p>Describe the LLM use case; a questionnaire tailored to it follows.</p>
  <label>Title <input id="brief-title" maxlength="200" placeholder="e.g. Clinical notes summarizer"></label>
  <label>Description <textarea id="brief-description" rows="5" placeholder="What the application does, for whom, with which model and data."></textarea></label>
  <button id="brief-submit" class="primary">Start intake</button>
  <p id="brief-error" class="error" hidden></p>
</section>`;
}

export function renderWizard(state: WizardState): string {
  const page = state.pages[state.currentPage];
  if (!page) return '<section class="card"><p>No questionnaire yet.</p></section>';
  const completion = pageCompletion(page);
  const tabs = state.pages
    .map((p, index) => {
      const done = pageCompletion(p);
      const classes = [
        'dim-tab',
        index === state.currentPage ? 'active' : '',
        done.answered === done.total ? 'done' : '',
      ]
        .filter(Boolean)
        .join(' ');
      return `<button class="${classes}" data-page="${index}">${esc(p.dimension)}</button>`;
    })
    .join('');
  const questions = page.questions
    .map(
      (status) => `
  <div class="question">
    <label for="q-${esc(status.question.id)}">${esc(status.question.prompt)}</label>
    <textarea id="q-${esc(status.question.id)}" data-question-id="${esc(status.question.id)}"
      rows="2">${esc(status.value)}</textarea>
  </div>`,
    )
    .join('');
  const pct = Math.round(state.completeness * 100);
  const runAttrs = state.runEnabled ? '' : 'disabled';
  const forceToggle = state.forceVisible
    ? `<label class="force"><input type="checkbox" id="force-run"> run anyway (below ${Math.round(
        state.minCompleteness * 100,
      )}% completeness)</label>`
    : '';
  return `
<section class="card">
  <h2>Intake: ${esc(page.dimension)} <small>(${completion.answered}/${completion.total} answered)</small></h2>
  <nav class="dim-tabs">${tabs}</nav>
  ${questions}
  <div class="wizard-actions">
    <button id="save-page">Save answers</button>
    <span class="progress">completeness ${pct}%</span>
    <button id="run-assessment" class="primary" ${runAttrs}>Run assessment</button>
    ${forceToggle}
  </div>
  <p id="wizard-error" class="error" hidden></p>
</section>`;
}

export function renderRunning(envelope: SessionEnvelope, stageNote: string): string {
  return `
<section class="card">
  <h2>Assessment running</h2>
  <p>Session <code>${esc(envelope.session.session_id)}</code> is ${esc(
    envelope.session.state,
  )}. ${esc(stageNote)}</p>
  <div class="spinner"></div>
</section>`;
}

export function renderFailed(envelope: SessionEnvelope): string {
  return `
<section class="card">
  <h2>Assessment failed</h2>
  <p class="error">${esc(envelope.session.error ?? 'unknown failure')}</p>
</section>`;
}

function renderMatrix(view: RegisterView): string {
  let rows = '';
  for (let severity = 5; severity >= 1; severity -= 1) {
    let cells = `<th>S${severity}</th>`;
    for (let likelihood = 1; likelihood <= 5; likelihood += 1) {
      const ids = view.cells[severity - 1][likelihood - 1];
      const markers = ids
        .map((id) => {
          const record = view.rows.find((r) => r.record_id === id);
          const color = record ? bandColor(record.band) : '#888';
          return `<a class="marker" href="#record-${esc(id)}" title="${esc(id)}"
            style="background:${color}"></a>`;
        })
        .join('');
      cells += `<td data-cell="${severity}x${likelihood}">${markers}</td>`;
    }
    rows += `<tr>${cells}</tr>`;
  }
  const header = [1, 2, 3, 4, 5].map((l) => `<th>L${l}</th>`).join('');
  return `<table class="matrix"><thead><tr><th></th>${header}</tr></thead><tbody>${rows}</tbody></table>`;
}

function filterControls(filters: RegisterFilters): string {
  const band = filters.band ?? '';
  const source = filters.source ?? '';
  const category = filters.category ?? '';
  const option = (value: string, label: string, current: string) =>
    `<option value="${value}" ${value === current ? 'selected' : ''}>${label}</option>`;
  return `
  <div class="filters">
    <select id="filter-band">
      ${option('', 'all bands', band)}
      ${['critical', 'high', 'medium', 'low', 'negligible']
        .map((value) => option(value, value, band))
        .join('')}
    </select>
    <select id="filter-source">
      ${option('', 'all sources', source)}
      ${option('static_agent', 'catalog agents', source)}
      ${option('dynamic_agent', 'dependency search', source)}
    </select>
    <select id="filter-category">
      ${option('', 'all categories', category)}
      ${option('1', 'Content Risks', category)}
      ${option('2', 'Context Risks', category)}
      ${option('3', 'Trust Risks', category)}
      ${option('4', 'Societal Impact and Sustainability Risks', category)}
    </select>
  </div>`;
}

export function renderExplorer(report: Report, view: RegisterView): string {
  const rows = view.rows
    .map((record, index) => {
      const measures = report.mitigations.find(
        (advice) => advice.record_id === record.record_id,
      );
      const measureItems = (measures?.measures ?? [])
        .map((measure) => `<li>${esc(measure)}</li>`)
        .join('');
      const residual = measures?.residual_note
        ? `<p class="residual">Residual: ${esc(measures.residual_note)}</p>`
        : '';
      const sources = record.source_urls.length
        ? `<p class="sources">${record.source_urls
            .map((url) => `<a href="${esc(url)}" rel="noopener">${esc(url)}</a>`)
            .join(' ')}</p>`
        : '';
      return `
  <article class="record" id="record-${esc(record.record_id)}" data-record-row>
    <header>
      <span class="rank">#${index + 1}</span>
      <code>${esc(record.record_id)}</code>
      <strong>${esc(record.subject_label)}</strong>
      <span class="band" style="background:${bandColor(record.band)}">${esc(record.band)}</span>
    </header>
    <p class="scores">severity ${record.severity}/5 &middot; likelihood ${record.likelihood}/5 &middot; score ${record.score}</p>
    <p>${esc(record.rationale)}</p>
    <ul class="measures">${measureItems}</ul>
    ${residual}
    ${sources}
  </article>`;
    })
    .join('');
  const eliminated = report.eliminated
    .map(
      (record) =>
        `<tr><td><code>${esc(record.record_id)}</code></td><td>${esc(
          record.subject_label,
        )}</td><td>${record.score}</td><td>${esc(record.band)}</td></tr>`,
    )
    .join('');
  return `
<section class="card">
  <h2>${esc(report.profile_summary.title)}</h2>
  <p>Report <code>${esc(report.report_id)}</code> &middot; ranking: ${esc(
    report.risk_register.ranking_basis,
  )}</p>
  <div class="downloads">
    <button data-download="structured">Download JSON</button>
    <button data-download="markdown">Download Markdown</button>
    <button data-download="html">Download HTML</button>
  </div>
  <h3>Severity &times; likelihood</h3>
  ${renderMatrix(view)}
  ${filterControls(view.filters)}
  <h3>Ranked records (${view.rows.length} of ${report.risk_register.records.length})</h3>
  ${rows || '<p>No records match the active filters.</p>'}
  <h3>Eliminated records</h3>
  ${
    eliminated
      ? `<table class="eliminated"><thead><tr><th>Record</th><th>Risk</th><th>Score</th><th>Band</th></tr></thead><tbody>${eliminated}</tbody></table>`
      : '<p>No records were eliminated.</p>'
  }
</section>`;
}
