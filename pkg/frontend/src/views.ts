/**
 * Screen rendering. Pure functions from view state to DOM; all behavior
 * is attached through data-action attributes handled by the app's single
 * click listener. Rankings and scores are rendered exactly in payload
 * order — no sorting, no recomputation.
 */

import type { RecommendationEntry, SessionSnapshot } from './api.js';
import { stackedScoreBar, weightsLegend } from './charts.js';
import { answeredEntries, ViewState } from './state.js';

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
        node.setAttribute(key, value);
    }
    node.append(...children);
    return node;
}

export function render(state: ViewState): HTMLElement {
    const root = el('div', { class: 'app' });
    if (state.error) {
        root.appendChild(
            el(
                'div',
                { class: 'error-banner', 'data-testid': 'error-banner' },
                `Service error (${state.error.code}): ${state.error.message} `,
                el('button', { 'data-action': 'retry' }, 'Retry'),
            ),
        );
    }
    switch (state.screen) {
        case 'start':
            root.appendChild(renderStart(state));
            break;
        case 'questions':
            root.appendChild(renderQuestions(state));
            break;
        case 'recommendations':
            root.appendChild(renderRecommendations(state));
            break;
        case 'done':
            root.appendChild(renderDone(state));
            break;
    }
    return root;
}

function renderStart(state: ViewState): HTMLElement {
    const options = state.kbs
        .filter((kb) => kb.level === 'control')
        .map((kb) => el('option', { value: kb.id }, `${kb.id} (${kb.patterns} patterns)`));
    const startButton = el('button', { 'data-action': 'start' }, 'Start');
    if (state.pending) {
        startButton.setAttribute('disabled', '');
    }
    return el(
        'section',
        { class: 'screen start', 'data-testid': 'start-screen' },
        el('h1', {}, 'Pattern recommendation'),
        el('label', { for: 'requirement' }, 'Security requirement'),
        el('textarea', { id: 'requirement', rows: '3', placeholder: 'What must the system guarantee?' }),
        el('label', { for: 'kb-select' }, 'Catalog'),
        el('select', { id: 'kb-select' }, ...options),
        startButton,
    );
}

function header(session: SessionSnapshot): HTMLElement {
    const stageLabel = session.stage === 'sp' ? 'pattern selection' : 'design refinement';
    return el(
        'header',
        { class: 'session-header' },
        el('span', { class: 'stage-badge', 'data-testid': 'stage' }, stageLabel),
        el('span', { class: 'kb-name' }, ` catalog: ${session.active_kb} `),
        el(
            'span',
            { 'data-testid': 'feasible-count' },
            `${session.feasible_count} patterns feasible`,
        ),
        el('p', { class: 'requirement-echo' }, session.requirement),
    );
}

function renderQuestions(state: ViewState): HTMLElement {
    const session = state.session!;
    const screen = el('section', { class: 'screen questions', 'data-testid': 'question-screen' }, header(session));

    if (session.state === 'conflicted' && session.conflict) {
        const banner = el(
            'div',
            { class: 'conflict-banner', 'data-testid': 'conflict-banner' },
            el('h2', {}, 'No pattern fits these answers'),
        );
        for (const message of Object.values(session.conflict.messages)) {
            banner.appendChild(el('p', { class: 'conflict-message' }, message));
        }
        const list = el('ul', { class: 'conflict-pairs' });
        for (const [property, value] of session.conflict.conflict) {
            list.appendChild(
                el(
                    'li',
                    {},
                    `${property} = ${value} `,
                    el(
                        'button',
                        { 'data-action': 'retract', 'data-property': property },
                        'Retract this answer',
                    ),
                ),
            );
        }
        banner.appendChild(list);
        screen.appendChild(banner);
    }

    if (state.question && session.state === 'eliciting') {
        const question = state.question;
        const card = el(
            'div',
            { class: 'question-card', 'data-testid': 'question-card', 'data-property': question.property },
            el('h2', {}, question.text),
            question.description ? el('p', { class: 'question-description' }, question.description) : '',
        );
        const options = el('div', { class: 'options' });
        for (const option of question.options) {
            const impact = question.impact_preview[option];
            const note = impact === null ? 'invalid combination' : `${impact} patterns remain`;
            const button = el(
                'button',
                { 'data-action': 'answer', 'data-value': option, class: 'option-button' },
                el('strong', {}, option),
                el('small', {}, ` ${note}`),
            );
            if (state.pending || impact === null) {
                button.setAttribute('disabled', '');
            }
            options.appendChild(button);
        }
        card.appendChild(options);
        screen.appendChild(card);
    }

    const answered = el('div', { class: 'answered', 'data-testid': 'answered-list' }, el('h3', {}, 'Your answers'));
    for (const entry of answeredEntries(session)) {
        answered.appendChild(
            el(
                'div',
                { class: 'answered-row', 'data-property': entry.property },
                `${entry.property} = ${entry.value}`,
                entry.inherited ? el('span', { class: 'inherited-badge' }, ' inherited') : '',
                el('button', { 'data-action': 'retract', 'data-property': entry.property }, 'retract'),
            ),
        );
    }
    screen.appendChild(answered);

    const assistant = el(
        'aside',
        { class: 'assistant-panel', 'data-testid': 'assistant-panel' },
        el('h3', {}, 'Ask the assistant'),
        el('input', { id: 'assistant-input', type: 'text', placeholder: 'e.g. what does shared device mean?' }),
        el('button', { 'data-action': 'ask' }, 'Ask'),
    );
    for (const exchange of state.exchanges) {
        assistant.appendChild(
            el(
                'div',
                { class: 'exchange' },
                el('p', { class: 'exchange-question' }, exchange.question),
                el('p', { class: 'exchange-answer', 'data-testid': 'assistant-answer' }, exchange.answer),
                exchange.cited_elements.length
                    ? el('small', { class: 'exchange-cites' }, `sources: ${exchange.cited_elements.join(', ')}`)
                    : '',
            ),
        );
    }
    screen.appendChild(assistant);
    return screen;
}

function contributionTable(entry: RecommendationEntry): HTMLElement {
    const table = el('table', { class: 'contributions' });
    const body = el('tbody', {});
    for (const [criterion, contribution] of Object.entries(entry.contributions)) {
        body.appendChild(
            el(
                'tr',
                {},
                el('td', {}, criterion),
                el('td', {}, contribution.weight.toFixed(3)),
                el('td', {}, contribution.utility.toFixed(3)),
                el('td', {}, contribution.product.toFixed(3)),
            ),
        );
    }
    table.append(
        el(
            'thead',
            {},
            el('tr', {}, el('th', {}, 'criterion'), el('th', {}, 'weight'), el('th', {}, 'utility'), el('th', {}, 'score part')),
        ),
        body,
    );
    return table;
}

function renderRecommendations(state: ViewState): HTMLElement {
    const session = state.session!;
    const payload = state.recommendations!;
    const criteriaOrder = Object.keys(payload.weights);
    const screen = el(
        'section',
        { class: 'screen recommendations', 'data-testid': 'recommendations-screen' },
        header(session),
        el('h2', {}, session.stage === 'sp' ? 'Recommended patterns' : 'Recommended design refinements'),
        weightsLegend(payload.weights),
        payload.fired_rules.length
            ? el('p', { class: 'fired-rules' }, `weights adjusted by: ${payload.fired_rules.join(', ')}`)
            : '',
    );

    const list = el('div', { class: 'pattern-cards', 'data-testid': 'pattern-cards' });
    for (const entry of payload.recommendations) {
        const compared = state.comparison.includes(entry.pattern);
        const card = el(
            'article',
            { class: 'pattern-card', 'data-testid': 'pattern-card', 'data-pattern': entry.pattern },
            el('h3', {}, `${entry.rank}. ${entry.pattern} `, el('span', { class: 'score' }, entry.score.toFixed(4))),
            stackedScoreBar(entry.contributions, criteriaOrder),
            el('details', {}, el('summary', {}, 'Why this pattern'), el('p', {}, entry.description), contributionTable(entry)),
            el('button', { 'data-action': 'select', 'data-pattern': entry.pattern }, 'Select'),
            el(
                'button',
                { 'data-action': 'compare', 'data-pattern': entry.pattern, class: compared ? 'comparing' : '' },
                compared ? 'Remove from comparison' : 'Compare',
            ),
        );
        list.appendChild(card);
    }
    screen.appendChild(list);

    if (state.comparison.length === 2) {
        const panel = el('div', { class: 'compare-panel', 'data-testid': 'compare-panel' }, el('h3', {}, 'Side by side'));
        for (const pattern of state.comparison) {
            const entry = payload.recommendations.find((candidate) => candidate.pattern === pattern);
            if (!entry) {
                continue;
            }
            panel.appendChild(
                el(
                    'div',
                    { class: 'compare-column', 'data-pattern': entry.pattern },
                    el('h4', {}, `${entry.pattern} (${entry.score.toFixed(4)})`),
                    stackedScoreBar(entry.contributions, criteriaOrder),
                    contributionTable(entry),
                    el('p', {}, entry.description),
                ),
            );
        }
        screen.appendChild(panel);
    }

    if (payload.exclusions.length) {
        const section = el('div', { class: 'exclusions', 'data-testid': 'exclusions' }, el('h3', {}, 'Not feasible here'));
        for (const exclusion of payload.exclusions) {
            for (const violated of exclusion.violated) {
                section.appendChild(
                    el('p', { 'data-pattern': exclusion.pattern }, `${exclusion.pattern}: ${violated.message}`),
                );
            }
        }
        screen.appendChild(section);
    }
    return screen;
}

function renderDone(state: ViewState): HTMLElement {
    const session = state.session!;
    const chosen = session.selected_sdp ?? session.selected_sp ?? '(nothing selected)';
    return el(
        'section',
        { class: 'screen done', 'data-testid': 'done-screen' },
        el('h1', {}, 'Session complete'),
        el('p', {}, `Requirement: ${session.requirement}`),
        el('p', {}, `Selected pattern: ${session.selected_sp ?? '-'}`),
        session.selected_sdp ? el('p', {}, `Selected design refinement: ${session.selected_sdp}`) : '',
        el('p', {}, `Final choice: ${chosen}`),
        el('button', { 'data-action': 'export' }, 'Export transcript'),
        el('p', { class: 'transcript-note' }, `${session.transcript.length} transcript events recorded`),
    );
}
