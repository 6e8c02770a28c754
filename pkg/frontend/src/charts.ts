/**
 * Score-breakdown bars: one horizontal stacked bar per pattern, one
 * segment per criterion, segment width proportional to the criterion's
 * weight x utility product. Widths come verbatim from the payload.
 */

import type { Contribution } from './api.js';

const SEGMENT_COLORS = ['#4e79a7', '#f28e2b', '#59a14f', '#e15759', '#b07aa1', '#76b7b2'];

export function criterionColor(index: number): string {
    return SEGMENT_COLORS[index % SEGMENT_COLORS.length];
}

export function stackedScoreBar(
    contributions: Record<string, Contribution>,
    criteriaOrder: string[],
): HTMLElement {
    const bar = document.createElement('div');
    bar.className = 'score-bar';
    criteriaOrder.forEach((criterion, index) => {
        const contribution = contributions[criterion];
        if (!contribution) {
            return;
        }
        const segment = document.createElement('div');
        segment.className = 'score-bar-segment';
        segment.dataset.criterion = criterion;
        segment.dataset.product = String(contribution.product);
        segment.style.width = `${(contribution.product * 100).toFixed(2)}%`;
        segment.style.backgroundColor = criterionColor(index);
        segment.title =
            `${criterion}: weight ${contribution.weight.toFixed(3)} x ` +
            `utility ${contribution.utility.toFixed(3)} = ${contribution.product.toFixed(3)}`;
        bar.appendChild(segment);
    });
    return bar;
}

export function weightsLegend(weights: Record<string, number>): HTMLElement {
    const legend = document.createElement('div');
    legend.className = 'weights-legend';
    Object.entries(weights).forEach(([criterion, weight], index) => {
        const item = document.createElement('span');
        item.className = 'weights-legend-item';
        const swatch = document.createElement('span');
        swatch.className = 'swatch';
        swatch.style.backgroundColor = criterionColor(index);
        item.appendChild(swatch);
        item.appendChild(document.createTextNode(` ${criterion} ${weight.toFixed(3)}`));
        legend.appendChild(item);
    });
    return legend;
}
