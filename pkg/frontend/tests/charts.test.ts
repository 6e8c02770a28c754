import { describe, expect, it } from 'vitest';

import { stackedScoreBar, weightsLegend } from '../src/charts.js';

const contributions = {
    usability: { weight: 0.75, utility: 1.0, product: 0.75 },
    costs: { weight: 0.25, utility: 0.5, product: 0.125 },
};

describe('stackedScoreBar', () => {
    it('renders one segment per criterion with widths from the products', () => {
        const bar = stackedScoreBar(contributions, ['usability', 'costs']);
        const segments = Array.from(bar.querySelectorAll('.score-bar-segment')) as HTMLElement[];
        expect(segments.map((segment) => segment.dataset.criterion)).toEqual(['usability', 'costs']);
        expect(parseFloat(segments[0].style.width)).toBeCloseTo(75.0);
        expect(parseFloat(segments[1].style.width)).toBeCloseTo(12.5);
        expect(segments[0].title).toContain('usability');
        expect(segments[0].title).toContain('0.750');
    });

    it('keeps the given criteria order, skipping unknown criteria', () => {
        const bar = stackedScoreBar(contributions, ['costs', 'mystery', 'usability']);
        const segments = Array.from(bar.querySelectorAll('.score-bar-segment')) as HTMLElement[];
        expect(segments.map((segment) => segment.dataset.criterion)).toEqual(['costs', 'usability']);
    });
});

describe('weightsLegend', () => {
    it('lists every criterion with its weight', () => {
        const legend = weightsLegend({ usability: 0.75, costs: 0.25 });
        expect(legend.textContent).toContain('usability 0.750');
        expect(legend.textContent).toContain('costs 0.250');
    });
});
