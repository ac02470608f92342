// Render model and input controllers, no network.

import { describe, expect, it } from 'vitest';

import { Action, Frame, payoff } from '../src/protocol.js';
import { ClockButtons, ReportSlider } from '../src/input.js';
import { FrameGate, render } from '../src/view.js';

const base: Frame = {
    type: 'frame', session: 's1', mechanism: 'PFU', period: 1, pair: 0,
    seat: 0, seq: 5, phase: 'reporting', own_peak: 3, partner_peak: 4,
    supply: 20, countdown_ms: 1200, own_tentative: 10, own_finalized: null,
};

describe('render', () => {
    it('feedback panel shows partner data only when the frame carries it', () => {
        const dru = render({ ...base, mechanism: 'DRU' });
        expect(dru.mode).toBe('report');
        expect(dru.partnerReport).toBeNull();
        expect(dru.tentativeAllotments).toBeNull();
        expect(dru.payoffByReport).toBeNull();
        expect(dru.sliderEnabled).toBe(true);

        const pfu = render({
            ...base,
            partner_report: 4,
            tentative_allotments: [10, 10],
            own_payoff_preview: 13,
            payoff_by_report: Array(21).fill(13),
        });
        expect(pfu.mode).toBe('feedback');
        expect(pfu.partnerReport).toBe(4);
        expect(pfu.tentativeAllotments).toEqual([10, 10]);
        expect(pfu.ownPayoffPreview).toBe(13);
    });

    it('payoff preview equals the loss rule at the tentative allotment', () => {
        for (const [peak, allot] of [[3, 10], [5, 5], [17, 15]] as const) {
            const view = render({
                ...base,
                own_peak: peak,
                partner_report: 8,
                tentative_allotments: [allot, 20 - allot],
                own_payoff_preview: payoff(peak, allot),
            });
            expect(view.ownPayoffPreview).toBe(payoff(peak, allot));
        }
    });

    it('sequential first screen blocks the second mover until their turn', () => {
        const waiting = render({ ...base, mechanism: 'SRU', seat: 1, mover: 0 });
        expect(waiting.mode).toBe('wait-turn');
        expect(waiting.sliderEnabled).toBe(false);
        const turn = render({
            ...base, mechanism: 'SRU', seat: 1, mover: 1,
            phase: 'reporting-second', partner_report: 13,
            tentative_allotments: [7, 13],
        });
        expect(turn.mode).toBe('feedback');
        expect(turn.sliderEnabled).toBe(true);
        expect(turn.partnerReport).toBe(13);
    });

    it('clock panel previews the next revision', () => {
        const view = render({
            ...base, mechanism: 'OSPU', phase: 'step', step: 2, step_open: true,
            temp_own: 9, temp_partner: 11, next_own: 8, next_partner: 12,
            own_payoff_if_stop: 14, acted: false,
        });
        expect(view.mode).toBe('clock');
        expect(view.clock).toMatchObject({
            tempOwn: 9, tempPartner: 11, nextOwn: 8, nextPartner: 12,
            payoffIfStop: 14, canAct: true,
        });
    });

    it('result panel reports the final allocation and own payoff', () => {
        const view = render({
            ...base, phase: 'done', allocation: [10, 10],
            payoffs: [13, 14], own_payoff: 13,
        });
        expect(view.mode).toBe('result');
        expect(view.result).toEqual({ allocation: [10, 10], ownPayoff: 13 });
    });
});

describe('frame gate', () => {
    it('discards stale frames within a period and resets across periods', () => {
        const gate = new FrameGate();
        expect(gate.accept({ ...base, seq: 5 })).toBe(true);
        expect(gate.accept({ ...base, seq: 7 })).toBe(true);
        expect(gate.accept({ ...base, seq: 6 })).toBe(false);
        expect(gate.accept({ ...base, period: 2, seq: 0 })).toBe(true);
    });
});

describe('report slider', () => {
    it('samples only while a window is open and clamps to the scale', () => {
        const sent: Action[] = [];
        const slider = new ReportSlider((a) => sent.push(a));
        slider.tick();
        expect(sent).toHaveLength(0); // suppressed before any window opens
        slider.onView(render(base));
        slider.setPosition(25);
        slider.tick();
        slider.nudge(-30);
        slider.tick();
        expect(sent).toEqual([
            { kind: 'tentative', value: 20 },
            { kind: 'tentative', value: 0 },
        ]);
        slider.onView(render({ ...base, own_finalized: 7 }));
        slider.tick();
        expect(sent).toHaveLength(2); // window closed again
    });
});

describe('clock buttons', () => {
    const stepFrame = (step: number, acted = false): Frame => ({
        ...base, mechanism: 'OSPU', phase: 'step', step, step_open: true,
        temp_own: 9, temp_partner: 11, acted,
    });

    it('double-click sends a single action per step window', () => {
        const sent: Action[] = [];
        const buttons = new ClockButtons((a) => sent.push(a));
        buttons.onView(render(stepFrame(1)));
        expect(buttons.optOut()).toBe(true);
        expect(buttons.optOut()).toBe(false);
        expect(buttons.continueClock()).toBe(false);
        expect(sent).toEqual([{ kind: 'opt_out' }]);
        buttons.onView(render(stepFrame(2)));
        expect(buttons.continueClock()).toBe(true);
        expect(sent).toHaveLength(2);
    });

    it('refuses to act when the frame says the agent already acted', () => {
        const sent: Action[] = [];
        const buttons = new ClockButtons((a) => sent.push(a));
        buttons.onView(render(stepFrame(1, true)));
        expect(buttons.continueClock()).toBe(false);
        expect(sent).toHaveLength(0);
    });
});
