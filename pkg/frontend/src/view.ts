// Pure render model. Every number on screen is derived from the last
// server frame alone; the client holds no truth of its own. Partner
// fields appear only when the frame carries them, so a sealed-report
// screen cannot leak what the server never sent.

import { Frame, payoff } from './protocol.js';

export type PanelMode = 'lobby' | 'report' | 'feedback' | 'wait-turn'
    | 'clock' | 'result';

export interface ClockPanel {
    step: number;
    tempOwn: number;
    tempPartner: number;
    nextOwn: number | null;
    nextPartner: number | null;
    payoffIfStop: number;
    canAct: boolean;
}

export interface ViewState {
    mode: PanelMode;
    banner: string;
    countdownMs: number;
    ownPeak: number | null;
    partnerPeak: number | null;
    ownTentative: number | null;
    sliderEnabled: boolean;
    partnerReport: number | null;
    tentativeAllotments: [number, number] | null;
    ownPayoffPreview: number | null;
    payoffByReport: number[] | null;
    clock: ClockPanel | null;
    result: { allocation: [number, number]; ownPayoff: number } | null;
}

const EMPTY: ViewState = {
    mode: 'lobby',
    banner: '',
    countdownMs: 0,
    ownPeak: null,
    partnerPeak: null,
    ownTentative: null,
    sliderEnabled: false,
    partnerReport: null,
    tentativeAllotments: null,
    ownPayoffPreview: null,
    payoffByReport: null,
    clock: null,
    result: null,
};

export function render(frame: Frame): ViewState {
    const view: ViewState = { ...EMPTY };
    view.countdownMs = frame.countdown_ms ?? 0;
    view.ownPeak = frame.own_peak ?? null;
    view.partnerPeak = frame.partner_peak ?? null;
    const period = frame.period !== undefined ? `period ${frame.period}` : '';
    const types = frame.own_peak !== undefined
        ? ` — your ideal ${frame.own_peak}, partner's ideal ${frame.partner_peak}`
        : '';
    view.banner = `${frame.mechanism ?? ''} ${period}${types}`.trim();

    if (frame.phase === 'done' && frame.allocation && frame.payoffs) {
        view.mode = 'result';
        view.result = {
            allocation: frame.allocation,
            ownPayoff: frame.own_payoff ?? frame.payoffs[frame.seat ?? 0],
        };
        return view;
    }
    if (frame.phase === 'lobby' || frame.phase === 'running'
        || frame.phase === 'finished' || frame.phase === 'unstarted') {
        return view;
    }
    if (frame.mechanism === 'OSPU') {
        view.mode = 'clock';
        view.clock = {
            step: frame.step ?? 0,
            tempOwn: frame.temp_own ?? 0,
            tempPartner: frame.temp_partner ?? 0,
            nextOwn: frame.next_own ?? null,
            nextPartner: frame.next_partner ?? null,
            payoffIfStop: frame.own_payoff_if_stop
                ?? payoff(frame.own_peak ?? 0, frame.temp_own ?? 0),
            canAct: Boolean(frame.step_open) && !frame.acted,
        };
        return view;
    }

    // report mechanisms
    view.ownTentative = frame.own_tentative ?? null;
    const myTurn = frame.mechanism !== 'SRU' || frame.mover === frame.seat;
    view.sliderEnabled = myTurn && frame.own_finalized == null;
    if (!myTurn) {
        view.mode = 'wait-turn';
        return view;
    }
    if (frame.partner_report !== undefined) {
        view.mode = 'feedback';
        view.partnerReport = frame.partner_report;
        view.tentativeAllotments = frame.tentative_allotments ?? null;
        view.ownPayoffPreview = frame.own_payoff_preview
            ?? (view.tentativeAllotments && frame.own_peak !== undefined
                ? payoff(frame.own_peak, view.tentativeAllotments[0])
                : null);
        view.payoffByReport = frame.payoff_by_report ?? null;
    } else {
        view.mode = 'report';
    }
    return view;
}

// Stale-frame guard: frames carry the engine's event cursor; a frame
// whose cursor went backwards within the same period is dropped.
export class FrameGate {
    private key = '';
    private seq = -1;

    accept(frame: Frame): boolean {
        const key = `${frame.session ?? ''}:${frame.period ?? 0}:${frame.pair ?? 0}`;
        if (key !== this.key) {
            this.key = key;
            this.seq = -1;
        }
        const seq = frame.seq ?? 0;
        if (seq < this.seq) {
            return false;
        }
        this.seq = seq;
        return true;
    }
}
