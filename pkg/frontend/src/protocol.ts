// Wire types for the session service. Frames are full snapshots of one
// participant's visible state: anything not present in a frame is not
// known to this client and must not be rendered.

export const PAYOFF_INTERCEPT = 20;

export function payoff(peak: number, amount: number): number {
    return PAYOFF_INTERCEPT - Math.abs(peak - amount);
}

export type Mechanism = 'DRU' | 'SRU' | 'OSPU' | 'PFU';

export interface Frame {
    type: 'frame';
    session?: string;
    mechanism?: Mechanism;
    period?: number;
    pair?: number;
    seat?: number;
    seq?: number;
    phase: string;
    own_peak?: number;
    partner_peak?: number;
    supply?: number;
    countdown_ms?: number;
    // report mechanisms
    own_tentative?: number;
    own_finalized?: number | null;
    mover?: number;
    partner_report?: number;
    tentative_allotments?: [number, number];
    own_payoff_preview?: number;
    payoff_by_report?: number[];
    // clock game
    step?: number;
    step_open?: boolean;
    temp_own?: number;
    temp_partner?: number;
    next_own?: number;
    next_partner?: number;
    own_payoff_if_stop?: number;
    acted?: boolean;
    // finished period
    allocation?: [number, number];
    payoffs?: [number, number];
    own_payoff?: number;
}

export interface EventEnvelope {
    type: 'event';
    session: string;
    period: number;
    pair: number;
    seat: number;
    event: {
        v: number;
        seq: number;
        time: number;
        kind: string;
        agent: number | null;
        payload: Record<string, unknown>;
    };
}

export interface Rejection {
    type: 'rejected';
    reason: string;
    action?: unknown;
}

export type ServerMessage = Frame | EventEnvelope | Rejection |
    { type: 'session'; status: string };

export type Action =
    | { kind: 'tentative'; value: number }
    | { kind: 'step_choice'; value: number | 'continue' }
    | { kind: 'opt_out' };

export interface ActionMessage {
    type: 'action';
    action: Action;
}
