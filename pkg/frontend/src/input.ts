// Input controllers. The report slider is sampled at the tick rate and
// each sample is transmitted as a tentative report while a window is
// open; submissions outside windows are suppressed locally. Clock-game
// buttons fire at most once per step window no matter how often they
// are clicked.

import { Action } from './protocol.js';
import { ViewState } from './view.js';

export const TICK_MS = 100;

export class ReportSlider {
    position = 10;
    private enabled = false;
    private timer: ReturnType<typeof setInterval> | null = null;

    constructor(private send: (a: Action) => void,
                private min = 0, private max = 20) {}

    setPosition(value: number): void {
        this.position = Math.max(this.min, Math.min(this.max, Math.round(value)));
    }

    nudge(delta: number): void {
        this.setPosition(this.position + delta);
    }

    onView(view: ViewState): void {
        this.enabled = view.sliderEnabled;
    }

    // one 10 Hz sample: transmit the current position if a window is open
    tick(): void {
        if (this.enabled) {
            this.send({ kind: 'tentative', value: this.position });
        }
    }

    start(): void {
        if (this.timer === null) {
            this.timer = setInterval(() => this.tick(), TICK_MS);
        }
    }

    stop(): void {
        if (this.timer !== null) {
            clearInterval(this.timer);
            this.timer = null;
        }
    }
}

export class ClockButtons {
    private actedKey = '';
    private canAct = false;
    private stepKey = '';

    constructor(private send: (a: Action) => void) {}

    onView(view: ViewState): void {
        if (!view.clock) {
            this.canAct = false;
            return;
        }
        this.stepKey = `${view.banner}#${view.clock.step}`;
        this.canAct = view.clock.canAct;
    }

    private fire(action: Action): boolean {
        if (!this.canAct || this.actedKey === this.stepKey) {
            return false;
        }
        this.actedKey = this.stepKey;
        this.send(action);
        return true;
    }

    chooseOpening(value: number): boolean {
        return this.fire({ kind: 'step_choice', value });
    }

    continueClock(): boolean {
        return this.fire({ kind: 'step_choice', value: 'continue' });
    }

    optOut(): boolean {
        return this.fire({ kind: 'opt_out' });
    }
}
