// Browser wiring: binds the render model to the page and the slider,
// arrow keys, and clock buttons to the action stream.

import { SessionClient, streamUrl } from './client.js';
import { ClockButtons, ReportSlider, TICK_MS } from './input.js';
import { ViewState } from './view.js';

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) {
        throw new Error(`missing element #${id}`);
    }
    return node as T;
}

function show(id: string, on: boolean): void {
    el(id).style.display = on ? '' : 'none';
}

export function mount(base: string, sessionId: string, token: string): void {
    const ws = new WebSocket(streamUrl(base, sessionId, token));
    const socket = {
        send: (d: string) => ws.send(d),
        close: () => ws.close(),
        onmessage: null as ((d: string) => void) | null,
    };
    ws.onmessage = (e) => socket.onmessage?.(String(e.data));

    const slider = el<HTMLInputElement>('report-slider');
    const reporter = new ReportSlider((a) => client.act(a));
    const clock = new ClockButtons((a) => client.act(a));

    const client = new SessionClient(socket, {
        onView: (view) => paint(view),
        onRejected: (reason) => {
            el('status').textContent = `rejected: ${reason}`;
        },
        onSessionStatus: (status) => {
            el('status').textContent = status;
        },
    });

    slider.addEventListener('input', () => {
        reporter.setPosition(Number(slider.value));
        el('own-report').textContent = slider.value;
    });
    document.addEventListener('keydown', (e) => {
        if (e.key === 'ArrowLeft') reporter.nudge(-1);
        if (e.key === 'ArrowRight') reporter.nudge(+1);
        slider.value = String(reporter.position);
        el('own-report').textContent = slider.value;
    });
    el('btn-continue').addEventListener('click', () => clock.continueClock());
    el('btn-stop').addEventListener('click', () => clock.optOut());
    el('btn-down').addEventListener('click', () => {
        const v = client.view?.clock?.tempOwn;
        if (v !== undefined && v !== null) clock.chooseOpening(v - 1);
    });
    el('btn-keep').addEventListener('click', () => {
        const v = client.view?.clock?.tempOwn;
        if (v !== undefined && v !== null) clock.chooseOpening(v);
    });
    el('btn-up').addEventListener('click', () => {
        const v = client.view?.clock?.tempOwn;
        if (v !== undefined && v !== null) clock.chooseOpening(v + 1);
    });

    function paint(view: ViewState): void {
        reporter.onView(view);
        clock.onView(view);
        el('banner').textContent = view.banner;
        el('countdown').textContent = `${Math.ceil(view.countdownMs / 1000)}s`;
        show('panel-report', view.mode === 'report' || view.mode === 'feedback');
        show('panel-feedback', view.mode === 'feedback');
        show('panel-wait', view.mode === 'wait-turn');
        show('panel-clock', view.mode === 'clock');
        show('panel-result', view.mode === 'result');
        slider.disabled = !view.sliderEnabled;
        if (view.ownTentative !== null) {
            slider.value = String(view.ownTentative);
            el('own-report').textContent = String(view.ownTentative);
        }
        if (view.mode === 'feedback') {
            el('partner-report').textContent = String(view.partnerReport);
            el('own-allotment').textContent =
                String(view.tentativeAllotments?.[0] ?? '');
            el('own-payoff-preview').textContent =
                String(view.ownPayoffPreview ?? '');
        }
        if (view.clock) {
            el('temp-own').textContent = String(view.clock.tempOwn);
            el('temp-partner').textContent = String(view.clock.tempPartner);
            el('next-preview').textContent = view.clock.nextOwn === null
                ? '' : `next: (${view.clock.nextOwn}, ${view.clock.nextPartner})`;
            show('opening-buttons', view.clock.step === 0);
            show('step-buttons', view.clock.step > 0);
            (el('btn-continue') as HTMLButtonElement).disabled = !view.clock.canAct;
            (el('btn-stop') as HTMLButtonElement).disabled = !view.clock.canAct;
        }
        if (view.result) {
            el('result-alloc').textContent =
                `(${view.result.allocation[0]}, ${view.result.allocation[1]})`;
            el('result-payoff').textContent = String(view.result.ownPayoff);
        }
    }

    reporter.start();
    window.addEventListener('beforeunload', () => {
        reporter.stop();
        client.close();
    });
}

export { TICK_MS };
