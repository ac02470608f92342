// Transport-agnostic session client: joins over HTTP, then applies the
// stream's messages in order, dropping stale frames. The current view
// is always re-rendered from the freshest frame alone, so a reconnect
// only needs the next snapshot to be fully correct.

import { Action, ActionMessage, Frame, ServerMessage } from './protocol.js';
import { FrameGate, render, ViewState } from './view.js';

export interface SocketLike {
    send(data: string): void;
    close(): void;
    onmessage: ((data: string) => void) | null;
}

export interface ClientHooks {
    onView?: (view: ViewState, frame: Frame) => void;
    onRejected?: (reason: string) => void;
    onSessionStatus?: (status: string) => void;
    onEvent?: (envelope: ServerMessage) => void;
}

export class SessionClient {
    readonly frames: Frame[] = [];
    view: ViewState | null = null;
    private gate = new FrameGate();

    constructor(private socket: SocketLike, private hooks: ClientHooks = {}) {
        socket.onmessage = (data) => this.handle(data);
    }

    handle(data: string): void {
        let msg: ServerMessage;
        try {
            msg = JSON.parse(data) as ServerMessage;
        } catch {
            return;
        }
        if (msg.type === 'frame') {
            if (!this.gate.accept(msg)) {
                return; // stale frame: discard
            }
            this.frames.push(msg);
            this.view = render(msg);
            this.hooks.onView?.(this.view, msg);
        } else if (msg.type === 'rejected') {
            this.hooks.onRejected?.(msg.reason);
        } else if (msg.type === 'session') {
            this.hooks.onSessionStatus?.(msg.status);
        } else {
            this.hooks.onEvent?.(msg);
        }
    }

    act(action: Action): void {
        const message: ActionMessage = { type: 'action', action };
        this.socket.send(JSON.stringify(message));
    }

    close(): void {
        this.socket.close();
    }
}

export interface LobbyApi {
    createSession(base: string, body: Record<string, unknown>):
        Promise<{ session_id: string; tokens: Record<string, string> }>;
    join(base: string, sessionId: string, token: string): Promise<unknown>;
    start(base: string, sessionId: string): Promise<unknown>;
    attachBot(base: string, sessionId: string, subjectId: number,
              kind: string): Promise<unknown>;
    replay(base: string, sessionId: string): Promise<any>;
}

async function post(url: string, body: unknown): Promise<any> {
    const res = await fetch(url, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(body ?? {}),
    });
    if (!res.ok) {
        throw new Error(`${url}: ${res.status} ${await res.text()}`);
    }
    return res.json();
}

export const lobby: LobbyApi = {
    createSession: (base, body) => post(`${base}/sessions`, body),
    join: (base, id, token) => post(`${base}/sessions/${id}/join`, { token }),
    start: (base, id) => post(`${base}/sessions/${id}/start`, {}),
    attachBot: (base, id, subjectId, kind) =>
        post(`${base}/sessions/${id}/bots`, { subject_id: subjectId, kind }),
    replay: async (base, id) => {
        const res = await fetch(`${base}/sessions/${id}/replay`);
        if (!res.ok) {
            throw new Error(`replay: ${res.status}`);
        }
        return res.json();
    },
};

export function streamUrl(base: string, sessionId: string, token: string): string {
    return `${base.replace(/^http/, 'ws')}/sessions/${sessionId}/stream?token=${token}`;
}
