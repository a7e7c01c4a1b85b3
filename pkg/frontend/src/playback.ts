// Web Audio playback: one tone per voice per column, scheduled up front
// against the audio clock.  A hold cell stretches the tone that precedes
// it, rests and empty cells stay silent.  Without an audio context the
// cursor still sweeps so the page degrades to a silent preview.

import { CellSymbol } from "./types.js";

export type ToneContext = Pick<AudioContext,
    "currentTime" | "destination" | "createOscillator" | "createGain">;

const LEAD_SECONDS = 0.05;

export class Player {
    playing = false;
    onColumn: ((beat: number) => void) | null = null;
    onDone: (() => void) | null = null;
    private ctx: ToneContext | null;
    private timers: ReturnType<typeof setTimeout>[] = [];
    private live: OscillatorNode[] = [];

    constructor(ctx: ToneContext | null) {
        this.ctx = ctx;
    }

    play(grid: (CellSymbol | null)[][], bpm = 80): void {
        this.stop();
        const beat = 60 / bpm;
        const length = grid[0]?.length ?? 0;
        if (this.ctx) {
            const t0 = this.ctx.currentTime + LEAD_SECONDS;
            for (let v = 0; v < grid.length; v++) {
                for (let t = 0; t < length; t++) {
                    const sym = grid[v][t];
                    if (typeof sym !== "number") continue;
                    let span = 1;
                    while (t + span < length && grid[v][t + span] === "H") span += 1;
                    this.tone(sym, t0 + t * beat, span * beat);
                }
            }
        }
        this.playing = true;
        for (let t = 0; t < length; t++) {
            this.timers.push(setTimeout(() => this.onColumn?.(t),
                (LEAD_SECONDS + t * beat) * 1000));
        }
        this.timers.push(setTimeout(() => {
            this.playing = false;
            this.onDone?.();
        }, (LEAD_SECONDS + length * beat) * 1000));
    }

    stop(): void {
        for (const timer of this.timers) clearTimeout(timer);
        this.timers = [];
        for (const osc of this.live) osc.stop();
        this.live = [];
        this.playing = false;
    }

    private tone(pitch: number, at: number, dur: number): void {
        if (!this.ctx) return;
        const osc = this.ctx.createOscillator();
        const gain = this.ctx.createGain();
        osc.type = "triangle";
        osc.frequency.value = 440 * Math.pow(2, (pitch - 69) / 12);
        gain.gain.setValueAtTime(0.0001, at);
        gain.gain.linearRampToValueAtTime(0.18, at + 0.02);
        gain.gain.setValueAtTime(0.18, Math.max(at + 0.02, at + dur - 0.05));
        gain.gain.linearRampToValueAtTime(0.0001, at + dur);
        osc.connect(gain);
        gain.connect(this.ctx.destination);
        osc.start(at);
        osc.stop(at + dur);
        this.live.push(osc);
    }
}
