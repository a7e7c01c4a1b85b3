// Editable piano-roll state.  Rows are voices, columns are beats.  Each
// cell is empty, pinned to one symbol, restricted to a range of symbols,
// or filled with a generated symbol from the last response.
//
// Pinned and range cells belong to the user: a server response never
// overwrites them, it only has to agree with them.  Generated cells are
// replaced wholesale on every response.

import { CellSymbol, ConstraintPayload, symbolLabel } from "./types.js";

export type CellState =
    | { kind: "empty" }
    | { kind: "pinned", symbol: CellSymbol }
    | { kind: "range", allowed: CellSymbol[], chosen?: CellSymbol }
    | { kind: "generated", symbol: CellSymbol };

export type EditAction =
    | { kind: "pin", symbol: CellSymbol }
    | { kind: "range", allowed: CellSymbol[] }
    | { kind: "clear" };

export type CellRender = {
    voice: number,
    beat: number,
    kind: CellState["kind"],
    label: string,
};

const EMPTY: CellState = { kind: "empty" };

export class GridView {
    readonly voices: number;
    readonly length: number;
    readonly alphabets: CellSymbol[][];
    modelId: string | null = null;
    cursor = -1;
    warning: string | null = null;
    private cells: CellState[][];

    constructor(voices: number, length: number, alphabets: CellSymbol[][]) {
        if (alphabets.length !== voices) {
            throw new Error(`expected ${voices} alphabets, got ${alphabets.length}`);
        }
        this.voices = voices;
        this.length = length;
        this.alphabets = alphabets;
        this.cells = Array.from({ length: voices }, () =>
            Array.from({ length }, () => EMPTY));
    }

    cell(voice: number, beat: number): CellState {
        this.checkCell(voice, beat);
        return this.cells[voice][beat];
    }

    edit(voice: number, beat: number, action: EditAction): void {
        this.checkCell(voice, beat);
        switch (action.kind) {
            case "pin":
                this.checkSymbol(voice, action.symbol);
                this.cells[voice][beat] = { kind: "pinned", symbol: action.symbol };
                break;
            case "range": {
                if (action.allowed.length === 0) {
                    throw new Error("range must allow at least one symbol");
                }
                for (const sym of action.allowed) this.checkSymbol(voice, sym);
                this.cells[voice][beat] = { kind: "range", allowed: [...action.allowed] };
                break;
            }
            case "clear":
                this.cells[voice][beat] = EMPTY;
                break;
        }
    }

    /** Constraint document in the exact shape the sampler endpoints accept. */
    constraintPayload(): ConstraintPayload {
        const pins: [number, number, CellSymbol][] = [];
        const ranges: [number, number, CellSymbol[]][] = [];
        for (let v = 0; v < this.voices; v++) {
            for (let t = 0; t < this.length; t++) {
                const c = this.cells[v][t];
                if (c.kind === "pinned") pins.push([v, t, c.symbol]);
                if (c.kind === "range") ranges.push([v, t, [...c.allowed]]);
            }
        }
        return { pins, ranges };
    }

    /** Restore pin/range cells from a constraint document. */
    loadConstraints(payload: ConstraintPayload): void {
        for (const [v, t, sym] of payload.pins ?? []) {
            this.edit(v, t, { kind: "pin", symbol: sym });
        }
        for (const [v, t, allowed] of payload.ranges ?? []) {
            this.edit(v, t, { kind: "range", allowed });
        }
    }

    /**
     * Fill the grid from a response.  Generated cells are replaced, pinned
     * and range cells are kept and checked against the response instead.
     * Returns the integrity warning (also kept on `warning`), or null when
     * the response agrees with every constraint.
     */
    applyResponse(grid: CellSymbol[][]): string | null {
        if (grid.length !== this.voices || grid.some(row => row.length !== this.length)) {
            this.warning = `response grid is not ${this.voices}x${this.length}`;
            return this.warning;
        }
        const violations: string[] = [];
        for (let v = 0; v < this.voices; v++) {
            for (let t = 0; t < this.length; t++) {
                const c = this.cells[v][t];
                const got = grid[v][t];
                if (c.kind === "pinned") {
                    if (got !== c.symbol) {
                        violations.push(`(${v},${t}) pinned ${symbolLabel(c.symbol)} but response has ${symbolLabel(got)}`);
                    }
                } else if (c.kind === "range") {
                    if (c.allowed.includes(got)) {
                        this.cells[v][t] = { kind: "range", allowed: c.allowed, chosen: got };
                    } else {
                        violations.push(`(${v},${t}) allows {${c.allowed.map(symbolLabel).join(" ")}} but response has ${symbolLabel(got)}`);
                    }
                } else {
                    this.cells[v][t] = { kind: "generated", symbol: got };
                }
            }
        }
        this.warning = violations.length
            ? `integrity check failed: ${violations.join("; ")}`
            : null;
        return this.warning;
    }

    /** Concrete symbols as last rendered, for playback and diffing. */
    soundingGrid(): (CellSymbol | null)[][] {
        return this.cells.map(row => row.map(c => {
            if (c.kind === "pinned") return c.symbol;
            if (c.kind === "generated") return c.symbol;
            if (c.kind === "range") return c.chosen ?? null;
            return null;
        }));
    }

    renderCells(): CellRender[] {
        const out: CellRender[] = [];
        for (let v = 0; v < this.voices; v++) {
            for (let t = 0; t < this.length; t++) {
                const c = this.cells[v][t];
                let label = "";
                if (c.kind === "pinned") label = symbolLabel(c.symbol);
                else if (c.kind === "generated") label = symbolLabel(c.symbol);
                else if (c.kind === "range") {
                    label = c.chosen !== undefined
                        ? symbolLabel(c.chosen)
                        : c.allowed.map(symbolLabel).join("|");
                }
                out.push({ voice: v, beat: t, kind: c.kind, label });
            }
        }
        return out;
    }

    private checkCell(voice: number, beat: number): void {
        if (voice < 0 || voice >= this.voices || beat < 0 || beat >= this.length) {
            throw new Error(`cell (${voice},${beat}) outside the ${this.voices}x${this.length} grid`);
        }
    }

    private checkSymbol(voice: number, sym: CellSymbol): void {
        if (!this.alphabets[voice].includes(sym)) {
            throw new Error(`${symbolLabel(sym)} is not in the voice ${voice} alphabet`);
        }
    }
}

/** Cells whose symbols differ between two response grids. */
export const changedCells = (a: CellSymbol[][], b: CellSymbol[][]): [number, number][] => {
    const out: [number, number][] = [];
    for (let v = 0; v < a.length; v++) {
        for (let t = 0; t < a[v].length; t++) {
            if (a[v][t] !== b[v]?.[t]) out.push([v, t]);
        }
    }
    return out;
};
