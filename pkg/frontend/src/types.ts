// Shared record types mirroring the JSON shapes the generation service
// speaks.  A grid cell is a MIDI pitch, "R" (rest) or "H" (hold).

export type CellSymbol = number | "R" | "H";

export type ModelInfo = {
    id: string,
    file: string,
    topology: {
        n: number,
        K: number,
        L: number,
        rhythm: { bins_per_cycle: number } | null,
    },
    alphabets: CellSymbol[][],
    parameters: number,
    metadata: Record<string, unknown>,
};

export type PieceDoc = {
    id: string,
    mode: string,
    original_key: number,
    grid: CellSymbol[][],
    beats_per_bar?: number,
};

export type GenerationDoc = {
    voices: number,
    pieces: PieceDoc[],
    meta: Record<string, unknown>,
    keytrack?: [number, number, string][],
};

export type ConstraintPayload = {
    pins: [number, number, CellSymbol][],
    ranges: [number, number, CellSymbol[]][],
};

export type SampleRequest = {
    length: number,
    steps?: number,
    seed?: number,
    burn_in?: number,
    thinning?: number,
    constraints?: ConstraintPayload,
};

export type ReharmonizeRequest = {
    melody: CellSymbol[],
    keytrack?: [number, number, string][],
    constraints?: ConstraintPayload,
    seed?: number,
    steps?: number,
    voice?: number,
};

export type JobDoc = {
    id: string,
    kind: string,
    status: "queued" | "running" | "done" | "failed",
    created: number,
    finished: number | null,
    artifacts: string[],
    error: string | null,
};

const NOTE_NAMES = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

export const symbolLabel = (sym: CellSymbol): string => {
    if (typeof sym !== "number") return sym;
    return NOTE_NAMES[sym % 12] + String(Math.floor(sym / 12) - 1);
};
