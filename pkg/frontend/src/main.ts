// Page wiring: model picker, editable grid, generation buttons, playback.
// All state lives in module scope; the GridView owns the cells and the
// constraint payload, this file only moves DOM events in and paints
// results out.

import { ServiceClient, ServiceError } from "./api.js";
import { EditAction, GridView } from "./grid.js";
import { Player, ToneContext } from "./playback.js";
import { CellSymbol, ModelInfo, symbolLabel } from "./types.js";

const client = new ServiceClient("");
let models: ModelInfo[] = [];
let view: GridView | null = null;
let player: Player | null = null;
let audio: AudioContext | null = null;
let tds: HTMLTableCellElement[][] = [];
let lastRequest: (() => Promise<void>) | null = null;

const el = <T extends HTMLElement>(id: string): T => {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
};

const currentModel = (): ModelInfo | null => {
    const id = el<HTMLSelectElement>("model").value;
    return models.find(m => m.id === id) ?? null;
};

const parseSymbol = (raw: string): CellSymbol =>
    raw === "R" || raw === "H" ? raw : Number(raw);

window.onload = () => {
    void start();
};

async function start() {
    el<HTMLButtonElement>("generate").onclick = () => void guarded(generate);
    el<HTMLButtonElement>("reharmonize").onclick = () => void guarded(reharmonize);
    el<HTMLButtonElement>("retry").onclick = () => {
        if (lastRequest) void guarded(lastRequest);
    };
    el<HTMLButtonElement>("play").onclick = play;
    el<HTMLButtonElement>("halt").onclick = () => player?.stop();
    el<HTMLSelectElement>("model").onchange = rebuild;
    el<HTMLInputElement>("length").onchange = rebuild;
    try {
        models = await client.listModels();
    } catch (err) {
        showStatus(`cannot reach the service: ${(err as Error).message}`, true);
        return;
    }
    const select = el<HTMLSelectElement>("model");
    for (const m of models) {
        const opt = document.createElement("option");
        opt.value = m.id;
        opt.textContent = `${m.file} (${m.topology.n} voices, K=${m.topology.K}, L=${m.topology.L})`;
        select.appendChild(opt);
    }
    if (!models.length) {
        showStatus("the service lists no models; train one first", true);
        return;
    }
    rebuild();
}

function rebuild() {
    const model = currentModel();
    if (!model) return;
    const length = Math.max(1, Number(el<HTMLInputElement>("length").value) || 16);
    view = new GridView(model.topology.n, length, model.alphabets);
    view.modelId = model.id;
    buildPickers(model);
    buildTable();
    paint();
}

function buildPickers(model: ModelInfo) {
    const host = el<HTMLDivElement>("pickers");
    host.textContent = "";
    model.alphabets.forEach((alphabet, v) => {
        const label = document.createElement("label");
        label.textContent = `voice ${v} `;
        const select = document.createElement("select");
        select.id = `picker-${v}`;
        for (const sym of alphabet) {
            const opt = document.createElement("option");
            opt.value = String(sym);
            opt.textContent = symbolLabel(sym);
            select.appendChild(opt);
        }
        label.appendChild(select);
        host.appendChild(label);
    });
}

function buildTable() {
    if (!view) return;
    const host = el<HTMLDivElement>("grid");
    host.textContent = "";
    const table = document.createElement("table");
    tds = [];
    for (let v = 0; v < view.voices; v++) {
        const row = document.createElement("tr");
        const cells: HTMLTableCellElement[] = [];
        for (let t = 0; t < view.length; t++) {
            const td = document.createElement("td");
            td.onclick = () => cellClicked(v, t);
            td.oncontextmenu = ev => {
                ev.preventDefault();
                applyEdit(v, t, { kind: "clear" });
            };
            row.appendChild(td);
            cells.push(td);
        }
        table.appendChild(row);
        tds.push(cells);
    }
    host.appendChild(table);
}

function cellClicked(v: number, t: number) {
    if (!view) return;
    const sym = parseSymbol(el<HTMLSelectElement>(`picker-${v}`).value);
    const mode = (document.querySelector("input[name=mode]:checked") as HTMLInputElement | null)?.value;
    if (mode === "range") {
        const cell = view.cell(v, t);
        const allowed = cell.kind === "range" ? [...cell.allowed] : [];
        const at = allowed.indexOf(sym);
        if (at >= 0) allowed.splice(at, 1);
        else allowed.push(sym);
        applyEdit(v, t, allowed.length ? { kind: "range", allowed } : { kind: "clear" });
    } else {
        const cell = view.cell(v, t);
        if (cell.kind === "pinned" && cell.symbol === sym) {
            applyEdit(v, t, { kind: "clear" });  // second click unpins
        } else {
            applyEdit(v, t, { kind: "pin", symbol: sym });
        }
    }
}

function applyEdit(v: number, t: number, action: EditAction) {
    if (!view) return;
    try {
        view.edit(v, t, action);
        showStatus("", false);
    } catch (err) {
        showStatus((err as Error).message, false);
    }
    paint();
}

async function generate() {
    if (!view?.modelId) return;
    const doc = await client.sample(view.modelId, {
        length: view.length,
        seed: numberOrUndefined("seed"),
        steps: numberOrUndefined("steps"),
        constraints: view.constraintPayload(),
    });
    if (!doc || !view) return;  // superseded by a newer request
    view.applyResponse(doc.pieces[0].grid);
    paint();
}

async function reharmonize() {
    if (!view?.modelId) return;
    const raw = el<HTMLInputElement>("melody").value.trim();
    const melody = raw.split(/[\s,]+/).filter(Boolean).map(parseSymbol);
    if (melody.length !== view.length) {
        showStatus(`melody has ${melody.length} cells but the grid is ${view.length} long`, false);
        return;
    }
    const doc = await client.reharmonize(view.modelId, {
        melody,
        seed: numberOrUndefined("seed"),
        steps: numberOrUndefined("steps"),
        constraints: view.constraintPayload(),
    });
    if (!doc || !view) return;
    view.applyResponse(doc.pieces[0].grid);
    paint();
}

async function guarded(request: () => Promise<void>) {
    lastRequest = request;
    try {
        await request();
        showStatus("", false);
    } catch (err) {
        const detail = err instanceof ServiceError
            ? `${err.code}: ${err.message}`
            : (err as Error).message;
        showStatus(detail, true);
    }
}

function play() {
    if (!view) return;
    if (!player) {
        player = new Player(ensureAudio());
        player.onColumn = paintCursor;
        player.onDone = () => paintCursor(-1);
    }
    const bpm = Number(el<HTMLInputElement>("tempo").value) || 80;
    player.play(view.soundingGrid(), bpm);
}

function ensureAudio(): ToneContext | null {
    if (audio) return audio;
    const Ctor = window.AudioContext
        ?? (window as unknown as { webkitAudioContext?: typeof AudioContext }).webkitAudioContext;
    if (!Ctor) return null;  // silent fallback, cursor only
    audio = new Ctor();
    return audio;
}

function paint() {
    if (!view) return;
    for (const cell of view.renderCells()) {
        const td = tds[cell.voice]?.[cell.beat];
        if (!td) continue;
        td.textContent = cell.label;
        td.className = cell.kind;
    }
    const warning = el<HTMLDivElement>("warning");
    warning.textContent = view.warning ?? "";
    warning.hidden = view.warning === null;
}

function paintCursor(beat: number) {
    if (view) view.cursor = beat;
    tds.forEach(row => row.forEach((td, t) => {
        td.classList.toggle("cursor", t === beat);
    }));
}

function numberOrUndefined(id: string): number | undefined {
    const raw = el<HTMLInputElement>(id).value.trim();
    if (raw === "") return undefined;
    const n = Number(raw);
    return Number.isFinite(n) ? n : undefined;
}

function showStatus(text: string, retry: boolean) {
    const status = el<HTMLDivElement>("status");
    status.textContent = text;
    status.hidden = text === "";
    el<HTMLButtonElement>("retry").hidden = !(retry && lastRequest);
}
