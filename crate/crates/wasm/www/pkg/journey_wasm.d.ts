/* tslint:disable */
/* eslint-disable */

export class Workbench {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Items that may legally follow the draft; empty once it has an outcome.
     */
    allowedNext(items: string): string;
    /**
     * MDS coordinates coloured by a k-medoids partition.
     */
    clusterMap(k: number, w1: string, w2: string, w3: string, kernel: string, seed: number): string;
    /**
     * Closest observed journey with the requested outcome, plus the edits to reach it.
     */
    counterfactual(items: string, y_obj: number, lambda: number, k: number, w1: string, w2: string, w3: string, kernel: string): string;
    /**
     * Replaces the dataset with an uploaded CSV; returns the cleansing report.
     */
    loadCsv(text: string): string;
    /**
     * Starts on the bundled survey fixture.
     */
    constructor();
    /**
     * k-NN purchase estimate for a draft journey over its st1 and st2 items.
     */
    predict(items: string, k: number, w1: string, w2: string, w3: string, kernel: string): string;
    size(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_workbench_free: (a: number, b: number) => void;
    readonly workbench_allowedNext: (a: number, b: number, c: number) => [number, number, number, number];
    readonly workbench_clusterMap: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number) => [number, number, number, number];
    readonly workbench_counterfactual: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number, l: number, m: number, n: number) => [number, number, number, number];
    readonly workbench_loadCsv: (a: number, b: number, c: number) => [number, number, number, number];
    readonly workbench_new: () => [number, number, number];
    readonly workbench_predict: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number, l: number) => [number, number, number, number];
    readonly workbench_size: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
