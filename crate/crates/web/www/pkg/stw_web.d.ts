/* tslint:disable */
/* eslint-disable */

/**
 * A trained model and its corpus, kept alive between calls.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Distances between two whitespace-separated word lists, as JSON.
     * Repeated words add mass; unknown words are an error.
     */
    compare(a: string, b: string): string;
    /**
     * Trains on a fresh synthetic corpus over a 5-ary internal tree of
     * depth 1.
     */
    constructor(n_train: number, n_test: number, seed: bigint, margin: number, epochs: number);
    /**
     * Training and evaluation results as JSON.
     */
    summary(): string;
}

/**
 * `points` samples of `smooth_abs(x, alpha)` on `[-extent, extent]`, as
 * interleaved `x, y` pairs.
 */
export function smooth_abs_curve(alpha: number, extent: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_compare: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number, c: bigint, d: number, e: number) => [number, number, number];
    readonly demo_summary: (a: number) => [number, number];
    readonly smooth_abs_curve: (a: number, b: number, c: number) => [number, number];
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
