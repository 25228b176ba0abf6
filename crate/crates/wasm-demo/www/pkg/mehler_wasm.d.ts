/* tslint:disable */
/* eslint-disable */

export class AlphaCurve {
    free(): void;
    [Symbol.dispose](): void;
    constructor(a: number, b: number, t_max: number, points: number);
    readonly alpha: Float64Array;
    readonly singular: Float64Array;
    readonly t: Float64Array;
}

export class Geodesic {
    free(): void;
    [Symbol.dispose](): void;
    constructor(a: number, b: number, x0: number, x1: number, t: number, samples: number);
    readonly action: number;
    readonly energy: number;
    readonly s: Float64Array;
    readonly x: Float64Array;
}

export function kernelProfile(a: number, b: number, g: number, x0: number, t: number, lo: number, hi: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_alphacurve_free: (a: number, b: number) => void;
    readonly __wbg_geodesic_free: (a: number, b: number) => void;
    readonly alphacurve_alpha: (a: number) => [number, number];
    readonly alphacurve_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly alphacurve_singular: (a: number) => [number, number];
    readonly alphacurve_t: (a: number) => [number, number];
    readonly geodesic_action: (a: number) => number;
    readonly geodesic_energy: (a: number) => number;
    readonly geodesic_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly geodesic_s: (a: number) => [number, number];
    readonly geodesic_x: (a: number) => [number, number];
    readonly kernelProfile: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
