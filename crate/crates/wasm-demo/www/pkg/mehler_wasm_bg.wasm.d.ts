/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_alphacurve_free: (a: number, b: number) => void;
export const __wbg_geodesic_free: (a: number, b: number) => void;
export const alphacurve_alpha: (a: number) => [number, number];
export const alphacurve_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const alphacurve_singular: (a: number) => [number, number];
export const alphacurve_t: (a: number) => [number, number];
export const geodesic_action: (a: number) => number;
export const geodesic_energy: (a: number) => number;
export const geodesic_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const geodesic_s: (a: number) => [number, number];
export const geodesic_x: (a: number) => [number, number];
export const kernelProfile: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
