/* tslint:disable */
/* eslint-disable */

/**
 * `ln gamma` for dimensions `1..=max_dim` at radius `mu`, per direction
 * distribution.
 */
export function gamma_profile(mu: number, max_dim: number): string;

/**
 * Mean optimality gap per iteration for Vanilla, ZoAR without history and
 * ZoAR with `depth` blocks, all from the same starting point.
 */
export function optimization_curves(objective: string, rule: string, dim: number, iterations: bigint, depth: number, repeats: number, seed: bigint): string;

/**
 * Frozen-point estimator variance for history depths `1..=max_depth` on the
 * Quadratic, relative to depth 1, next to the `1/N` reference.
 */
export function variance_profile(dim: number, k: number, max_depth: number, trials: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly gamma_profile: (a: number, b: number) => [number, number, number, number];
    readonly optimization_curves: (a: number, b: number, c: number, d: number, e: number, f: bigint, g: number, h: number, i: bigint) => [number, number, number, number];
    readonly variance_profile: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
