/* tslint:disable */
/* eslint-disable */

/**
 * Eigenvector of the size-`n` truncation whose eigenangle is closest to
 * `eta`. Returns `[eigenangle, fitted decay rate, log|ξ_0|, log|ξ_1|, …]`.
 */
export function eigenvector_profile(alpha_text: string, a_text: string, lambda: number, n: number, eta: number, seed: bigint): Float64Array;

/**
 * `[η₀, 𝒥(η₀), η₁, 𝒥(η₁), …]` on `points` equally spaced angles in [0, 2π].
 */
export function j_curve(alpha_text: string, a_text: string, points: number): Float64Array;

/**
 * `[η, L_N(η), λ²𝒥(η)/2, …]` on `points` angles inside (δ, π − δ).
 */
export function lyapunov_curve(alpha_text: string, a_text: string, lambda: number, n: number, points: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly eigenvector_profile: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly j_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly lyapunov_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
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
