/* tslint:disable */
/* eslint-disable */

/**
 * The three singularity inequalities and their conjunction.
 */
export function singularity(xi1: number, xi2: number, horizon: number): string;

/**
 * Sparsest control and L1-optimal control for the double integrator from `(ξ1, ξ2)` to rest.
 */
export function solve(xi1: number, xi2: number, horizon: number, intervals: number): string;

/**
 * Switching function `s(t) = p̂₂ + (T - t) p̂₁` and the bang-off-bang pick on `[0, T]`.
 *
 * `u` is the maximizer of the Hamiltonian; on ties it reports the zero member
 * (`η = 1`) or `null` when the whole interval maximizes (`η = 0`, `s = 0`).
 */
export function switching_profile(p1: number, p2: number, eta: number, horizon: number, samples: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly singularity: (a: number, b: number, c: number) => [number, number];
    readonly solve: (a: number, b: number, c: number, d: number) => [number, number];
    readonly switching_profile: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
