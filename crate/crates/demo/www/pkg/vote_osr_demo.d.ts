/* tslint:disable */
/* eslint-disable */

/**
 * A forest and EVT model trained on three Gaussian blobs in the plane.
 */
export class OpenSetDemo {
    free(): void;
    [Symbol.dispose](): void;
    decision_map(delta: number, resolution: number): Int32Array;
    constructor(trees: number, spread: number, seed: bigint);
    readonly labels: Uint32Array;
    /**
     * Training points as interleaved `x, y` pairs.
     */
    readonly points: Float64Array;
    /**
     * Fitted `(alpha, gamma)` per class, flattened.
     */
    readonly weibulls: Float64Array;
}

export class ScenarioView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * One grid, row-major, values 0 (free), 0.5 (unobserved) or 1 (occupied).
     */
    frame(step: number): Float32Array;
    readonly cols: number;
    readonly rows: number;
    readonly steps: number;
}

export class WeibullView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly alpha: number;
    /**
     * Fraction of samples at or below each of `xs`.
     */
    readonly empirical: Float64Array;
    readonly fitted: Float64Array;
    readonly gamma: number;
    readonly samples: Float64Array;
    readonly xs: Float64Array;
}

/**
 * Names of the classes accepted by [`render_scenario`], in index order.
 */
export function class_names(): string[];

export function fit_sampled_weibull(alpha: number, gamma: number, n: number, trees: number, seed: bigint): WeibullView;

export function render_scenario(_class: number, sample: number, seed: bigint): ScenarioView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_opensetdemo_free: (a: number, b: number) => void;
    readonly __wbg_scenarioview_free: (a: number, b: number) => void;
    readonly __wbg_weibullview_free: (a: number, b: number) => void;
    readonly class_names: () => [number, number];
    readonly fit_sampled_weibull: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly opensetdemo_decision_map: (a: number, b: number, c: number) => [number, number, number, number];
    readonly opensetdemo_labels: (a: number) => [number, number];
    readonly opensetdemo_new: (a: number, b: number, c: bigint) => [number, number, number];
    readonly opensetdemo_points: (a: number) => [number, number];
    readonly opensetdemo_weibulls: (a: number) => [number, number];
    readonly render_scenario: (a: number, b: number, c: bigint) => [number, number, number];
    readonly scenarioview_cols: (a: number) => number;
    readonly scenarioview_frame: (a: number, b: number) => [number, number];
    readonly scenarioview_rows: (a: number) => number;
    readonly scenarioview_steps: (a: number) => number;
    readonly weibullview_alpha: (a: number) => number;
    readonly weibullview_empirical: (a: number) => [number, number];
    readonly weibullview_fitted: (a: number) => [number, number];
    readonly weibullview_gamma: (a: number) => number;
    readonly weibullview_samples: (a: number) => [number, number];
    readonly weibullview_xs: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
