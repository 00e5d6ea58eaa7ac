/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_opensetdemo_free: (a: number, b: number) => void;
export const __wbg_scenarioview_free: (a: number, b: number) => void;
export const __wbg_weibullview_free: (a: number, b: number) => void;
export const class_names: () => [number, number];
export const fit_sampled_weibull: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const opensetdemo_decision_map: (a: number, b: number, c: number) => [number, number, number, number];
export const opensetdemo_labels: (a: number) => [number, number];
export const opensetdemo_new: (a: number, b: number, c: bigint) => [number, number, number];
export const opensetdemo_points: (a: number) => [number, number];
export const opensetdemo_weibulls: (a: number) => [number, number];
export const render_scenario: (a: number, b: number, c: bigint) => [number, number, number];
export const scenarioview_cols: (a: number) => number;
export const scenarioview_frame: (a: number, b: number) => [number, number];
export const scenarioview_rows: (a: number) => number;
export const scenarioview_steps: (a: number) => number;
export const weibullview_alpha: (a: number) => number;
export const weibullview_empirical: (a: number) => [number, number];
export const weibullview_fitted: (a: number) => [number, number];
export const weibullview_gamma: (a: number) => number;
export const weibullview_samples: (a: number) => [number, number];
export const weibullview_xs: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
