export { hash64 } from './hash64.js';
export {
  CaptureShim,
  DataOpCallback,
  ShimOptions,
  ShimWarnings,
  TargetCallback,
} from './capture.js';
export {
  DataOpKind,
  EventKind,
  TraceEventRecord,
  TraceHeader,
  serializeEvent,
  serializeHeader,
} from './model.js';
export { SymbolMap, SymbolRange, resolveLocations } from './resolve.js';
