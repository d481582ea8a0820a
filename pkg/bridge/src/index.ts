export { fnv1a64, fnv1a64Hex } from "./fnv.js";
export {
  Batch,
  AnnotatedBatch,
  BatchItem,
  DIGEST_ALGO,
  KNOWN_VERSIONS,
  StreamDigestError,
  StreamFormatError,
  StreamHeader,
  StreamReader,
  StreamVersionError,
} from "./streamReader.js";
export {
  LOG_HEADER,
  PredictionLogError,
  PredictionRecord,
  formatPredictionLog,
  readPredictionLog,
  writePredictionLog,
} from "./predictionLog.js";
