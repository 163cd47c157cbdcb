export {
  DimensionMismatch,
  DuplicateId,
  EmptyInput,
  EncoderUnavailable,
  ExportError,
  MalformedDocument,
  UsageError,
} from "./errors.js";
export { DEFAULT_NGRAM_SIZES, hashNgram, hashedVector } from "./hash.js";
export { registerEncoder, resolveEncoder, type Encoder } from "./encoders.js";
export {
  idFor,
  readCorpusInterchange,
  textFor,
  type BudgetItemRecord,
  type CorpusFile,
  type EncodableRecord,
  type PropositionRecord,
} from "./interchange.js";
export {
  formatEmbeddingFile,
  readEmbeddingFile,
  writeEmbeddingFile,
  type EmbeddingFile,
  type EmbeddingRow,
} from "./embeddings.js";
export {
  EXPORT_TARGETS,
  runExport,
  type ExportJob,
  type ExportSummary,
  type ExportTarget,
} from "./export.js";
