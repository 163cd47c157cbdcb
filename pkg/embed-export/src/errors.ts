/** Error taxonomy mirroring the pipeline's loader-side error names. */

export class ExportError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** Invocation or job-configuration problem. */
export class UsageError extends ExportError {}

/** Requested encoder is not registered or not usable locally. */
export class EncoderUnavailable extends ExportError {}

/** An input or output file does not follow its line-JSON contract. */
export class MalformedDocument extends ExportError {}

/** The same id would appear more than once in one embedding file. */
export class DuplicateId extends ExportError {}

/** A vector's width disagrees with the declared dimension. */
export class DimensionMismatch extends ExportError {}

/** A step that needs at least one record received none. */
export class EmptyInput extends ExportError {}
