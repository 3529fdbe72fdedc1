export class EncoderLoadFailure extends Error {
  constructor(modelId: string, reason: string) {
    super(`cannot load encoder "${modelId}": ${reason}`);
    this.name = "EncoderLoadFailure";
  }
}

export class EmptyInputError extends Error {
  constructor(path: string) {
    super(`no passages found in ${path}`);
    this.name = "EmptyInputError";
  }
}

export class InvalidJobError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "InvalidJobError";
  }
}

export class MalformedLineError extends Error {
  constructor(path: string, lineno: number, reason: string) {
    super(`${path}:${lineno}: ${reason}`);
    this.name = "MalformedLineError";
  }
}
