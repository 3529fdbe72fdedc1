import * as fs from "node:fs";

/**
 * EMB1 binary format, shared with the retrieval engine: bytes 0-3 magic
 * "EMB1", uint32 LE row count, uint32 LE dimension, then rows*dim
 * float32 LE values row-major. The ids sidecar is one id per line.
 */
export const EMB1_MAGIC = "EMB1";

export function writeEmb1(path: string, rows: Float32Array[], dim: number): void {
  const buf = Buffer.alloc(12 + 4 * rows.length * dim);
  buf.write(EMB1_MAGIC, 0, "ascii");
  buf.writeUInt32LE(rows.length, 4);
  buf.writeUInt32LE(dim, 8);
  let offset = 12;
  for (const row of rows) {
    if (row.length !== dim) {
      throw new Error(`row has ${row.length} values, expected ${dim}`);
    }
    for (let i = 0; i < dim; i++) {
      buf.writeFloatLE(row[i], offset);
      offset += 4;
    }
  }
  fs.writeFileSync(path, buf);
}

export function readEmb1(path: string): { nRows: number; dim: number; data: Float32Array } {
  const buf = fs.readFileSync(path);
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== EMB1_MAGIC) {
    throw new Error(`${path}: not an EMB1 file`);
  }
  const nRows = buf.readUInt32LE(4);
  const dim = buf.readUInt32LE(8);
  if (buf.length !== 12 + 4 * nRows * dim) {
    throw new Error(`${path}: payload size mismatch`);
  }
  const data = new Float32Array(nRows * dim);
  for (let i = 0; i < data.length; i++) data[i] = buf.readFloatLE(12 + 4 * i);
  return { nRows, dim, data };
}

export function writeIds(path: string, ids: string[]): void {
  fs.writeFileSync(path, ids.map((id) => id + "\n").join(""));
}
